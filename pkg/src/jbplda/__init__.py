"""Joint Bayesian and Gaussian PLDA back-ends for vector-embedding verification.

Train latent-Gaussian verification models with EM, score enrollment/test
vector sets by log-likelihood ratio (exact, diagonalized-basis, or
precomputed pair paths), and evaluate trial lists with EER / minimum DCF /
DET metrics.  Synthetic generators and dense brute-force oracles back the
test suite.
"""

from .dataset import (
    Dataset,
    NONTARGET,
    SpeakerGroup,
    TARGET,
    Trial,
    TrialList,
    build_dataset,
    center,
    length_normalize,
    load_dataset,
    load_labels,
    load_trials,
    load_vectors,
    save_dataset,
    save_labels,
    save_trials,
    save_vectors_binary,
    save_vectors_text,
)
from .jb import (
    JbModel,
    PairScorer,
    PosteriorStats,
    SdTransform,
    SetLikelihood,
    gaussian_posterior,
    init_jb_model,
    jb_em_step,
    jb_loglik,
    jb_score_full,
    jb_score_sd,
    make_full_scorer,
    make_pair_score_fn,
    make_pair_scorer,
    make_sd_scorer,
    make_sd_transform,
    pair_score,
    posterior_stats,
    train_jb,
    transform_vectors,
)
from .lda import (
    LdaProjection,
    cosine_score,
    fit_lda,
    lda_trial_score,
    make_lda_scorer,
    project,
)
from .linalg import (
    factor_spd,
    gaussian_logpdf_dense,
    gen_eig_simdiag,
    spd_logdet_solve,
)
from .metrics import (
    DCF08,
    DCF10,
    EvalReport,
    ScoreEntry,
    ScoreSet,
    compute_eer,
    compute_min_dcf,
    det_points,
    eer_from_det_points,
    evaluate,
    load_scores,
    run_trials,
    save_det_points,
    save_scores,
)
from .modelio import load_model, save_model
from .plda import (
    KaldiPldaModel,
    SpldaModel,
    TwoCovModel,
    init_kaldi_model,
    init_splda_model,
    init_twocov_model,
    kaldi_em_step,
    kaldi_loglik,
    kaldi_score,
    make_kaldi_scorer,
    make_splda_scorer,
    make_twocov_scorer,
    splda_em_step,
    splda_loglik,
    splda_score,
    train_kaldi,
    train_splda,
    train_twocov,
    twocov_em_step,
    twocov_loglik,
    twocov_score,
)
from .synth import (
    SynthSpec,
    generate_dataset,
    generate_trials,
    oracle_pair_llr,
    oracle_set_loglik,
    sample_spd,
    stacked_covariance,
)

__version__ = "0.1.0"
