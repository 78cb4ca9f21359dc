import numpy as np
import pytest

from jbplda.dataset import Dataset, SpeakerGroup, center
from jbplda.exceptions import DimensionMismatch, EmptyDataset, EmptySet, PathUnsupported
from jbplda.jb import (
    JbModel,
    SetLikelihood,
    init_jb_model,
    jb_em_step,
    jb_loglik,
    jb_score_full,
    jb_score_sd,
    make_pair_score_fn,
    make_pair_scorer,
    make_sd_transform,
    pair_score,
    posterior_stats,
    train_jb,
    transform_vectors,
)
from jbplda.synth import (
    SynthSpec,
    generate_dataset,
    oracle_pair_llr,
    oracle_set_loglik,
    sample_spd,
)

SCALAR_MODEL = JbModel([0.0], [[1.0]], [[1.0]])


def one_speaker(vectors):
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    utts = tuple(f"u{i}" for i in range(vectors.shape[0]))
    return Dataset(vectors.shape[1], (SpeakerGroup("spk", utts, vectors),), np.zeros(vectors.shape[1]))


def random_model(dim, seed, lo=0.4, hi=2.5):
    between = sample_spd(dim, np.linspace(hi, lo, dim), seed=seed)
    within = sample_spd(dim, np.linspace(hi * 0.8, lo * 1.2, dim), seed=seed + 1000)
    return JbModel(np.zeros(dim), between, within)


# ---------------------------------------------------------------------------
# EM step


def test_em_step_exact_hand_example():
    model = JbModel([0.0, 0.0], np.eye(2), np.eye(2))
    ds = one_speaker([[2.0, 0.0]])
    new, _ = jb_em_step(ds, model, mode="exact")
    np.testing.assert_allclose(new.between_cov, np.diag([1.5, 0.5]), atol=1e-12)
    np.testing.assert_allclose(new.within_cov, np.diag([1.5, 0.5]), atol=1e-12)


def test_em_step_approx_hand_example():
    model = JbModel([0.0, 0.0], np.eye(2), np.eye(2))
    ds = one_speaker([[2.0, 0.0]])
    new, _ = jb_em_step(ds, model, mode="approx")
    np.testing.assert_allclose(new.between_cov, np.diag([1.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(new.within_cov, np.diag([1.0, 0.0]), atol=1e-12)


def test_em_modes_genuinely_differ():
    # exact keeps the update positive definite, approx drops to singular
    model = JbModel([0.0, 0.0], np.eye(2), np.eye(2))
    ds = one_speaker([[2.0, 0.0]])
    exact, _ = jb_em_step(ds, model, mode="exact")
    approx, _ = jb_em_step(ds, model, mode="approx")
    assert np.linalg.eigvalsh(exact.between_cov).min() > 0.0
    assert np.linalg.eigvalsh(approx.between_cov).min() == pytest.approx(0.0, abs=1e-12)


def test_em_exact_monotone_loglik():
    spec = SynthSpec(8, 200, 5, list(np.linspace(2.0, 0.3, 8)), [1.0] * 8, seed=42)
    ds, _, _ = generate_dataset(spec)
    ds = center(ds)
    _, trace = train_jb(ds, n_iters=20, mode="exact")
    assert len(trace) == 21
    diffs = np.diff(trace)
    assert np.all(diffs >= -1e-8 * np.abs(trace[:-1]))


def test_em_updates_are_psd():
    spec = SynthSpec(5, 40, (1, 2, 3, 4, 5) * 8, list(np.linspace(1.5, 0.2, 5)), [1.0] * 5, seed=9)
    ds, _, _ = generate_dataset(spec)
    ds = center(ds)
    model = init_jb_model(ds)
    for _ in range(3):
        model, _ = jb_em_step(ds, model, mode="exact")
        assert np.linalg.eigvalsh(model.between_cov).min() >= -1e-10
        assert np.linalg.eigvalsh(model.within_cov).min() >= -1e-10


def test_em_rejects_empty_dataset():
    ds = Dataset(2, (), np.zeros(2))
    with pytest.raises(EmptyDataset):
        jb_em_step(ds, JbModel([0, 0], np.eye(2), np.eye(2)))


def test_em_loglik_before_is_input_model_loglik():
    spec = SynthSpec(4, 20, 3, [1.0] * 4, [1.0] * 4, seed=10)
    ds, _, _ = generate_dataset(spec)
    ds = center(ds)
    model = init_jb_model(ds)
    _, before = jb_em_step(ds, model)
    assert before == pytest.approx(jb_loglik(ds, model), abs=1e-10)


# ---------------------------------------------------------------------------
# posterior statistics


def test_posterior_stats_invariants():
    model = random_model(4, seed=31)
    spec = SynthSpec(4, 12, (1, 2, 3, 4) * 3, [1.0] * 4, [1.0] * 4, seed=32)
    ds, _, _ = generate_dataset(spec)
    ds = center(ds)
    stats = posterior_stats(ds, model)
    for i, g in enumerate(ds.speakers):
        s_i = g.vectors.sum(axis=0)
        m_i = g.num_sessions
        np.testing.assert_allclose(
            stats.residuals[i].sum(axis=0), s_i - m_i * stats.means[i], atol=1e-10
        )
        cov = stats.covariance_for(i)
        assert np.linalg.eigvalsh(cov).min() > 0.0
    # posterior covariance shared across equal session counts
    assert set(stats.covariances) == set(np.unique(ds.session_counts()).tolist())


def test_posterior_matches_precision_form():
    # safe identity must agree with the direct precision-form inverse
    model = random_model(3, seed=33)
    ds_vectors = np.random.default_rng(34).standard_normal((4, 3))
    ds = one_speaker(ds_vectors)
    stats = posterior_stats(ds, model)
    P_direct = np.linalg.inv(
        np.linalg.inv(model.between_cov) + 4 * np.linalg.inv(model.within_cov)
    )
    np.testing.assert_allclose(stats.covariance_for(0), P_direct, atol=1e-10)
    mu_direct = P_direct @ np.linalg.solve(model.within_cov, ds_vectors.sum(axis=0))
    np.testing.assert_allclose(stats.means[0], mu_direct, atol=1e-10)


def test_posterior_tolerates_singular_between():
    model = JbModel([0.0, 0.0], np.diag([1.0, 0.0]), np.eye(2))
    ds = one_speaker([[1.0, 1.0], [3.0, -1.0]])
    stats = posterior_stats(ds, model)
    # no variance in the second direction: posterior mean stays at zero there
    assert stats.means[0][1] == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# likelihood and full scoring


def test_loglik_scalar_hand_example():
    ds = one_speaker([[0.0], [0.0]])
    expected = -np.log(2 * np.pi) - 0.5 * np.log(3.0)
    assert jb_loglik(ds, SCALAR_MODEL) == pytest.approx(expected, abs=1e-12)


def test_loglik_zero_between_factorizes():
    rng = np.random.default_rng(40)
    within = sample_spd(3, [1.5, 1.0, 0.5], seed=41)
    model = JbModel(np.zeros(3), np.zeros((3, 3)), within)
    X = rng.standard_normal((4, 3))
    ds = one_speaker(X)
    independent = sum(
        float(-0.5 * (3 * np.log(2 * np.pi) + np.linalg.slogdet(within)[1] + x @ np.linalg.solve(within, x)))
        for x in X
    )
    assert jb_loglik(ds, model) == pytest.approx(independent, abs=1e-10)


def test_loglik_matches_dense_oracle():
    rng = np.random.default_rng(50)
    for trial in range(25):
        d = int(rng.integers(1, 7))
        m = int(rng.integers(1, 5))
        model = random_model(d, seed=100 + trial)
        X = rng.standard_normal((m, d))
        got = jb_loglik(one_speaker(X), model)
        want = oracle_set_loglik(X, model.between_cov, model.within_cov)
        assert got == pytest.approx(want, abs=1e-8)


def test_score_full_hand_examples():
    assert jb_score_full([[0.0]], [[0.0]], SCALAR_MODEL) == pytest.approx(
        np.log(2.0) - 0.5 * np.log(3.0), abs=1e-12
    )
    assert jb_score_full([[1.0]], [[1.0]], SCALAR_MODEL) == pytest.approx(0.310508, abs=1e-6)


def test_score_zero_between_is_zero():
    model = JbModel(np.zeros(2), np.zeros((2, 2)), np.eye(2))
    rng = np.random.default_rng(51)
    score = jb_score_full(rng.standard_normal((3, 2)), rng.standard_normal((2, 2)), model)
    assert score == pytest.approx(0.0, abs=1e-12)


def test_score_full_exactly_symmetric():
    rng = np.random.default_rng(52)
    model = random_model(4, seed=53)
    X1 = rng.standard_normal((3, 4))
    X2 = rng.standard_normal((2, 4))
    assert jb_score_full(X1, X2, model) == jb_score_full(X2, X1, model)


def test_score_full_matches_oracle():
    rng = np.random.default_rng(54)
    for trial in range(20):
        d = int(rng.integers(1, 7))
        model = random_model(d, seed=200 + trial)
        X1 = rng.standard_normal((int(rng.integers(1, 4)), d))
        X2 = rng.standard_normal((int(rng.integers(1, 4)), d))
        got = jb_score_full(X1, X2, model)
        want = oracle_pair_llr(X1, X2, model.between_cov, model.within_cov)
        assert got == pytest.approx(want, abs=1e-8)


def test_score_rejects_empty_set():
    with pytest.raises(EmptySet):
        jb_score_full(np.zeros((0, 1)), [[0.0]], SCALAR_MODEL)


def test_score_rejects_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        jb_score_full([[0.0, 1.0]], [[0.0, 1.0]], SCALAR_MODEL)


# ---------------------------------------------------------------------------
# simultaneous-diagonalization path


def test_sd_scalar_case():
    model = JbModel([0.0], [[2.0]], [[1.0]])
    sd = make_sd_transform(model, rank=1)
    np.testing.assert_allclose(sd.eigvals, [2.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(sd.basis), [[1.0]], atol=1e-12)


def test_sd_default_rank_drops_null_directions():
    model = JbModel(np.zeros(2), np.diag([4.0, 0.0]), np.eye(2))
    sd = make_sd_transform(model)
    assert sd.rank == 1
    np.testing.assert_allclose(sd.eigvals, [4.0], atol=1e-10)


def test_sd_full_rank_matches_full_scoring():
    rng = np.random.default_rng(60)
    model = random_model(5, seed=61)
    sd = make_sd_transform(model, rank=5)
    like = SetLikelihood(model.between_cov, model.within_cov)
    for _ in range(100):
        X1 = rng.standard_normal((int(rng.integers(1, 4)), 5))
        X2 = rng.standard_normal((int(rng.integers(1, 4)), 5))
        got = jb_score_sd(sd, transform_vectors(sd, X1), transform_vectors(sd, X2))
        assert got == pytest.approx(like.llr(X1, X2), abs=1e-8)


def test_sd_zero_eigenvalue_contributes_nothing():
    from jbplda.jb import SdTransform

    sd_with = SdTransform(np.eye(3)[:, :2], np.array([2.0, 0.0]))
    sd_without = SdTransform(np.eye(3)[:, :1], np.array([2.0]))
    rng = np.random.default_rng(62)
    Y1 = rng.standard_normal((2, 3))
    Y2 = rng.standard_normal((1, 3))
    got = jb_score_sd(sd_with, Y1[:, :2], Y2[:, :2])
    want = jb_score_sd(sd_without, Y1[:, :1], Y2[:, :1])
    assert got == pytest.approx(want, abs=1e-12)


def test_sd_transform_invariants():
    model = random_model(6, seed=63)
    sd = make_sd_transform(model)
    np.testing.assert_allclose(sd.basis.T @ model.within_cov @ sd.basis, np.eye(sd.rank), atol=1e-8)
    np.testing.assert_allclose(
        sd.basis.T @ model.between_cov @ sd.basis, np.diag(sd.eigvals), atol=1e-8
    )
    assert np.all(np.diff(sd.eigvals) <= 1e-12)


def test_sd_zero_between_gives_empty_transform_and_zero_scores():
    model = JbModel(np.zeros(3), np.zeros((3, 3)), np.eye(3))
    sd = make_sd_transform(model)
    assert sd.rank == 0
    rng = np.random.default_rng(64)
    Y1 = transform_vectors(sd, rng.standard_normal((2, 3)))
    Y2 = transform_vectors(sd, rng.standard_normal((1, 3)))
    assert jb_score_sd(sd, Y1, Y2) == 0.0


def test_sd_smallest_ordering_scores_consistently():
    from jbplda.jb import make_sd_scorer

    model = random_model(4, seed=65)
    rng = np.random.default_rng(66)
    X1 = rng.standard_normal((2, 4))
    X2 = rng.standard_normal((3, 4))
    # keeping every dimension must agree with full scoring whichever end is kept
    like = SetLikelihood(model.between_cov, model.within_cov)
    for keep in ("largest", "smallest"):
        got = make_sd_scorer(model, rank=4, keep=keep)(X1, X2)
        assert got == pytest.approx(like.llr(X1, X2), abs=1e-8)


def test_sd_ordering_flag():
    model = JbModel(np.zeros(3), np.diag([4.0, 1.0, 0.25]), np.eye(3))
    hi = make_sd_transform(model, rank=1, keep="largest")
    lo = make_sd_transform(model, rank=2, keep="smallest")
    assert hi.eigvals[0] == pytest.approx(4.0, abs=1e-10)
    np.testing.assert_allclose(lo.eigvals, [1.0, 0.25], atol=1e-10)
    assert np.all(np.diff(lo.eigvals) <= 0)  # still descending after selection


# ---------------------------------------------------------------------------
# pair scorer


def test_pair_scorer_hand_values():
    scorer = make_pair_scorer(SCALAR_MODEL)
    A = (scorer.quad_vecs * scorer.quad_vals) @ scorer.quad_vecs.T
    assert A[0, 0] == pytest.approx(-1.0 / 6.0, abs=1e-12)
    assert scorer.cross[0, 0] == pytest.approx(-1.0 / 3.0, abs=1e-12)
    assert scorer.offset == pytest.approx(np.log(2.0) - 0.5 * np.log(3.0), abs=1e-12)
    assert pair_score(scorer, [1.0], [1.0]) == pytest.approx(0.310508, abs=1e-6)


def test_pair_scorer_zero_between_is_zero():
    model = JbModel(np.zeros(2), np.zeros((2, 2)), np.eye(2))
    scorer = make_pair_scorer(model)
    assert scorer.rank == 0
    assert pair_score(scorer, [1.0, 2.0], [0.5, -1.0]) == pytest.approx(0.0, abs=1e-12)


def test_pair_scorer_matches_full_scoring():
    rng = np.random.default_rng(70)
    model = random_model(6, seed=71)
    fn = make_pair_score_fn(model)
    like = SetLikelihood(model.between_cov, model.within_cov)
    for _ in range(100):
        x1 = rng.standard_normal(6)
        x2 = rng.standard_normal(6)
        assert fn(x1, x2) == pytest.approx(like.llr(x1, x2), abs=1e-8)


def test_pair_scorer_factorized_equals_dense():
    rng = np.random.default_rng(72)
    model = random_model(5, seed=73)
    scorer = make_pair_scorer(model)
    A = (scorer.quad_vecs * scorer.quad_vals) @ scorer.quad_vecs.T
    np.testing.assert_allclose(A, A.T, atol=1e-12)
    for _ in range(20):
        x1 = rng.standard_normal(5)
        x2 = rng.standard_normal(5)
        dense = 0.5 * (x1 @ A @ x1 + x2 @ A @ x2) - x1 @ scorer.cross @ x2 + scorer.offset
        assert pair_score(scorer, x1, x2) == pytest.approx(dense, abs=1e-8)


def test_pair_scorer_rank_tracks_between_rank():
    between = np.diag([2.0, 1.0, 0.0, 0.0])
    model = JbModel(np.zeros(4), between, np.eye(4))
    scorer = make_pair_scorer(model)
    assert scorer.rank == 2


def test_pair_scorer_rejects_multi_vector_sets():
    fn = make_pair_score_fn(random_model(3, seed=74))
    with pytest.raises(PathUnsupported):
        fn(np.zeros((2, 3)), np.zeros(3))


# ---------------------------------------------------------------------------
# training driver


def test_train_trace_shape_and_consistency():
    spec = SynthSpec(4, 30, 2, [1.0] * 4, [1.0] * 4, seed=80)
    ds, _, _ = generate_dataset(spec)
    ds = center(ds)
    model, trace = train_jb(ds, n_iters=5)
    assert len(trace) == 6
    assert trace[-1] == pytest.approx(jb_loglik(ds, model), abs=1e-9)


def test_train_rel_tol_stops_early():
    spec = SynthSpec(4, 50, 3, [1.0] * 4, [1.0] * 4, seed=81)
    ds, _, _ = generate_dataset(spec)
    ds = center(ds)
    _, trace = train_jb(ds, n_iters=200, rel_tol=1e-6)
    assert len(trace) < 201
