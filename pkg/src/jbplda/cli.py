"""Command-line front end: train / score / eval / synth.

Every command is a thin adapter over the library functions; numerical
outputs are bit-identical to direct calls.  On failure the exit code is
nonzero and any partially written output files are removed.
"""

import argparse
import os
import sys

import numpy as np

from . import dataset as ds
from . import jb, lda, metrics, modelio, plda, synth
from .exceptions import JbpldaError, PathUnsupported

TRAIN_MODELS = ("jb", "splda", "kaldi", "twocov")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _rank_arg(text):
    if text in ("full", "auto"):
        return text
    return _positive_int(text)


def _spectrum_arg(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad spectrum: {exc}")


def _sessions_arg(text):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad session count: {exc}")
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("session counts must be >= 1")
    return values[0] if len(values) == 1 else values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jbplda",
        description="Joint Bayesian / PLDA verification back-ends",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model with EM and emit a convergence trace")
    p.add_argument("--model", choices=TRAIN_MODELS, required=True)
    p.add_argument("--data", required=True, help="vector file (binary GVB1 or text)")
    p.add_argument("--labels", required=True, help="TSV utt_id<TAB>speaker_id")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--iters", type=_positive_int, default=20)
    p.add_argument("--mode", choices=("exact", "approx"), default="exact",
                   help="EM statistics (jb only)")
    p.add_argument("--subspace-dim", type=_positive_int, help="latent dimension (splda)")
    p.add_argument("--tol", type=float, default=None,
                   help="optional relative log-likelihood stopping threshold")
    p.add_argument("--trace", help="trace CSV path (default: <out>.trace.csv)")
    p.add_argument("--length-norm", action="store_true",
                   help="length-normalize after centering")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a trial list against a model")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True, help="output score TSV")
    p.add_argument("--path", choices=("full", "sd", "svd"), default="full")
    p.add_argument("--sd-rank", type=_rank_arg, default="auto")
    p.add_argument("--svd-rank", type=_rank_arg, default="auto")
    p.add_argument("--length-norm", action="store_true")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute EER/minDCF and DET points from scores")
    p.add_argument("--scores", required=True, help="score TSV from the score command")
    p.add_argument("--trials", required=True, help="trial TSV supplying the labels")
    p.add_argument("--det-out", help="DET CSV path (default: <scores>.det.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset, truth model, trials")
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--speakers", type=_positive_int, required=True)
    p.add_argument("--sessions", type=_sessions_arg, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mu-spectrum", type=_spectrum_arg, default=[1.0])
    p.add_argument("--eps-spectrum", type=_spectrum_arg, default=[1.0])
    p.add_argument("--targets", type=int, default=0)
    p.add_argument("--nontargets", type=int, default=0)
    p.add_argument("--trial-seed", type=int, default=None,
                   help="trial list seed (default: --seed)")
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def _load_preprocessed(args, mean=None):
    data = ds.load_dataset(args.data, args.labels)
    data = ds.center(data, mean)
    if args.length_norm:
        data = ds.length_normalize(data)
    return data


def _write_trace(path, trace, outputs):
    outputs.append(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write("iteration,neg_loglik\n")
        for i, value in enumerate(trace):
            f.write(f"{i},{-value:.12g}\n")


def cmd_train(args, outputs):
    if args.mode == "approx" and args.model != "jb":
        raise PathUnsupported("--mode approx applies to the jb model only")
    if args.model == "splda" and args.subspace_dim is None:
        raise PathUnsupported("--subspace-dim is required for splda")
    data = _load_preprocessed(args)
    if args.model == "jb":
        model, trace = jb.train_jb(data, n_iters=args.iters, mode=args.mode, rel_tol=args.tol)
    elif args.model == "splda":
        model, trace = plda.train_splda(
            data, subspace_dim=args.subspace_dim, n_iters=args.iters, rel_tol=args.tol
        )
    elif args.model == "kaldi":
        model, trace = plda.train_kaldi(data, n_iters=args.iters, rel_tol=args.tol)
    else:
        model, trace = plda.train_twocov(data, n_iters=args.iters, rel_tol=args.tol)
    outputs.append(args.out)
    modelio.save_model(args.out, model)
    _write_trace(args.trace or args.out + ".trace.csv", trace, outputs)
    print(f"trained {args.model} on {data.n_speakers} speakers, "
          f"{data.n_vectors} vectors; final loglik {trace[-1]:.6g}")


def _resolve_rank(value, dim):
    if value == "auto":
        return None
    return dim if value == "full" else value


def _build_scorer(model, args):
    if isinstance(model, (jb.JbModel, plda.TwoCovModel)):
        as_jb = jb.JbModel(model.mean, model.between_cov, model.within_cov)
        if args.path == "full":
            return jb.make_full_scorer(as_jb)
        if args.path == "sd":
            return jb.make_sd_scorer(as_jb, rank=_resolve_rank(args.sd_rank, as_jb.dim))
        return jb.make_pair_score_fn(as_jb, rank=_resolve_rank(args.svd_rank, as_jb.dim))
    if args.path != "full":
        raise PathUnsupported(f"--path {args.path} is not available for this model type")
    if isinstance(model, plda.SpldaModel):
        return plda.make_splda_scorer(model)
    if isinstance(model, plda.KaldiPldaModel):
        return plda.make_kaldi_scorer(model)
    if isinstance(model, lda.LdaProjection):
        return lda.make_lda_scorer(model)
    raise PathUnsupported(f"cannot score with {type(model).__name__}")


def cmd_score(args, outputs):
    model = modelio.load_model(args.model)
    data = _load_preprocessed(args, mean=model.mean)
    trials = ds.load_trials(args.trials)
    scorer = _build_scorer(model, args)
    scores = metrics.run_trials(scorer, data, trials, threads=args.threads)
    outputs.append(args.out)
    metrics.save_scores(args.out, scores)
    print(f"scored {len(scores)} trials -> {args.out}")


def cmd_eval(args, outputs):
    scores = metrics.load_scores(args.scores)
    trials = ds.load_trials(args.trials)
    if len(trials) != len(scores):
        raise JbpldaError(
            f"score file has {len(scores)} rows but trial file has {len(trials)}"
        )
    entries = []
    for trial, entry in zip(trials, scores.entries):
        if (trial.enroll_id, trial.test_id) != (entry.enroll_id, entry.test_id):
            raise JbpldaError(
                f"trial/score mismatch: {trial.enroll_id}/{trial.test_id} vs "
                f"{entry.enroll_id}/{entry.test_id}"
            )
        entries.append(metrics.ScoreEntry(entry.enroll_id, entry.test_id, entry.score, trial.label))
    report = metrics.evaluate(metrics.ScoreSet(tuple(entries)))
    det_path = args.det_out or args.scores + ".det.csv"
    outputs.append(det_path)
    metrics.save_det_points(det_path, report.det_points)
    print(f"trials: {report.counts[0]} target, {report.counts[1]} nontarget")
    print(f"EER: {100.0 * report.eer:.6g}%")
    print(f"minDCF08: {report.min_dcf_08:.6g}")
    print(f"minDCF10: {report.min_dcf_10:.6g}")
    print(f"DET points written to {det_path}")


def _expand_spectrum(values, dim, name):
    if len(values) == 1:
        return [values[0]] * dim
    if len(values) != dim:
        raise JbpldaError(f"--{name} needs 1 or {dim} comma-separated values")
    return values


def cmd_synth(args, outputs):
    spec = synth.SynthSpec(
        dim=args.dim,
        n_speakers=args.speakers,
        sessions=args.sessions,
        mu_spectrum=_expand_spectrum(args.mu_spectrum, args.dim, "mu-spectrum"),
        eps_spectrum=_expand_spectrum(args.eps_spectrum, args.dim, "eps-spectrum"),
        seed=args.seed,
    )
    data, true_between, true_within = synth.generate_dataset(spec)

    suffix = ".gvb" if args.format == "binary" else ".txt"
    vec_path = args.out_prefix + suffix
    label_path = args.out_prefix + ".labels.tsv"
    truth_path = args.out_prefix + ".truth.mdl"
    outputs.extend([vec_path, label_path, truth_path])
    ds.save_dataset(data, vec_path, label_path, binary=(args.format == "binary"))
    modelio.save_model(
        truth_path, plda.TwoCovModel(np.zeros(args.dim), true_between, true_within)
    )
    written = [vec_path, label_path, truth_path]
    if args.targets or args.nontargets:
        trial_seed = args.trial_seed if args.trial_seed is not None else args.seed
        trials = synth.generate_trials(data, args.targets, args.nontargets, trial_seed)
        trial_path = args.out_prefix + ".trials.tsv"
        outputs.append(trial_path)
        ds.save_trials(trial_path, trials)
        written.append(trial_path)
    print("wrote " + ", ".join(written))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs = []
    try:
        args.func(args, outputs)
    except JbpldaError as exc:
        for path in outputs:
            if os.path.exists(path):
                os.unlink(path)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
