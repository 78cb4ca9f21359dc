"""Trial scoring and detection metrics: EER, minimum DCF, DET curves.

Operating points are taken at every distinct threshold (between consecutive
sorted scores plus both extremes), so tied scores collapse into a single
threshold step.  The equal error rate is read off the convex hull of those
points: the hull is what any thresholding policy (including randomized
ones) can achieve, it keeps the EER invariant under
label-swap-plus-negation to within an ulp, and it degrades gracefully to
0.5 for reversed classifiers.  Minimum DCF minimizes over the raw points.
"""

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import NONTARGET, TARGET
from .exceptions import (
    InvalidOperatingPoint,
    MissingLabels,
    ParseError,
    UnknownId,
)

OperatingPoint = namedtuple("OperatingPoint", "p_target c_miss c_fa")

# Published NIST operating points the report columns refer to.
DCF08 = OperatingPoint(p_target=0.01, c_miss=10.0, c_fa=1.0)
DCF10 = OperatingPoint(p_target=0.001, c_miss=1.0, c_fa=1.0)


@dataclass(frozen=True)
class ScoreEntry:
    enroll_id: str
    test_id: str
    score: float
    label: str | None = None


@dataclass(frozen=True)
class ScoreSet:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if not np.isfinite(e.score):
                raise ValueError(f"non-finite score for trial {e.enroll_id}/{e.test_id}")

    def __len__(self):
        return len(self.entries)

    def target_scores(self):
        return np.array([e.score for e in self.entries if e.label == TARGET])

    def nontarget_scores(self):
        return np.array([e.score for e in self.entries if e.label == NONTARGET])

    @classmethod
    def from_arrays(cls, target_scores, nontarget_scores):
        entries = [
            ScoreEntry("t", str(i), float(s), TARGET) for i, s in enumerate(target_scores)
        ]
        entries += [
            ScoreEntry("n", str(i), float(s), NONTARGET) for i, s in enumerate(nontarget_scores)
        ]
        return cls(tuple(entries))


@dataclass(frozen=True)
class EvalReport:
    eer: float
    min_dcf_08: float
    min_dcf_10: float
    det_points: tuple  # ((p_fa, p_miss), ...) as the threshold rises
    counts: tuple  # (n_target, n_nontarget)


# ---------------------------------------------------------------------------
# trial scoring


def _resolver(dataset):
    def resolve(trial_id):
        if "," in trial_id:
            rows = []
            for part in trial_id.split(","):
                vec = dataset.utterance(part)
                if vec is None:
                    raise UnknownId(f"unknown utterance id {part!r} in group {trial_id!r}")
                rows.append(vec)
            return np.vstack(rows)
        group = dataset.speaker(trial_id)
        if group is not None:
            return group.vectors
        vec = dataset.utterance(trial_id)
        if vec is not None:
            return vec[None, :]
        raise UnknownId(f"id {trial_id!r} matches no speaker or utterance")

    return resolve


def run_trials(scorer, dataset, trials, threads=None):
    """Score every trial, preserving order.

    Ids resolve to full per-speaker vector sets when they name a speaker,
    to single utterances otherwise; comma-joined utterance ids form
    explicit multi-session sets.  The scorer is a pure callable
    (enroll_vectors, test_vectors) -> float over centered vectors, so the
    result is deterministic and independent of the thread count.
    """
    resolve = _resolver(dataset)
    pairs = []
    for lineno, t in enumerate(trials, start=1):
        try:
            pairs.append((resolve(t.enroll_id), resolve(t.test_id)))
        except UnknownId as exc:
            raise UnknownId(f"trial line {lineno}: {exc}") from exc
    if threads is not None and threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(lambda p: scorer(p[0], p[1]), pairs))
    else:
        scores = [scorer(enroll, test) for enroll, test in pairs]
    entries = tuple(
        ScoreEntry(t.enroll_id, t.test_id, float(s), t.label) for t, s in zip(trials, scores)
    )
    return ScoreSet(entries)


# ---------------------------------------------------------------------------
# detection metrics


def _labelled_arrays(score_set):
    tar = score_set.target_scores()
    non = score_set.nontarget_scores()
    if tar.size == 0 or non.size == 0:
        raise MissingLabels("need at least one target and one nontarget score")
    return tar, non


def det_points(score_set):
    """Operating points (p_fa, p_miss) at every distinct threshold.

    The sweep starts below the smallest score (accept everything) and ends
    above the largest (reject everything); points are ordered by rising
    threshold, so p_fa is nonincreasing and p_miss nondecreasing.
    """
    tar, non = _labelled_arrays(score_set)
    tar = np.sort(tar)
    non = np.sort(non)
    cuts = np.unique(np.concatenate([tar, non]))
    n_tar_le = np.searchsorted(tar, cuts, side="right")
    n_non_le = np.searchsorted(non, cuts, side="right")
    # both rates as plain count/total quotients, so swapping the roles of
    # the two classes mirrors the points bit-exactly
    p_miss = n_tar_le / tar.size
    p_fa = (non.size - n_non_le) / non.size
    points = [(1.0, 0.0)]
    points.extend(zip(p_fa.tolist(), p_miss.tolist()))
    return tuple(points)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _lower_hull(points):
    pts = sorted(points)
    hull = []
    for p in pts:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return hull


def eer_from_det_points(points):
    """Equal error rate: crossing of the convex hull with p_miss = p_fa.

    Along the hull p_fa rises while p_miss falls, so p_miss - p_fa crosses
    zero exactly once; the crossing is interpolated linearly.
    """
    hull = _lower_hull(points)
    prev = hull[0]
    prev_gap = prev[1] - prev[0]
    if prev_gap <= 0.0:
        return float(prev[0] if prev_gap == 0.0 else prev[1])
    for cur in hull[1:]:
        gap = cur[1] - cur[0]
        if gap <= 0.0:
            # crossing of the segment with the diagonal, written so that the
            # label-swap / score-negation reflection reuses the identical
            # floating-point operations and the value is bit-invariant
            a1, b1 = prev
            a2, b2 = cur
            num = (prev_gap * a2 - gap * a1) + (prev_gap * b2 - gap * b1)
            return float(0.5 * num / (prev_gap - gap))
        prev, prev_gap = cur, gap
    return float(prev[0])


def compute_eer(score_set):
    """Equal error rate of a labelled score set."""
    return eer_from_det_points(det_points(score_set))


def compute_min_dcf(score_set, p_target, c_miss, c_fa):
    """Minimum normalized detection cost over all thresholds.

    The cost ``c_miss * p_miss * p_target + c_fa * p_fa * (1 - p_target)``
    is minimized over the raw operating points (both trivial decisions
    included) and normalized by the better of accept-all / reject-all.
    """
    if not 0.0 < p_target < 1.0:
        raise InvalidOperatingPoint(f"p_target must be in (0, 1), got {p_target}")
    if c_miss <= 0.0 or c_fa <= 0.0:
        raise InvalidOperatingPoint("costs must be positive")
    points = det_points(score_set)
    best = min(c_miss * b * p_target + c_fa * a * (1.0 - p_target) for a, b in points)
    norm = min(c_miss * p_target, c_fa * (1.0 - p_target))
    return float(best / norm)


def evaluate(score_set):
    """Full report: EER, the two fixed-operating-point DCFs, DET points."""
    points = det_points(score_set)
    tar, non = _labelled_arrays(score_set)
    return EvalReport(
        eer=eer_from_det_points(points),
        min_dcf_08=compute_min_dcf(score_set, *DCF08),
        min_dcf_10=compute_min_dcf(score_set, *DCF10),
        det_points=points,
        counts=(int(tar.size), int(non.size)),
    )


# ---------------------------------------------------------------------------
# score and DET files


def save_scores(path, score_set):
    """TSV enroll/test/score; 12 significant digits so downstream
    comparisons at 1e-8 remain meaningful."""
    with open(path, "w", encoding="utf-8") as f:
        for e in score_set.entries:
            f.write(f"{e.enroll_id}\t{e.test_id}\t{e.score:.12g}\n")


def load_scores(path):
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 'enroll_id<TAB>test_id<TAB>score'", path=path, line=lineno)
            try:
                value = float(parts[2])
            except ValueError as exc:
                raise ParseError(f"bad score: {exc}", path=path, line=lineno)
            entries.append(ScoreEntry(parts[0], parts[1], value))
    return ScoreSet(tuple(entries))


def save_det_points(path, points):
    with open(path, "w", encoding="utf-8") as f:
        f.write("p_fa,p_miss\n")
        for a, b in points:
            f.write(f"{a:.6g},{b:.6g}\n")
