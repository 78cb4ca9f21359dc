"""Joint Bayesian verification back-end.

Model: every embedding splits as identity + session residual, with
independent zero-mean Gaussian priors whose covariances are the
between-speaker matrix and the within-speaker matrix.  Training is EM over
the stacked hidden variables (identity plus all residuals); scoring is the
same-speaker versus different-speaker log-likelihood ratio.

All set likelihoods go through block-structure identities (one solve with
the within covariance, one with ``within + m * between``), never
materializing the stacked covariance.  Two accelerated scoring paths are
provided: per-dimension scoring in the simultaneously diagonalized basis,
and a precomputed quadratic-form pair scorer for single-vector trials.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatch,
    EmptyDataset,
    EmptySet,
    PathUnsupported,
)
from .linalg import (
    LOG_2PI,
    check_symmetric,
    chol_logdet,
    gen_eig_simdiag,
    spd_cholesky,
    sym,
)

# Default truncation policy: keep dimensions whose speaker-to-noise
# eigenvalue exceeds this fraction of the largest.
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class JbModel:
    """Between/within covariance pair plus the recorded centering mean."""

    mean: np.ndarray
    between_cov: np.ndarray  # speaker-identity covariance, PSD
    within_cov: np.ndarray  # session-residual covariance, strictly PD

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        between = check_symmetric(self.between_cov, "between_cov")
        within = check_symmetric(self.within_cov, "within_cov")
        if between.shape != within.shape or mean.shape[0] != between.shape[0]:
            raise DimensionMismatch("model field dimensions disagree")
        for name, a in (("mean", mean), ("between_cov", between), ("within_cov", within)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dim(self):
        return self.mean.shape[0]


def _as_set(X, name="vector set"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise EmptySet(f"{name} is empty")
    return X


def _canonical_rows(X):
    """Rows sorted lexicographically so unions score order-independently."""
    if X.shape[0] <= 1 or X.shape[1] == 0:
        return X
    order = np.lexsort(X.T[::-1])
    return X[order]


class SetLikelihood:
    """Set log-likelihoods under a between/within covariance pair.

    Factorizations of ``within`` and of ``within + m * between`` are cached
    per set size, so scoring many trials against one model costs one d x d
    Cholesky per distinct set size.
    """

    def __init__(self, between_cov, within_cov):
        self.between = check_symmetric(between_cov, "between_cov")
        self._chol_within = spd_cholesky(within_cov, "within_cov")
        self._logdet_within = chol_logdet(self._chol_within)
        self._dim = self.between.shape[0]
        if self._chol_within.shape[0] != self._dim:
            raise DimensionMismatch("between/within dimensions disagree")
        self._by_size = {}

    @property
    def dim(self):
        return self._dim

    def _size_factors(self, m):
        hit = self._by_size.get(m)
        if hit is None:
            L_w = self._chol_within
            total = sym(L_w @ L_w.T + m * self.between)
            L = spd_cholesky(total, "within + m*between")
            hit = (L, chol_logdet(L))
            self._by_size[m] = hit
        return hit

    def loglik(self, X):
        """log p of one speaker's vector set (m, dim)."""
        X = _as_set(X)
        m, d = X.shape
        if d != self._dim:
            raise DimensionMismatch(f"vectors have dim {d}, model has {self._dim}")
        s = X.sum(axis=0)
        solved = scipy.linalg.cho_solve((self._chol_within, True), X.T)
        quad_each = float(np.sum(X.T * solved))
        s_within = float(s @ solved.sum(axis=1))  # solve is linear in the rhs
        L_m, logdet_m = self._size_factors(m)
        s_total = float(s @ scipy.linalg.cho_solve((L_m, True), s))
        quad = quad_each - (s_within - s_total) / m
        logdet = (m - 1) * self._logdet_within + logdet_m
        return -0.5 * (m * d * LOG_2PI + logdet + quad)

    def llr(self, X1, X2):
        """Same-speaker vs different-speaker log-likelihood ratio.

        The union is put into canonical row order first, so the score is
        exactly symmetric in its arguments.
        """
        X1 = _as_set(X1, "first set")
        X2 = _as_set(X2, "second set")
        if X1.shape[1] != X2.shape[1]:
            raise DimensionMismatch("the two sets have different dimensions")
        joint = _canonical_rows(np.vstack([X1, X2]))
        return self.loglik(joint) - (self.loglik(X1) + self.loglik(X2))


def jb_loglik(dataset, model):
    """Total data log-likelihood of a centered dataset under the model."""
    like = SetLikelihood(model.between_cov, model.within_cov)
    return float(sum(like.loglik(g.vectors) for g in dataset.speakers))


def jb_score_full(x1, x2, model):
    """Exact log-likelihood-ratio score between two centered vector sets."""
    return SetLikelihood(model.between_cov, model.within_cov).llr(x1, x2)


def make_full_scorer(model):
    """Callable (X1, X2) -> score with factorization caching across trials."""
    return SetLikelihood(model.between_cov, model.within_cov).llr


# ---------------------------------------------------------------------------
# posterior machinery shared by the EM trainers


def gaussian_posterior(between, within, m):
    """Posterior factors of the identity variable given m sessions.

    Returns ``(P, X)``: the posterior covariance ``P`` and a gain matrix
    such that the posterior mean of a speaker with session average ``xbar``
    is ``xbar @ X`` (row convention).  Uses the identity
    ``P = B - B (B + W/m)^-1 B``, which tolerates singular ``B``; only
    ``B + W/m`` is ever factored.
    """
    total = sym(between + within / m)
    L = spd_cholesky(total, "between + within/m")
    X = scipy.linalg.cho_solve((L, True), between)  # (B + W/m)^-1 B, symmetric args
    P = sym(between - between @ X)
    return P, X


@dataclass(frozen=True)
class PosteriorStats:
    """E-step sufficient statistics for the identity variables.

    ``covariances`` maps each distinct session count to the posterior
    covariance shared by all speakers with that count; ``residuals`` holds
    per-speaker session-minus-posterior-mean arrays.
    """

    speaker_ids: tuple
    counts: np.ndarray
    means: np.ndarray  # (n_speakers, dim)
    covariances: dict
    residuals: tuple

    def covariance_for(self, i):
        return self.covariances[int(self.counts[i])]


def posterior_stats(dataset, model):
    """Posterior statistics of every speaker under the model."""
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    between = model.between_cov
    within = model.within_cov
    counts = dataset.session_counts()
    means = np.zeros((dataset.n_speakers, dataset.dim))
    covariances = {}
    gains = {}
    for m in np.unique(counts):
        P, X = gaussian_posterior(between, within, int(m))
        covariances[int(m)] = P
        gains[int(m)] = X
    residuals = []
    for i, g in enumerate(dataset.speakers):
        xbar = g.vectors.mean(axis=0)
        mu = xbar @ gains[int(counts[i])]
        means[i] = mu
        residuals.append(g.vectors - mu)
    return PosteriorStats(
        speaker_ids=tuple(g.speaker_id for g in dataset.speakers),
        counts=counts,
        means=means,
        covariances=covariances,
        residuals=tuple(residuals),
    )


def _em_moments(dataset, between, within, include_posterior_cov):
    """One EM accumulation pass; returns the new covariance pair.

    Speakers are processed grouped by session count so the shared posterior
    covariance is computed once per distinct count; reductions run in a
    fixed order, making the result deterministic.
    """
    counts = dataset.session_counts()
    n_speakers = dataset.n_speakers
    n_total = int(counts.sum())
    d = dataset.dim

    stacked = dataset.stacked()
    second_moment = stacked.T @ stacked  # sum over all sessions of x x^T

    xbars = np.vstack([g.vectors.mean(axis=0) for g in dataset.speakers])

    acc_between = np.zeros((d, d))
    acc_cov_w = np.zeros((d, d))  # sum over speakers of m_i P_i
    acc_cross = np.zeros((d, d))  # sum over speakers of s_i mu_i^T
    acc_mu_outer_w = np.zeros((d, d))  # sum of m_i mu_i mu_i^T
    for m in np.unique(counts):
        m = int(m)
        sel = counts == m
        k = int(sel.sum())
        P, X = gaussian_posterior(between, within, m)
        mus = xbars[sel] @ X
        outer = mus.T @ mus
        acc_between += outer
        acc_mu_outer_w += m * outer
        acc_cross += m * (xbars[sel].T @ mus)
        if include_posterior_cov:
            acc_between += k * P
            acc_cov_w += (k * m) * P
    residual_outer = second_moment - acc_cross - acc_cross.T + acc_mu_outer_w
    new_between = sym(acc_between) / n_speakers
    new_within = sym(residual_outer + acc_cov_w) / n_total
    return new_between, new_within


def jb_em_step(dataset, model, mode="exact"):
    """One EM update; returns the new model and the input model's log-likelihood.

    ``mode="exact"`` includes the posterior covariance terms in both M-step
    accumulators; ``mode="approx"`` drops every posterior covariance and
    keeps only posterior-mean outer products, which is cheaper but can
    decrease the likelihood.
    """
    if mode not in ("exact", "approx"):
        raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    loglik_before = jb_loglik(dataset, model)
    new_between, new_within = _em_moments(
        dataset, model.between_cov, model.within_cov, include_posterior_cov=(mode == "exact")
    )
    return JbModel(model.mean, new_between, new_within), loglik_before


def init_jb_model(dataset):
    """Even-split initialization: half the total covariance on each side,
    plus a trace-scaled ridge keeping both factors full rank."""
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    stacked = dataset.stacked()
    total = stacked.T @ stacked / stacked.shape[0]
    ridge = 1e-6 * (np.trace(total) / dataset.dim) * np.eye(dataset.dim)
    half = sym(0.5 * total + ridge)
    return JbModel(dataset.global_mean, half, half)


def train_jb(dataset, model=None, n_iters=20, mode="exact", rel_tol=None):
    """Run EM and return the final model plus the log-likelihood trace.

    The trace has one entry per visited model (initial model first, final
    model last).  ``rel_tol`` optionally stops early once the relative
    log-likelihood change drops below it.
    """
    if model is None:
        model = init_jb_model(dataset)
    trace = []
    for _ in range(n_iters):
        model, before = jb_em_step(dataset, model, mode=mode)
        trace.append(before)
        if rel_tol is not None and len(trace) >= 2:
            if abs(trace[-1] - trace[-2]) <= rel_tol * abs(trace[-2]):
                break
    trace.append(jb_loglik(dataset, model))
    return model, np.array(trace)


# ---------------------------------------------------------------------------
# simultaneous-diagonalization scoring path


@dataclass(frozen=True)
class SdTransform:
    """Low-rank basis making the within covariance identity and the between
    covariance diagonal; scoring then costs O(rank) per dimension."""

    basis: np.ndarray  # (dim, rank), applied as y = basis.T @ x
    eigvals: np.ndarray  # speaker-to-noise eigenvalues, descending

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float, order="C")
        eig = np.array(self.eigvals, dtype=float).ravel()
        if basis.ndim != 2 or basis.shape[1] != eig.shape[0]:
            raise DimensionMismatch("basis/eigenvalue shapes disagree")
        basis.setflags(write=False)
        eig.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "eigvals", eig)

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def rank(self):
        return self.basis.shape[1]


def make_sd_transform(model, rank=None, keep="largest"):
    """Diagonalizing transform for a model's covariance pair.

    ``rank=None`` keeps every dimension whose eigenvalue exceeds RANK_RTOL
    of the largest.  ``keep="largest"`` retains the most
    speaker-discriminative dimensions; ``keep="smallest"`` retains the
    other end of the spectrum (kept selectable for comparison runs).
    """
    Phi, vals = gen_eig_simdiag(model.between_cov, model.within_cov)
    d = vals.shape[0]
    if rank is None:
        top = float(vals[0]) if d else 0.0
        s = int(np.sum(vals > RANK_RTOL * top)) if top > 0.0 else 0
    else:
        s = int(rank)
        if not 0 <= s <= d:
            raise DimensionMismatch(f"rank {s} out of range 0..{d}")
    if keep == "largest":
        idx = np.arange(s)
    elif keep == "smallest":
        idx = np.arange(d - s, d)  # tail of the descending spectrum, still descending
    else:
        raise ValueError(f"keep must be 'largest' or 'smallest', got {keep!r}")
    return SdTransform(Phi[:, idx], vals[idx])


def transform_vectors(sd, X):
    """Project centered vectors into the diagonalized basis."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != sd.dim:
        raise DimensionMismatch(f"vectors have dim {X.shape[1]}, transform expects {sd.dim}")
    return X @ sd.basis


def _sd_set_term(eigvals, Y):
    """Per-dimension set term: 2*pi factors are omitted because they cancel
    in the three-term ratio."""
    m = Y.shape[0]
    t = Y.sum(axis=0)
    denom = 1.0 + m * eigvals
    return -0.5 * (
        float(np.sum(np.log(denom)))
        + float(np.sum(Y * Y))
        - float(np.sum((eigvals / denom) * t * t))
    )


def jb_score_sd(sd, Y1, Y2):
    """Log-likelihood ratio over already-transformed vector sets."""
    Y1 = _as_set(Y1, "first set")
    Y2 = _as_set(Y2, "second set")
    if Y1.shape[1] != sd.rank or Y2.shape[1] != sd.rank:
        raise DimensionMismatch("transformed vectors do not match the transform rank")
    joint = _canonical_rows(np.vstack([Y1, Y2]))
    return _sd_set_term(sd.eigvals, joint) - (
        _sd_set_term(sd.eigvals, Y1) + _sd_set_term(sd.eigvals, Y2)
    )


def make_sd_scorer(model, rank=None, keep="largest"):
    """Callable (X1, X2) -> score over centered, untransformed vectors."""
    sd = make_sd_transform(model, rank=rank, keep=keep)

    def score(X1, X2):
        return jb_score_sd(sd, transform_vectors(sd, X1), transform_vectors(sd, X2))

    return score


# ---------------------------------------------------------------------------
# precomputed pair scorer for single-vector trials


@dataclass(frozen=True)
class PairScorer:
    """score(x1, x2) = 0.5 x1'Ax1 + 0.5 x2'Ax2 - x1'Gx2 + offset, with the
    symmetric matrix A held as a truncated signed eigendecomposition."""

    quad_vecs: np.ndarray  # (dim, rank) eigenvectors of A
    quad_vals: np.ndarray  # signed eigenvalues, by magnitude descending
    cross: np.ndarray  # G, dense (dim, dim)
    offset: float

    @property
    def dim(self):
        return self.cross.shape[0]

    @property
    def rank(self):
        return self.quad_vals.shape[0]


def make_pair_scorer(model, rank=None):
    """Precompute the quadratic-form pair scorer for singleton trials.

    ``rank=None`` truncates the quadratic matrix at eigenvalues above
    RANK_RTOL of the largest magnitude.
    """
    within = check_symmetric(model.within_cov, "within_cov")
    between = check_symmetric(model.between_cov, "between_cov")
    d = within.shape[0]
    eye = np.eye(d)

    L_w = spd_cholesky(within, "within_cov")
    inv_within = scipy.linalg.cho_solve((L_w, True), eye)
    total = sym(between + within)
    L_t = spd_cholesky(total, "between + within")
    inv_total = scipy.linalg.cho_solve((L_t, True), eye)
    wide = sym(within + 2.0 * between)
    L_2 = spd_cholesky(wide, "within + 2*between")
    inv_wide = scipy.linalg.cho_solve((L_2, True), eye)

    quad = sym(inv_total - 0.5 * (inv_within + inv_wide))
    cross = sym(0.5 * (inv_wide - inv_within))
    offset = chol_logdet(L_t) - 0.5 * (chol_logdet(L_w) + chol_logdet(L_2))

    vals, vecs = scipy.linalg.eigh(quad)
    order = np.argsort(np.abs(vals))[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    top = float(np.abs(vals[0])) if d else 0.0
    if rank is None:
        r = int(np.sum(np.abs(vals) > RANK_RTOL * top)) if top > 0.0 else 0
    else:
        r = int(rank)
        if not 0 <= r <= d:
            raise DimensionMismatch(f"rank {r} out of range 0..{d}")
    return PairScorer(vecs[:, :r], vals[:r], cross, float(offset))


def _as_single(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        if x.shape[0] != 1:
            raise PathUnsupported(f"pair scoring requires single vectors, {name} has {x.shape[0]}")
        x = x[0]
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector")
    return x


def pair_score(scorer, x1, x2):
    """Score two centered single vectors with a precomputed pair scorer."""
    x1 = _as_single(x1, "first set")
    x2 = _as_single(x2, "second set")
    if x1.shape[0] != scorer.dim or x2.shape[0] != scorer.dim:
        raise DimensionMismatch("vector dimension does not match the scorer")
    a1 = scorer.quad_vecs.T @ x1
    a2 = scorer.quad_vecs.T @ x2
    quad = 0.5 * float(scorer.quad_vals @ (a1 * a1 + a2 * a2))
    return quad - float(x1 @ scorer.cross @ x2) + scorer.offset


def make_pair_score_fn(model, rank=None):
    """Callable (X1, X2) -> score enforcing the singleton-trial restriction."""
    scorer = make_pair_scorer(model, rank=rank)

    def score(X1, X2):
        return pair_score(scorer, X1, X2)

    return score
