"""The Gaussian PLDA comparison family.

Three back-ends sharing the same verification contract but trained with
different hidden-variable choices:

* ``SpldaModel``   - subspace loading matrix plus full residual covariance;
  EM over the latent speaker factor only.
* ``KaldiPldaModel`` - each speaker collapsed to its session average, with
  the within covariance scaled by one over the session count.
* ``TwoCovModel``  - full between/within covariance pair; EM over the
  identity variable only.  Under this parameterization the update equations
  coincide with the exact-statistics updates of the joint model, and the
  implementation shares that code path.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatch,
    EmptyDataset,
    EmptySet,
    SingularAccumulator,
)
from .jb import SetLikelihood, _em_moments, gaussian_posterior
from .linalg import (
    LOG_2PI,
    check_symmetric,
    chol_logdet,
    gen_eig_simdiag,
    spd_cholesky,
    sym,
)


@dataclass(frozen=True)
class SpldaModel:
    """Speaker-subspace loading matrix and residual covariance."""

    mean: np.ndarray
    loading: np.ndarray  # (dim, subspace_dim)
    noise_cov: np.ndarray  # strictly PD residual covariance

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        loading = np.atleast_2d(np.array(self.loading, dtype=float, order="C"))
        noise = check_symmetric(self.noise_cov, "noise_cov")
        if loading.shape[0] != mean.shape[0] or noise.shape[0] != mean.shape[0]:
            raise DimensionMismatch("model field dimensions disagree")
        if loading.shape[1] > loading.shape[0]:
            raise DimensionMismatch("subspace dimension exceeds vector dimension")
        for name, a in (("mean", mean), ("loading", loading), ("noise_cov", noise)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def subspace_dim(self):
        return self.loading.shape[1]


@dataclass(frozen=True)
class KaldiPldaModel:
    """Average-vector model: between covariance plus per-count-scaled noise."""

    mean: np.ndarray
    between_cov: np.ndarray
    within_cov: np.ndarray

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


@dataclass(frozen=True)
class TwoCovModel:
    """Full-rank between/within pair trained with identity-only hidden variables."""

    mean: np.ndarray
    between_cov: np.ndarray
    within_cov: np.ndarray

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


def _total_covariance(dataset):
    stacked = dataset.stacked()
    return stacked.T @ stacked / stacked.shape[0]


# ---------------------------------------------------------------------------
# SPLDA


def splda_loglik(dataset, model):
    """Marginal (latent factor integrated out) data log-likelihood."""
    like = SetLikelihood(model.loading @ model.loading.T, model.noise_cov)
    return float(sum(like.loglik(g.vectors) for g in dataset.speakers))


def splda_em_step(dataset, model):
    """One EM update over the latent speaker factors.

    Returns the new model and the marginal log-likelihood of the input
    model.  Raises SingularAccumulator when the loading-update normal
    equations cannot be solved.
    """
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    loglik_before = splda_loglik(dataset, model)

    F = model.loading
    r = model.subspace_dim
    counts = dataset.session_counts()
    L_noise = spd_cholesky(model.noise_cov, "noise_cov")
    G = scipy.linalg.cho_solve((L_noise, True), F).T  # F^T Lambda^-1, (r, dim)
    GF = G @ F

    sums = np.vstack([g.vectors.sum(axis=0) for g in dataset.speakers])
    z = np.zeros((dataset.n_speakers, r))
    acc_zz_w = np.zeros((r, r))  # sum of m_i E[z z^T]
    for m in np.unique(counts):
        m = int(m)
        sel = counts == m
        k = int(sel.sum())
        precision = np.eye(r) + m * GF
        L_p = spd_cholesky(precision, "latent precision")
        cov = scipy.linalg.cho_solve((L_p, True), np.eye(r))
        z[sel] = sums[sel] @ G.T @ cov.T
        acc_zz_w += (k * m) * cov
    acc_zz_w += z.T @ (z * counts[:, None])
    acc_fz = sums.T @ z  # sum of s_i E[z_i]^T, (dim, r)

    try:
        new_loading = scipy.linalg.solve(
            sym(acc_zz_w), acc_fz.T, assume_a="pos"
        ).T
    except np.linalg.LinAlgError as exc:
        raise SingularAccumulator("latent second-moment accumulator is singular") from exc

    stacked = dataset.stacked()
    second_moment = stacked.T @ stacked
    n_total = int(counts.sum())
    new_noise = sym(second_moment - new_loading @ acc_fz.T) / n_total
    return SpldaModel(model.mean, new_loading, new_noise), loglik_before


def splda_score(x1, x2, model):
    """Verification score; delegates to the shared structured path with the
    between covariance taken as loading @ loading.T."""
    return SetLikelihood(model.loading @ model.loading.T, model.noise_cov).llr(x1, x2)


def make_splda_scorer(model):
    return SetLikelihood(model.loading @ model.loading.T, model.noise_cov).llr


def init_splda_model(dataset, subspace_dim):
    """Principal-direction initialization scaled by the eigenvalue roots,
    with the residual floored to a trace-scaled identity."""
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    d = dataset.dim
    if not 1 <= subspace_dim <= d:
        raise DimensionMismatch(f"subspace_dim {subspace_dim} out of range 1..{d}")
    total = _total_covariance(dataset)
    vals, vecs = scipy.linalg.eigh(total)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    loading = vecs[:, :subspace_dim] * np.sqrt(vals[:subspace_dim])
    floor = 1e-6 * (np.trace(total) / d)
    resid = sym(total - loading @ loading.T)
    rvals, rvecs = scipy.linalg.eigh(resid)
    rvals = np.maximum(rvals, floor)
    noise = sym((rvecs * rvals) @ rvecs.T)
    return SpldaModel(dataset.global_mean, loading, noise)


def train_splda(dataset, model=None, subspace_dim=None, n_iters=20, rel_tol=None):
    if model is None:
        if subspace_dim is None:
            raise DimensionMismatch("subspace_dim is required when no model is given")
        model = init_splda_model(dataset, subspace_dim)
    trace = []
    for _ in range(n_iters):
        model, before = splda_em_step(dataset, model)
        trace.append(before)
        if rel_tol is not None and len(trace) >= 2:
            if abs(trace[-1] - trace[-2]) <= rel_tol * abs(trace[-2]):
                break
    trace.append(splda_loglik(dataset, model))
    return model, np.array(trace)


# ---------------------------------------------------------------------------
# Kaldi-style averaged PLDA


def kaldi_loglik(dataset, model):
    """Log-likelihood of the per-speaker averages, noise scaled by 1/m."""
    counts = dataset.session_counts()
    d = dataset.dim
    total = 0.0
    cache = {}
    for g, m in zip(dataset.speakers, counts):
        m = int(m)
        if m not in cache:
            cov = sym(model.between_cov + model.within_cov / m)
            L = spd_cholesky(cov, "between + within/m")
            cache[m] = (L, chol_logdet(L))
        L, logdet = cache[m]
        xbar = g.vectors.mean(axis=0)
        quad = float(xbar @ scipy.linalg.cho_solve((L, True), xbar))
        total += -0.5 * (d * LOG_2PI + logdet + quad)
    return total


def kaldi_em_step(dataset, model):
    """One EM update of the averaged model.

    Only the per-speaker averages and session counts enter the update;
    within-speaker spread around the averages is invisible to it.
    """
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    loglik_before = kaldi_loglik(dataset, model)

    counts = dataset.session_counts()
    d = dataset.dim
    n_speakers = dataset.n_speakers
    xbars = np.vstack([g.vectors.mean(axis=0) for g in dataset.speakers])

    acc_between = np.zeros((d, d))
    acc_within = np.zeros((d, d))
    for m in np.unique(counts):
        m = int(m)
        sel = counts == m
        k = int(sel.sum())
        P, X = gaussian_posterior(model.between_cov, model.within_cov, m)
        mus = xbars[sel] @ X
        resid = xbars[sel] - mus
        acc_between += k * P + mus.T @ mus
        acc_within += m * (k * P + resid.T @ resid)
    new_between = sym(acc_between) / n_speakers
    new_within = sym(acc_within) / n_speakers
    return KaldiPldaModel(model.mean, new_between, new_within), loglik_before


def make_kaldi_scorer(model):
    """Callable (enroll, test) -> score in the diagonalized basis.

    Both sides are averaged; the joint hypothesis couples the two averages
    through the shared identity variable while the noise keeps its
    one-over-count scaling, so the ratio is a sum of 2x2 problems.
    """
    basis, between_eig = gen_eig_simdiag(model.between_cov, model.within_cov)

    def score(enroll, test):
        enroll = np.atleast_2d(np.asarray(enroll, dtype=float))
        test = np.atleast_2d(np.asarray(test, dtype=float))
        if enroll.shape[0] == 0 or test.shape[0] == 0:
            raise EmptySet("kaldi scoring requires nonempty sets")
        if enroll.shape[1] != basis.shape[0] or test.shape[1] != basis.shape[0]:
            raise DimensionMismatch("vector dimension does not match the model")
        m_e = enroll.shape[0]
        m_t = test.shape[0]
        y_e = enroll.mean(axis=0) @ basis
        y_t = test.mean(axis=0) @ basis
        a = between_eig + 1.0 / m_e
        b = between_eig + 1.0 / m_t
        det2 = a * b - between_eig * between_eig
        quad2 = (b * y_e * y_e - 2.0 * between_eig * y_e * y_t + a * y_t * y_t) / det2
        joint = -0.5 * (np.log(det2) + quad2)
        single = -0.5 * (np.log(a) + y_e * y_e / a) - 0.5 * (np.log(b) + y_t * y_t / b)
        return float(np.sum(joint - single))

    return score


def kaldi_score(enroll, test, model):
    return make_kaldi_scorer(model)(enroll, test)


def init_kaldi_model(dataset):
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    total = _total_covariance(dataset)
    ridge = 1e-6 * (np.trace(total) / dataset.dim) * np.eye(dataset.dim)
    half = sym(0.5 * total + ridge)
    return KaldiPldaModel(dataset.global_mean, half, half)


def train_kaldi(dataset, model=None, n_iters=20, rel_tol=None):
    if model is None:
        model = init_kaldi_model(dataset)
    trace = []
    for _ in range(n_iters):
        model, before = kaldi_em_step(dataset, model)
        trace.append(before)
        if rel_tol is not None and len(trace) >= 2:
            if abs(trace[-1] - trace[-2]) <= rel_tol * abs(trace[-2]):
                break
    trace.append(kaldi_loglik(dataset, model))
    return model, np.array(trace)


# ---------------------------------------------------------------------------
# two-covariance model


def twocov_loglik(dataset, model):
    like = SetLikelihood(model.between_cov, model.within_cov)
    return float(sum(like.loglik(g.vectors) for g in dataset.speakers))


def twocov_em_step(dataset, model):
    """One EM update with only the identity variables hidden.

    The derived updates coincide with the exact-statistics updates of the
    joint model under this parameterization, so the same accumulation code
    runs here.
    """
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    loglik_before = twocov_loglik(dataset, model)
    new_between, new_within = _em_moments(
        dataset, model.between_cov, model.within_cov, include_posterior_cov=True
    )
    return TwoCovModel(model.mean, new_between, new_within), loglik_before


def twocov_score(x1, x2, model):
    return SetLikelihood(model.between_cov, model.within_cov).llr(x1, x2)


def make_twocov_scorer(model):
    return SetLikelihood(model.between_cov, model.within_cov).llr


def init_twocov_model(dataset):
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    total = _total_covariance(dataset)
    ridge = 1e-6 * (np.trace(total) / dataset.dim) * np.eye(dataset.dim)
    half = sym(0.5 * total + ridge)
    return TwoCovModel(dataset.global_mean, half, half)


def train_twocov(dataset, model=None, n_iters=20, rel_tol=None):
    if model is None:
        model = init_twocov_model(dataset)
    trace = []
    for _ in range(n_iters):
        model, before = twocov_em_step(dataset, model)
        trace.append(before)
        if rel_tol is not None and len(trace) >= 2:
            if abs(trace[-1] - trace[-2]) <= rel_tol * abs(trace[-2]):
                break
    trace.append(twocov_loglik(dataset, model))
    return model, np.array(trace)
