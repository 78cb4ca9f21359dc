"""Fisher LDA projection followed by cosine scoring: the distance baseline."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, EmptyDataset, RankDeficient, ZeroVector
from .linalg import gen_eig_simdiag, sym

# Ridge added to the within-class scatter before the generalized
# eigenproblem; the scatter can be singular when dim exceeds usable samples.
SCATTER_RIDGE = 1e-6


@dataclass(frozen=True)
class LdaProjection:
    """Discriminant basis (columns ordered by descending separation)."""

    mean: np.ndarray
    basis: np.ndarray  # (dim_in, dim_out), applied as y = basis.T @ x

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        basis = np.atleast_2d(np.array(self.basis, dtype=float, order="C"))
        if basis.shape[0] != mean.shape[0]:
            raise DimensionMismatch("mean/basis dimensions disagree")
        for name, a in (("mean", mean), ("basis", basis)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dim_in(self):
        return self.basis.shape[0]

    @property
    def dim_out(self):
        return self.basis.shape[1]


def fit_lda(dataset, dim_out):
    """Fit the projection on a centered dataset.

    Between/within scatters are session-count weighted; the within scatter
    gets a trace-scaled ridge.  ``dim_out`` may not exceed the vector
    dimension or the speaker count minus one.
    """
    if dataset.n_speakers == 0:
        raise EmptyDataset("dataset has no speakers")
    d = dataset.dim
    limit = min(d, dataset.n_speakers - 1)
    if not 1 <= dim_out <= limit:
        raise RankDeficient(f"dim_out {dim_out} out of range 1..{limit}")

    stacked = dataset.stacked()
    n_total = stacked.shape[0]
    overall = stacked.mean(axis=0)
    scatter_b = np.zeros((d, d))
    scatter_w = np.zeros((d, d))
    for g in dataset.speakers:
        m = g.num_sessions
        centroid = g.vectors.mean(axis=0)
        delta = centroid - overall
        scatter_b += m * np.outer(delta, delta)
        resid = g.vectors - centroid
        scatter_w += resid.T @ resid
    scatter_b /= n_total
    scatter_w /= n_total
    # trace-scaled ridge; absolute fallback when the scatter is exactly zero
    # (single-session speakers)
    scale = np.trace(scatter_w) / d
    if scale <= 0.0:
        scale = 1.0
    scatter_w = sym(scatter_w + SCATTER_RIDGE * scale * np.eye(d))

    basis, _ = gen_eig_simdiag(scatter_b, scatter_w)
    return LdaProjection(dataset.global_mean, basis[:, :dim_out])


def project(lda, X):
    """Project centered vectors into the discriminant space."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != lda.dim_in:
        raise DimensionMismatch(f"vectors have dim {X.shape[-1]}, projection expects {lda.dim_in}")
    return X @ lda.basis


def cosine_score(u, v):
    """Cosine similarity of two nonzero vectors, clipped into [-1, 1]."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise DimensionMismatch("vectors have different lengths")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine score of a zero vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def lda_trial_score(lda, X1, X2):
    """Average each centered set, project, then score by cosine."""
    u = project(lda, np.atleast_2d(np.asarray(X1, dtype=float)).mean(axis=0))
    v = project(lda, np.atleast_2d(np.asarray(X2, dtype=float)).mean(axis=0))
    return cosine_score(u, v)


def make_lda_scorer(lda):
    def score(X1, X2):
        return lda_trial_score(lda, X1, X2)

    return score
