"""Dense symmetric-matrix primitives.

Everything structured in this package (block likelihoods, EM updates, fast
scoring bases) is built on, and verified against, the routines here:
Cholesky-based log-determinant/solve, simultaneous diagonalization of a
covariance pair, and the naive dense Gaussian log-density.
"""

import math

import numpy as np
import scipy.linalg

from .exceptions import AsymmetricInput, DimensionMismatch, NotPositiveDefinite

LOG_2PI = math.log(2.0 * math.pi)

# Relative asymmetry tolerated before an input is rejected; EM accumulators
# drift slightly asymmetric, anything larger indicates a caller bug.
SYMMETRY_RTOL = 1e-8

# Generalized eigenvalues below this fraction of the largest are clamped to
# zero: near-singular between-class estimates are expected, not an error.
EIGVAL_CLAMP_RTOL = 1e-12


def sym(M):
    """Return the symmetric part (M + M.T) / 2."""
    return 0.5 * (M + M.T)


def check_symmetric(M, name="matrix"):
    """Validate and symmetrize a square matrix.

    Raises DimensionMismatch for non-square input and AsymmetricInput when
    the asymmetry exceeds SYMMETRY_RTOL relative to the largest entry.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()) if M.size else 0.0)
    if M.size and float(np.abs(M - M.T).max()) > SYMMETRY_RTOL * scale:
        raise AsymmetricInput(f"{name} is asymmetric beyond tolerance {SYMMETRY_RTOL:g}")
    return sym(M)


def spd_cholesky(M, name="matrix"):
    """Lower Cholesky factor of a symmetric positive-definite matrix."""
    M = check_symmetric(M, name)
    try:
        return scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite") from exc


def chol_logdet(L):
    """log det of the matrix whose lower Cholesky factor is L."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def spd_logdet_solve(M, B, name="matrix"):
    """Factor SPD ``M`` once and return ``(log det M, X)`` with ``M @ X = B``.

    One step of iterative refinement keeps the solve residual near machine
    level even for condition numbers around 1e8.
    """
    B = np.asarray(B, dtype=float)
    L = spd_cholesky(M, name)
    if B.shape[0] != L.shape[0]:
        raise DimensionMismatch(
            f"right-hand side has {B.shape[0]} rows, {name} is {L.shape[0]}x{L.shape[0]}"
        )
    Ms = sym(np.asarray(M, dtype=float))
    X = scipy.linalg.cho_solve((L, True), B)
    X = X + scipy.linalg.cho_solve((L, True), B - Ms @ X)
    return chol_logdet(L), X


def gen_eig_simdiag(S_b, S_w):
    """Simultaneously diagonalize a covariance pair.

    Returns ``(Phi, kappa)`` with ``Phi.T @ S_w @ Phi = I`` and
    ``Phi.T @ S_b @ Phi = diag(kappa)``, kappa sorted descending.  ``S_w``
    must be strictly positive definite; ``S_b`` positive semidefinite
    (eigenvalues below EIGVAL_CLAMP_RTOL of the largest are clamped to 0).

    Whitening route: factor S_w = L L^T, eigendecompose L^-1 S_b L^-T, then
    map eigenvectors back, avoiding any explicit inverse.
    """
    S_b = check_symmetric(S_b, "S_b")
    L = spd_cholesky(S_w, "S_w")
    if S_b.shape != L.shape:
        raise DimensionMismatch(f"covariance pair shapes differ: {S_b.shape} vs {L.shape}")
    half = scipy.linalg.solve_triangular(L, S_b, lower=True)
    C = sym(scipy.linalg.solve_triangular(L, half.T, lower=True).T)
    vals, vecs = scipy.linalg.eigh(C)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    top = max(float(vals[0]), 0.0) if vals.size else 0.0
    vals = np.where(vals > EIGVAL_CLAMP_RTOL * top, vals, 0.0)
    Phi = scipy.linalg.solve_triangular(L, vecs, lower=True, trans="T")
    return Phi, vals


def gaussian_logpdf_dense(x, Sigma):
    """log N(x; 0, Sigma) evaluated by factoring the full covariance.

    This is the brute-force oracle path; structured likelihoods are tested
    against it.
    """
    x = np.asarray(x, dtype=float).ravel()
    Sigma = np.asarray(Sigma, dtype=float)
    n = x.shape[0]
    if Sigma.shape != (n, n):
        raise DimensionMismatch(f"covariance shape {Sigma.shape} does not match vector length {n}")
    logdet, alpha = spd_logdet_solve(Sigma, x, "Sigma")
    return -0.5 * (n * LOG_2PI + logdet + float(x @ alpha))


def factor_spd(M, rank=None, name="matrix"):
    """Eigenfactor F with F @ F.T = M for symmetric positive semidefinite M.

    Columns are ordered by descending eigenvalue; ``rank`` truncates, the
    default keeps all dimensions.  Small negative eigenvalues are clamped
    to zero.
    """
    M = check_symmetric(M, name)
    vals, vecs = scipy.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    if rank is not None:
        vals = vals[:rank]
        vecs = vecs[:, :rank]
    return vecs * np.sqrt(vals)
