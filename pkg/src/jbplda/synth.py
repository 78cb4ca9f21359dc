"""Synthetic data generation and brute-force oracles.

Datasets are drawn from the identity-plus-residual generative model with
controllable covariance spectra.  All randomness flows through
numpy's PCG64 generator (standard_normal, i.e. the ziggurat method), so a
given spec reproduces bitwise on a fixed numpy build; cross-platform
comparisons should use tolerances.

The oracles materialize full stacked covariances and evaluate the dense
Gaussian log-density; every structured computation in the package is
verified against them.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import NONTARGET, TARGET, Dataset, SpeakerGroup, Trial, TrialList
from .exceptions import (
    DimensionMismatch,
    InsufficientSpeakers,
    SizeGuardExceeded,
)
from .linalg import check_symmetric, gaussian_logpdf_dense, sym

# Desk-scale guard on the stacked dimension of a materialized covariance.
ORACLE_MAX_STACKED = 64


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one reproducible dataset draw."""

    dim: int
    n_speakers: int
    sessions: object  # int, or a per-speaker sequence of length n_speakers
    mu_spectrum: np.ndarray  # between-covariance eigenvalues, nonnegative
    eps_spectrum: np.ndarray  # within-covariance eigenvalues, positive
    seed: int

    def __post_init__(self):
        mu = np.array(self.mu_spectrum, dtype=float).ravel()
        eps = np.array(self.eps_spectrum, dtype=float).ravel()
        if mu.shape != (self.dim,) or eps.shape != (self.dim,):
            raise DimensionMismatch("spectrum lengths must equal dim")
        if np.any(mu < 0.0):
            raise ValueError("mu_spectrum must be nonnegative")
        if np.any(eps <= 0.0):
            raise ValueError("eps_spectrum must be strictly positive")
        mu.setflags(write=False)
        eps.setflags(write=False)
        object.__setattr__(self, "mu_spectrum", mu)
        object.__setattr__(self, "eps_spectrum", eps)

    def session_counts(self):
        if np.isscalar(self.sessions):
            return np.full(self.n_speakers, int(self.sessions), dtype=int)
        counts = np.asarray(self.sessions, dtype=int).ravel()
        if counts.shape != (self.n_speakers,):
            raise DimensionMismatch("per-speaker session list length must equal n_speakers")
        if np.any(counts < 1):
            raise ValueError("session counts must be >= 1")
        return counts


def _random_orthogonal(dim, rng):
    """Haar-distributed orthogonal matrix: QR with sign-fixed diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def sample_spd(dim, spectrum, seed):
    """Random symmetric matrix with the given eigenvalue spectrum."""
    spectrum = np.asarray(spectrum, dtype=float).ravel()
    if spectrum.shape != (dim,):
        raise DimensionMismatch("spectrum length must equal dim")
    if np.any(spectrum < 0.0):
        raise ValueError("spectrum must be nonnegative")
    q = _random_orthogonal(dim, np.random.default_rng(seed))
    return sym((q * spectrum) @ q.T)


def generate_dataset(spec):
    """Draw a dataset from the generative model.

    Returns ``(dataset, true_between, true_within)``.  Speaker identities
    and session residuals are sampled independently and added; the truth
    covariances are returned for recovery tests.
    """
    counts = spec.session_counts()
    seq = np.random.SeedSequence(spec.seed)
    rng_mu, rng_eps, rng_data = [np.random.default_rng(s) for s in seq.spawn(3)]

    q_mu = _random_orthogonal(spec.dim, rng_mu)
    q_eps = _random_orthogonal(spec.dim, rng_eps)
    true_between = sym((q_mu * spec.mu_spectrum) @ q_mu.T)
    true_within = sym((q_eps * spec.eps_spectrum) @ q_eps.T)
    factor_mu = q_mu * np.sqrt(spec.mu_spectrum)
    factor_eps = q_eps * np.sqrt(spec.eps_spectrum)

    identities = rng_data.standard_normal((spec.n_speakers, spec.dim)) @ factor_mu.T
    groups = []
    for i, m in enumerate(counts):
        resid = rng_data.standard_normal((int(m), spec.dim)) @ factor_eps.T
        vectors = identities[i] + resid
        spk = f"spk{i:05d}"
        utts = tuple(f"{spk}-{j:03d}" for j in range(int(m)))
        groups.append(SpeakerGroup(spk, utts, vectors))
    dataset = Dataset(spec.dim, tuple(groups), np.zeros(spec.dim))
    return dataset, true_between, true_within


def generate_trials(dataset, n_target, n_nontarget, seed):
    """Random trial list over a dataset's utterances.

    Target trials split one speaker's sessions into two disjoint nonempty
    groups; nontarget trials pair a session subset of one speaker against a
    single session of another.
    """
    rng = np.random.default_rng(seed)
    trials = []
    multi = [g for g in dataset.speakers if g.num_sessions >= 2]
    if n_target > 0 and not multi:
        raise InsufficientSpeakers("target trials need a speaker with >= 2 sessions")
    if n_nontarget > 0 and dataset.n_speakers < 2:
        raise InsufficientSpeakers("nontarget trials need at least 2 speakers")
    for _ in range(n_target):
        g = multi[rng.integers(len(multi))]
        order = rng.permutation(g.num_sessions)
        cut = int(rng.integers(1, g.num_sessions))
        enroll = ",".join(g.utt_ids[j] for j in sorted(order[:cut]))
        test = ",".join(g.utt_ids[j] for j in sorted(order[cut:]))
        trials.append(Trial(enroll, test, TARGET))
    for _ in range(n_nontarget):
        i, j = rng.choice(dataset.n_speakers, size=2, replace=False)
        ge = dataset.speakers[i]
        gt = dataset.speakers[j]
        take = int(rng.integers(1, ge.num_sessions + 1))
        order = rng.permutation(ge.num_sessions)
        enroll = ",".join(ge.utt_ids[k] for k in sorted(order[:take]))
        test = gt.utt_ids[int(rng.integers(gt.num_sessions))]
        trials.append(Trial(enroll, test, NONTARGET))
    return TrialList(tuple(trials))


def stacked_covariance(n_sessions, between, within):
    """The full stacked covariance: within on the diagonal blocks, between
    everywhere."""
    between = check_symmetric(between, "between")
    within = check_symmetric(within, "within")
    eye = np.eye(n_sessions)
    ones = np.ones((n_sessions, n_sessions))
    return np.kron(eye, within) + np.kron(ones, between)


def oracle_set_loglik(X, between, within):
    """Set log-likelihood via the materialized stacked covariance.

    Reference value for the structured likelihood; guarded to desk scale.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, d = X.shape
    if m * d > ORACLE_MAX_STACKED:
        raise SizeGuardExceeded(f"stacked dimension {m * d} exceeds {ORACLE_MAX_STACKED}")
    sigma = stacked_covariance(m, between, within)
    return gaussian_logpdf_dense(X.ravel(), sigma)


def oracle_pair_llr(X1, X2, between, within):
    """Brute-force verification score: joint minus marginal log-likelihoods."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    joint = oracle_set_loglik(np.vstack([X1, X2]), between, within)
    return joint - oracle_set_loglik(X1, between, within) - oracle_set_loglik(X2, between, within)
