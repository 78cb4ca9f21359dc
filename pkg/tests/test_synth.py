import numpy as np
import pytest

from jbplda.dataset import NONTARGET, TARGET, center
from jbplda.exceptions import InsufficientSpeakers, SizeGuardExceeded
from jbplda.jb import JbModel, jb_loglik
from jbplda.linalg import gaussian_logpdf_dense
from jbplda.synth import (
    SynthSpec,
    generate_dataset,
    generate_trials,
    oracle_set_loglik,
    sample_spd,
    stacked_covariance,
)
from jbplda.dataset import Dataset, SpeakerGroup


def test_sample_spd_isotropic_is_identity():
    M = sample_spd(4, [1.0] * 4, seed=1)
    np.testing.assert_allclose(M, np.eye(4), atol=1e-12)


def test_sample_spd_rank_one_trace():
    M = sample_spd(2, [4.0, 0.0], seed=2)
    assert np.trace(M) == pytest.approx(4.0, abs=1e-8)
    assert np.linalg.matrix_rank(M, tol=1e-10) == 1


def test_sample_spd_deterministic():
    a = sample_spd(5, np.linspace(2, 0.5, 5), seed=3)
    b = sample_spd(5, np.linspace(2, 0.5, 5), seed=3)
    assert np.array_equal(a, b)


def test_sample_spd_eigenvalues_match_spectrum():
    spectrum = np.array([3.0, 2.0, 1.0, 0.5, 0.1])
    M = sample_spd(5, spectrum, seed=4)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(M))[::-1], spectrum, atol=1e-8)


def test_generate_dataset_zero_between_noise_only():
    spec = SynthSpec(4, 50, 6, [0.0] * 4, [1.0] * 4, seed=5)
    ds, true_b, true_w = generate_dataset(spec)
    assert np.all(true_b == 0.0)
    # sessions of one speaker still differ (noise only)
    g = ds.speakers[0]
    assert np.linalg.norm(g.vectors[0] - g.vectors[1]) > 0.0
    # sample covariance approaches the within covariance
    stacked = center(ds).stacked()
    sample_cov = stacked.T @ stacked / stacked.shape[0]
    rel = np.linalg.norm(sample_cov - true_w) / np.linalg.norm(true_w)
    assert rel < 0.2


def test_generate_dataset_law_of_large_numbers():
    spec = SynthSpec(8, 2000, 10, list(np.linspace(2.0, 0.4, 8)), [1.0] * 8, seed=6)
    ds, true_b, true_w = generate_dataset(spec)
    xbars = np.vstack([g.vectors.mean(axis=0) for g in ds.speakers])
    xbars -= xbars.mean(axis=0)
    between_sample = xbars.T @ xbars / xbars.shape[0] - true_w / 10.0
    rel_b = np.linalg.norm(between_sample - true_b) / np.linalg.norm(true_b)
    within_acc = np.zeros((8, 8))
    n = 0
    for g in ds.speakers:
        resid = g.vectors - g.vectors.mean(axis=0)
        within_acc += resid.T @ resid
        n += g.num_sessions - 1
    within_sample = within_acc / n
    rel_w = np.linalg.norm(within_sample - true_w) / np.linalg.norm(true_w)
    assert rel_b < 0.10
    assert rel_w < 0.10


def test_generate_dataset_session_list():
    spec = SynthSpec(3, 3, (1, 2, 3), [1.0] * 3, [1.0] * 3, seed=7)
    ds, _, _ = generate_dataset(spec)
    assert [g.num_sessions for g in ds.speakers] == [1, 2, 3]


def test_generate_dataset_bitwise_reproducible():
    spec = SynthSpec(5, 20, 3, [1.5] * 5, [0.8] * 5, seed=8)
    a, ab, aw = generate_dataset(spec)
    b, bb, bw = generate_dataset(spec)
    assert np.array_equal(a.stacked(), b.stacked())
    assert np.array_equal(ab, bb)
    assert np.array_equal(aw, bw)


def test_generate_trials_labels_and_disjointness():
    spec = SynthSpec(3, 10, 4, [1.0] * 3, [1.0] * 3, seed=9)
    ds, _, _ = generate_dataset(spec)
    trials = generate_trials(ds, 15, 25, seed=10)
    tar = [t for t in trials if t.label == TARGET]
    non = [t for t in trials if t.label == NONTARGET]
    assert len(tar) == 15 and len(non) == 25
    for t in tar:
        left = set(t.enroll_id.split(","))
        right = set(t.test_id.split(","))
        assert not left & right
        speakers = {u.rsplit("-", 1)[0] for u in left | right}
        assert len(speakers) == 1
    for t in non:
        left = {u.rsplit("-", 1)[0] for u in t.enroll_id.split(",")}
        right = {u.rsplit("-", 1)[0] for u in t.test_id.split(",")}
        assert left != right


def test_generate_trials_zero_targets():
    spec = SynthSpec(2, 4, 1, [1.0] * 2, [1.0] * 2, seed=11)
    ds, _, _ = generate_dataset(spec)
    trials = generate_trials(ds, 0, 5, seed=12)
    assert all(t.label == NONTARGET for t in trials)


def test_generate_trials_impossible_targets():
    spec = SynthSpec(2, 2, 1, [1.0] * 2, [1.0] * 2, seed=13)
    ds, _, _ = generate_dataset(spec)
    with pytest.raises(InsufficientSpeakers):
        generate_trials(ds, 1, 0, seed=14)


def test_generate_trials_deterministic():
    spec = SynthSpec(2, 6, 3, [1.0] * 2, [1.0] * 2, seed=15)
    ds, _, _ = generate_dataset(spec)
    a = generate_trials(ds, 5, 5, seed=16)
    b = generate_trials(ds, 5, 5, seed=16)
    assert a.trials == b.trials


def test_oracle_single_block_reduces_to_dense():
    between = sample_spd(3, [1.5, 1.0, 0.5], seed=17)
    within = sample_spd(3, [1.0, 0.8, 0.6], seed=18)
    x = np.random.default_rng(19).standard_normal(3)
    got = oracle_set_loglik(x[None, :], between, within)
    want = gaussian_logpdf_dense(x, between + within)
    assert got == pytest.approx(want, abs=1e-10)


def test_oracle_scalar_hand_example():
    got = oracle_set_loglik([[0.0], [0.0]], [[1.0]], [[1.0]])
    assert got == pytest.approx(-np.log(2 * np.pi) - 0.5 * np.log(3.0), abs=1e-12)


def test_oracle_matches_structured_loglik():
    rng = np.random.default_rng(20)
    between = sample_spd(4, [2.0, 1.2, 0.9, 0.4], seed=21)
    within = sample_spd(4, [1.1, 1.0, 0.8, 0.5], seed=22)
    X = rng.standard_normal((3, 4))
    ds = Dataset(4, (SpeakerGroup("s", ("a", "b", "c"), X),), np.zeros(4))
    model = JbModel(np.zeros(4), between, within)
    assert oracle_set_loglik(X, between, within) == pytest.approx(
        jb_loglik(ds, model), abs=1e-8
    )


def test_oracle_size_guard():
    with pytest.raises(SizeGuardExceeded):
        oracle_set_loglik(np.zeros((9, 8)), np.eye(8), np.eye(8))


def test_stacked_covariance_structure():
    between = np.array([[2.0]])
    within = np.array([[3.0]])
    sigma = stacked_covariance(3, between, within)
    np.testing.assert_allclose(sigma, [[5.0, 2.0, 2.0], [2.0, 5.0, 2.0], [2.0, 2.0, 5.0]])


def test_speaker_means_concentrate_without_identity_variance():
    # between = 0: per-speaker sample means shrink like 1/sqrt(m)
    spec = SynthSpec(2, 60, 16, [0.0] * 2, [1.0] * 2, seed=23)
    ds, _, _ = generate_dataset(spec)
    means = np.vstack([g.vectors.mean(axis=0) for g in ds.speakers])
    # each coordinate mean ~ N(0, 1/16); 3 sigma bound across speakers
    assert np.abs(means).max() <= 3.0 / np.sqrt(16.0)
