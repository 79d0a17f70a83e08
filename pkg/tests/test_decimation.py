from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vexpa.decimation import (
    ShiftSequence,
    Strategy,
    bezout,
    candidate_sets,
    decimate,
    euclid_recover,
    principal_roots,
    ratio_shift_result,
    recover_shift_eigenvalues,
    recover_term,
    shifted_amplitude_matrix,
    shifted_amplitudes,
)
from vexpa.errors import DegenerateSequenceError, InsufficientSamplesError, NotCoprimeError
from vexpa.presets import collision_model
from vexpa.prony import esprit, vandermonde_lstsq
from vexpa.signal_model import (
    ExponentialTerm,
    SampleSet,
    SamplingGrid,
    SignalModel,
    add_noise,
    sample,
)

COLLISION_GRID = SamplingGrid(0.01, 300)


def single(f=0.13, psi=-0.2, beta=1.5, gamma=0.4, delta=0.01, count=300):
    m = SignalModel((ExponentialTerm(beta, gamma, psi, 2 * math.pi * f / delta),))
    return m, sample(m, SamplingGrid(delta, count))


@pytest.mark.parametrize("N,u,sizes", [
    (10, 1, [10]),
    (7, 3, [2, 2, 1]),
    (300, 7, [min(300 // 7, (300 - k) // 7) for k in range(7)]),
])
def test_decimate_sizes(N, u, sizes):
    smp = SampleSet(SamplingGrid(1.0, N), np.arange(N))
    sets = decimate(smp, u)
    assert [len(d) for d in sets] == sizes
    for d in sets:
        assert np.all(np.diff(d.indices) == u) and d.indices[0] == d.k
        np.testing.assert_array_equal(d.values, smp.values[d.indices])
    assert set(sizes) <= {N // u, N // u - 1}


def test_decimate_rejects_large_u():
    with pytest.raises(InsufficientSamplesError):
        decimate(SampleSet(SamplingGrid(1.0, 10), np.ones(10)), 6)


def test_unshifted_row_is_the_decimation_solve():
    m, smp = single()
    lam = m.eigenvalues(0.01, 7)
    seqs = shifted_amplitudes(smp, 3, 7, 11, 4, lam)
    d = decimate(smp, 7)[3]
    assert seqs[0].values[0] == vandermonde_lstsq(d.values, lam, warn=False)[0]


@pytest.mark.parametrize("window", [None, 12])
def test_shifted_amplitudes_closed_form(window):
    m, smp = single()
    u, s, M, k = 7, 11, 8, 2
    lam_u = m.eigenvalues(0.01, u)
    seq = shifted_amplitudes(smp, k, u, s, M, lam_u, window)[0]
    mu, alpha = m.mus[0], m.alphas[0]
    expected = alpha * np.exp(mu * 0.01 * (k + s * np.arange(M)))
    np.testing.assert_allclose(seq.values, expected, rtol=0, atol=1e-10)
    # consecutive ratios are the shift eigenvalue
    np.testing.assert_allclose(seq.values[1:] / seq.values[:-1], np.exp(mu * s * 0.01), atol=1e-10)


def test_shifted_amplitudes_errors():
    _, smp = single(count=40)
    with pytest.raises(NotCoprimeError):
        shifted_amplitudes(smp, 0, 6, 4, 4, [1.0])
    with pytest.raises(ValueError):
        shifted_amplitudes(smp, 0, 7, 11, 1, [1.0])
    with pytest.raises(InsufficientSamplesError):
        shifted_amplitudes(smp, 0, 7, 11, 8, [1.0])
    with pytest.raises(ValueError):
        shifted_amplitude_matrix(smp.values, 0, 7, 2, 2, np.array([1.0]), window=0)


def collision_sequence():
    smp = sample(collision_model(), COLLISION_GRID)
    lam_u = np.exp(2j * np.pi * 3 / 10)
    return smp, lam_u, shifted_amplitudes(smp, 0, 10, 3, 8, [lam_u])[0]


def test_collision_sequence_follows_two_term_model():
    _, _, seq = collision_sequence()
    m = np.arange(8)
    expected = np.exp(2j * np.pi * 13 * 0.03 * m) + np.exp(2j * np.pi * 33 * 0.03 * m)
    np.testing.assert_allclose(seq.values, expected, atol=1e-10)


def test_recover_shift_eigenvalues_collision():
    _, _, seq = collision_sequence()
    pairs = recover_shift_eigenvalues(seq, 4)
    amps = np.abs([a for _, a in pairs])
    assert len(pairs) == 2  # numerical rank clamps away the empty directions
    np.testing.assert_allclose(amps, 1.0, atol=1e-8)
    got = sorted(np.angle([l for l, _ in pairs]))
    want = sorted(np.angle(np.exp(2j * np.pi * np.array([13, 33]) * 0.03)))
    np.testing.assert_allclose(got, want, atol=1e-8)


def test_recover_shift_eigenvalues_single_term():
    m, smp = single()
    seq = shifted_amplitudes(smp, 0, 7, 11, 8, m.eigenvalues(0.01, 7))[0]
    pairs = recover_shift_eigenvalues(seq, 1)
    assert abs(pairs[0][0] - np.exp(m.mus[0] * 11 * 0.01)) < 1e-10


def test_recover_shift_eigenvalues_noise_term_is_small():
    rng = np.random.default_rng(3)
    lam = np.exp(2j * np.pi * 0.21)
    vals = 2 * lam ** np.arange(8) + 1e-4 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
    pairs = recover_shift_eigenvalues(ShiftSequence(0, 0, vals, 11), 2)
    assert len(pairs) == 2
    assert abs(pairs[0][1]) > 1.9 and abs(pairs[1][1]) < 1e-3
    assert abs(pairs[0][0] - lam) < 1e-3
    assert len(recover_shift_eigenvalues(ShiftSequence(0, 0, vals, 11), 2, threshold=0.1)) == 1


def test_recover_shift_eigenvalues_errors():
    with pytest.raises(DegenerateSequenceError):
        recover_shift_eigenvalues(ShiftSequence(0, 0, np.zeros(8, complex), 3))
    with pytest.raises(ValueError):
        recover_shift_eigenvalues(ShiftSequence(0, 0, np.ones(8, complex), 3), 5)


def test_principal_roots():
    r = principal_roots(8j, 3)
    np.testing.assert_allclose(r ** 3, 8j, atol=1e-12)
    np.testing.assert_allclose(np.abs(r), 2.0)


def test_candidate_sets_trivial():
    lam = np.exp(0.3j)
    c = candidate_sets(lam, lam, 1, 1)
    assert c.matched == pytest.approx(lam) and len(c.U) == 1 and len(c.S) == 1


def test_candidate_sets_brute_force_u9_s4():
    lam = np.exp(2j * np.pi * 0.13)
    c = candidate_sets(lam ** 9, lam ** 4, 9, 4)
    pairs = [(abs(a - b), a) for a in c.U for b in c.S]
    assert len(pairs) == 36
    best = min(pairs, key=lambda p: p[0])
    assert abs(best[1] - lam) < 1e-10 and abs(c.matched - lam) < 1e-10
    assert not c.ambiguous
    assert np.allclose(np.abs(c.U), 1) and np.allclose(np.abs(c.S), 1)


def test_candidate_sets_collision_term():
    lam = np.exp(2j * np.pi * 33 / 100)
    assert abs(candidate_sets(lam ** 10, lam ** 3, 10, 3).matched - lam) < 1e-12


def test_candidate_sets_radius_follows_damping():
    lam = 0.9 * np.exp(0.7j)
    c = candidate_sets(lam ** 5, lam ** 3, 5, 3)
    np.testing.assert_allclose(np.abs(c.U), 0.9)
    np.testing.assert_allclose(np.abs(c.S), 0.9)
    assert abs(c.matched - lam) < 1e-12
    with pytest.raises(ValueError):
        candidate_sets(0, 1, 5, 3)


def test_candidate_sets_ambiguity_flag():
    # exactly halfway between two u-side candidates, both are equally good
    c = candidate_sets(1.0, np.exp(1j * np.pi / 2), 2, 1)
    assert c.ambiguous


@given(st.integers(1, 12), st.integers(1, 12), st.floats(0, 1, exclude_max=True))
def test_coprime_pair_is_unique(u, s, frac):
    if math.gcd(u, s) != 1:
        return
    lam = np.exp(2j * np.pi * frac)
    c = candidate_sets(lam ** u, lam ** s, u, s)
    D = np.abs(c.U[:, None] - c.S[None, :])
    # false pairs sit at least 2 sin(pi/(u s)) apart
    eps = math.sin(math.pi / (u * s))
    assert np.count_nonzero(D < eps) == 1
    assert abs(c.matched - lam) < 1e-9


@pytest.mark.parametrize("u,s,wr", [(10, 3, (1, -3)), (7, 11, (-3, 2)), (1, 1, (1, 0)), (7, 6, (1, -1))])
def test_bezout(u, s, wr):
    w, r = bezout(u, s)
    assert w * u + r * s == 1
    assert (w, r) == wr


@given(st.integers(1, 60), st.integers(1, 60))
def test_bezout_is_minimal(u, s):
    if math.gcd(u, s) != 1:
        with pytest.raises(NotCoprimeError):
            bezout(u, s)
        return
    w, r = bezout(u, s)
    assert w * u + r * s == 1
    best = min(abs(a) + abs((1 - a * u) // s) for a in range(-s - 1, s + 2) if (1 - a * u) % s == 0)
    assert abs(w) + abs(r) == best


def test_euclid_recover_and_noise_amplification():
    rng = np.random.default_rng(11)
    errs = []
    for _ in range(50):
        lam = np.exp(2j * np.pi * rng.uniform())
        assert abs(euclid_recover(lam ** 7, lam ** 11, 7, 11) - lam) < 1e-9
        p = 1e-3 * np.exp(2j * np.pi * rng.uniform(size=2))
        errs.append(abs(euclid_recover(lam ** 7 + p[0], lam ** 11 + p[1], 7, 11) - lam))
    # (w, r) = (-3, 2): first-order error 3|p0| + 2|p1| in the worst case
    assert np.median(errs) > 1.5e-3
    assert max(errs) <= 5.1e-3


def test_strategies_agree_noisefree():
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = rng.uniform(-0.49, 0.49)
        m, smp = single(f=f, psi=-0.1)
        seq = shifted_amplitudes(smp, 1, 7, 11, 8, m.eigenvalues(0.01, 7))[0]
        lam_u = m.eigenvalues(0.01, 7)[0]
        results = [
            recover_term(lam_u, recover_shift_eigenvalues(seq, None, 0.1), 7, 11, Strategy.STABILIZED),
            recover_term(lam_u, ratio_shift_result(seq), 7, 11, Strategy.DISTANCE),
            recover_term(lam_u, ratio_shift_result(seq), 7, 11, Strategy.EUCLID),
        ]
        for r in results:
            assert len(r) == 1 and abs(r[0][0] - m.eigenvalues(0.01)[0]) < 1e-9


def test_collision_recovery_and_conservation():
    smp, lam_u, seq = collision_sequence()
    pairs = recover_shift_eigenvalues(seq, 4, 0.1)
    out = recover_term(lam_u, pairs, 10, 3, Strategy.STABILIZED)
    got = sorted(np.angle([l for l, _ in out]) / (2 * np.pi * 0.01))
    np.testing.assert_allclose(got, [13, 33], atol=1e-8)
    decimated_alpha = vandermonde_lstsq(decimate(smp, 10)[0].values, [lam_u])[0]
    assert abs(decimated_alpha - sum(a for _, a in out)) < 1e-8


def test_stabilized_beats_distance_under_noise():
    u, s, M = 7, 11, 8
    m, clean = single(f=0.13, psi=0.0, beta=1.0, gamma=0.0)
    truth = m.eigenvalues(0.01)[0]
    e_stab, e_dist = [], []
    for seed in range(100):
        smp = add_noise(clean, 30, seed)
        x = decimate(smp, u)[0].values
        lam_u = esprit(x, 1)
        seq = shifted_amplitudes(smp, 0, u, s, M, lam_u, window=2)[0]
        stab = recover_term(lam_u[0], recover_shift_eigenvalues(seq, None, 0.1), u, s, Strategy.STABILIZED)
        dist = recover_term(lam_u[0], ratio_shift_result(seq), u, s, Strategy.DISTANCE)
        e_stab.append(abs(stab[0][0] - truth))
        e_dist.append(abs(dist[0][0] - truth))
    assert np.median(e_stab) <= np.median(e_dist)
