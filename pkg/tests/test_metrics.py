import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopsense.channel import OfdmConfig
from coopsense.metrics import db_to_linear, downlink_sum_rate, ospa, percentile_summary, qpsk_capacity


def ospa_bruteforce(S, E, p=2.0, xi=5.0):
    """Exhaustive search over all injections of the smaller set into the larger one."""
    S = np.asarray(S, float).reshape(-1, 2)
    E = np.asarray(E, float).reshape(-1, 2)
    ns, ne = len(S), len(E)
    if ns + ne == 0:
        return 0.0
    small, large, flip = (S, E, False) if ns <= ne else (E, S, True)
    best_cost, best_pairs = math.inf, []
    for perm in itertools.permutations(range(len(large)), len(small)):
        pairs = [(i, perm[i]) for i in range(len(small))]
        cost = sum(min(np.linalg.norm(small[i] - large[j]), xi) ** p for i, j in pairs)
        if cost < best_cost - 1e-12:
            best_cost, best_pairs = cost, pairs
    dists = [np.linalg.norm(small[i] - large[j]) for i, j in best_pairs]
    gated = [d for d in dists if d < xi]
    k = len(gated)
    n_c = ns + ne - k
    if n_c == 0:
        return 0.0
    return ((sum(d ** p for d in gated) + xi ** p / 2 * (ns + ne - 2 * k)) / n_c) ** (1 / p)


def test_ospa_examples():
    pts = [[0, 0], [3, 4]]
    r = ospa(pts, pts)
    assert r.ospa == 0 and r.p_d == 1 and r.p_fa == 0 and r.p_md == 0
    r = ospa([[0, 0]], [[1, 0]], 2, 5)
    assert r.ospa == pytest.approx(1.0)
    r = ospa([[0, 0]], np.zeros((0, 2)), 2, 5)
    assert r.ospa == pytest.approx(5 / math.sqrt(2))
    assert r.ospa == pytest.approx(3.536, abs=1e-3)
    assert r.p_d == 0 and r.p_md == 1


def test_ospa_out_of_gate_is_false_alarm():
    r = ospa([[0, 0]], [[6, 0]], 2, 5)
    assert r.assignment == ()
    assert r.p_d == 0 and r.p_fa == 1
    assert r.ospa == pytest.approx(5 / math.sqrt(2))


def test_ospa_empty_sets():
    r = ospa(np.zeros((0, 2)), np.zeros((0, 2)))
    assert r.ospa == 0 and not r.defined
    r = ospa(np.zeros((0, 2)), [[1, 1]])
    assert math.isnan(r.p_fa) and r.ospa == pytest.approx(5 / math.sqrt(2))
    with pytest.raises(ValueError):
        ospa([[0, 0]], [[0, 0]], p=0.5)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2 ** 32 - 1), st.sampled_from([1.0, 2.0, 3.0]))
def test_ospa_matches_bruteforce(ns, ne, seed, p):
    rng = np.random.default_rng(seed)
    S = rng.uniform(-6, 6, (ns, 2))
    E = rng.uniform(-6, 6, (ne, 2))
    r = ospa(S, E, p, 5.0)
    assert r.ospa == pytest.approx(ospa_bruteforce(S, E, p, 5.0), abs=1e-9)
    assert 0 <= r.ospa <= 5.0 + 1e-12
    if ns:
        assert r.p_d + r.p_md == pytest.approx(1.0)


def test_qpsk_examples():
    assert qpsk_capacity(0.0) == pytest.approx(0.0, abs=1e-6)
    assert qpsk_capacity(1e6) == pytest.approx(2.0, abs=1e-6)
    g = 0.6 * 10 ** 0.8
    assert g == pytest.approx(3.786, abs=1e-3)
    assert qpsk_capacity(g) == pytest.approx(1.803, abs=1e-3)
    with pytest.raises(ValueError):
        qpsk_capacity(-1.0)


def test_qpsk_bounded_and_increasing():
    g = np.linspace(0, 50, 5001)
    c = qpsk_capacity(g)
    assert np.all(np.diff(c) > 0)
    assert np.all(c <= np.minimum(2.0, np.log2(1 + g)) + 1e-3)


def test_downlink_examples():
    snr = db_to_linear(8.0)
    assert downlink_sum_rate(0.6, 0.0, 0.4, snr).c_dl == pytest.approx(3168 * 120e3 * math.log2(1 + snr))
    assert downlink_sum_rate(0.6, 0.0, 0.4, snr).c_dl / 1e9 == pytest.approx(1.09, abs=0.005)
    rep = downlink_sum_rate(1.0, 1.0, 0.4, snr)
    assert rep.comm_subcarriers == 0 and rep.comm_time == 0
    assert rep.c_dl == pytest.approx(3168 * 120e3 * qpsk_capacity(0.6 * snr))
    assert rep.c_dl / 1e9 == pytest.approx(0.686, abs=0.001)
    assert downlink_sum_rate(1.0, 1.0, 0.1, snr).c_dl / 1e9 == pytest.approx(0.735, abs=0.001)
    with pytest.raises(ValueError):
        downlink_sum_rate(1.2, 1.0, 0.1, snr)


def test_downlink_per_subcarrier_snr():
    ofdm = OfdmConfig(k0=4, k_s=4)
    snr = np.array([1.0, 3.0, 7.0, 15.0])
    rep = downlink_sum_rate(0.5, 0.5, 0.0, snr, ofdm)
    assert rep.jsc == pytest.approx(0.5 * 120e3 * (qpsk_capacity(1.0) + qpsk_capacity(3.0)))
    assert rep.comm_subcarriers == pytest.approx(0.5 * 120e3 * (3 + 4))
    assert rep.comm_time == pytest.approx(0.5 * 120e3 * (1 + 2 + 3 + 4))


@pytest.mark.parametrize("which", ["rho_p", "rho_f", "rho_t"])
def test_downlink_nonincreasing(which):
    snr = db_to_linear(8.0)
    base = dict(rho_f=0.6, rho_t=0.5, rho_p=0.4)
    rates = []
    for v in np.linspace(0, 1, 41):
        kw = dict(base, **{which: v})
        rates.append(downlink_sum_rate(kw["rho_f"], kw["rho_t"], kw["rho_p"], snr).c_dl)
    assert all(b <= a + 1e-6 for a, b in zip(rates, rates[1:]))


def _percentile_oracle(v, q):
    s = sorted(v)
    pos = (len(s) - 1) * q / 100
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 30), st.integers(0, 10), st.integers(0, 2 ** 32 - 1))
def test_percentile_summary_matches_sort(runs, scans, burn, seed):
    v = np.random.default_rng(seed).random((runs, scans))
    out = percentile_summary(v, burn)
    kept = v[:, burn:].ravel().tolist()
    if not kept:
        assert math.isnan(out["mean"])
        return
    assert out["mean"] == pytest.approx(sum(kept) / len(kept))
    assert out["p10"] == pytest.approx(_percentile_oracle(kept, 10))
    assert out["p90"] == pytest.approx(_percentile_oracle(kept, 90))


def test_percentile_summary_ignores_nan():
    out = percentile_summary([[np.nan, 1.0, 3.0]], 0)
    assert out["mean"] == 2.0


def test_gated_ospa_triangle_fails_across_the_gate():
    # an out-of-gate pair costs xi/2**(1/p) while an in-gate pair may cost up to xi,
    # so the normalized gated distance is not a metric in general
    a, b, c = [[0.0, 0.0]], [[0.5, 0.0]], [[-4.8, 0.0]]
    assert ospa(a, c).ospa == pytest.approx(4.8)
    assert ospa(a, b).ospa + ospa(b, c).ospa == pytest.approx(0.5 + 5 / math.sqrt(2))
    assert ospa(a, c).ospa > ospa(a, b).ospa + ospa(b, c).ospa


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2 ** 32 - 1))
def test_ospa_identity_and_symmetry(ns, ne, seed):
    rng = np.random.default_rng(seed)
    S = rng.uniform(-6, 6, (ns, 2))
    E = rng.uniform(-6, 6, (ne, 2))
    assert ospa(S, S).ospa == 0
    assert ospa(S, E).ospa == pytest.approx(ospa(E, S).ospa, abs=1e-12)
    if ns != ne:
        assert ospa(S, E).ospa > 0
