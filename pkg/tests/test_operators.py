import io
import json

import numpy as np
import pytest

from ckdv.fields import (
    FieldError,
    Gauge,
    SpectralPair,
    make_field,
    make_pair,
    pair_norm,
    random_field,
    random_pair,
    zero_field,
)
from ckdv.operators import (
    ArgumentFilter,
    OperatorId,
    PhaseCache,
    b1,
    b1_high_vec,
    b1_low_vec,
    b1_vec,
    b2,
    b2_high_vec,
    b3,
    b30_vec,
    b4,
    b40_vec,
    phase4,
    r3,
    r3_high_vec,
    r3nres,
    r3res_closed,
    resonance_indicator,
    split_r3q,
    trace_evaluations,
)
from ckdv.verify import brute_force_oracle

COS1 = make_field(4, [(1, 1.0)])  # c_1 = c_{-1} = 1


def rel_err(a, b):
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


def test_b1_single_term():
    out = b1(COS1, COS1, 0.0)
    assert out.coeff(2) == pytest.approx(1j, abs=1e-14)
    assert out.coeff(-2) == pytest.approx(-1j, abs=1e-14)
    assert abs(out.coeff(1)) < 1e-14


def test_b1_bilinearity_zero():
    z = zero_field(4)
    assert np.all(b1(z, COS1, 0.3).coeffs == 0)


def test_b1_fast_equals_direct_sum():
    # the FFT path against a literal double sum
    for seed in range(4):
        phi = random_field(seed, 16, 0.5, 0.8)
        psi = random_field(seed + 50, 16, 0.5, 0.8)
        for t in (0.0, 0.37, 1.1):
            fast = b1(phi, psi, t)
            brute = brute_force_oracle(OperatorId.B1, (phi, psi), t)
            assert rel_err(fast.coeffs, brute.coeffs) < 1e-12


def test_b2_single_term_and_mean_zero():
    out = b2(COS1, COS1, 0.0)
    assert out.coeff(2) == pytest.approx(1 / 6, abs=1e-15)
    assert out.coeffs[out.n_max] == 0.0  # no k = 0 output


def test_r3_examples():
    out = r3(COS1, COS1, COS1, 0.0)
    assert out.coeff(3) == pytest.approx(1.0, abs=1e-14)
    assert out.coeff(1) == pytest.approx(1.0, abs=1e-14)
    # the resonant value persists at every t
    assert r3(COS1, COS1, COS1, 0.9).coeff(1) == pytest.approx(1.0, abs=1e-13)
    z = zero_field(4)
    assert np.all(r3(z, COS1, COS1, 0.2).coeffs == 0)


def test_r3nres_single_triple_phase():
    out = r3nres(COS1, COS1, COS1, 0.5)
    assert out.coeff(3) == pytest.approx(np.exp(12j), abs=1e-13)
    # resonant-only support gives zero
    assert abs(out.coeff(1)) < 1e-14


def test_resonance_indicator():
    assert resonance_indicator(2, -2, 5)
    assert not resonance_indicator(1, 1, 1)
    assert resonance_indicator(3, 4, -4)


def test_r3res_closed_cos_mode():
    out = r3res_closed(COS1, COS1, COS1)
    assert out.coeff(1) == pytest.approx(1.0, abs=1e-14)


def test_r3res_disjoint_support_diagonals_vanish():
    even = make_field(8, [(2, 0.5), (4, 0.25j)])
    odd = make_field(8, [(1, 1.0), (3, 0.5)])
    out = r3res_closed(even, even, odd)
    # diagonal sets need phi, psi, xi mass at the same |k|; the j-sum sets
    # contribute only through xi_k or psi_k at k odd times even-support sums
    for k in (1, 3, 5, 7):
        s_ab = sum(even.coeff(j) * even.coeff(-j) / j
                   for j in range(-8, 9) if j not in (0, k, -k))
        expected = odd.coeff(k) * s_ab
        assert out.coeff(k) == pytest.approx(expected, abs=1e-14)


def test_split_identity_random():
    for seed in (0, 1):
        u = random_field(seed, 12, 0.5, 0.7)
        v = random_field(seed + 9, 12, 0.5, 0.7)
        w = random_field(seed + 17, 12, 0.5, 0.7)
        res = r3res_closed(u, v, w)
        for t in (0.0, 0.37):
            full = r3(u, v, w, t)
            nres = r3nres(u, v, w, t)
            assert rel_err(full.coeffs, res.coeffs + nres.coeffs) < 1e-12


def test_b3_single_term():
    out = b3(COS1, COS1, COS1, 0.0)
    assert out.coeff(3) == pytest.approx(1 / 8, abs=1e-15)
    assert out.symmetry == "hermitian"


def test_phase4_examples():
    assert phase4(1, 1, 1, 1) == 60
    assert phase4(2, 3, -1, 5) == 570
    assert phase4(3, -3, 7, -7) == 0
    # wide integers: no overflow for |k| up to 2^16
    big = 2 ** 16
    assert phase4(big, big, big, big) == (4 * big) ** 3 - 4 * big ** 3


def test_b4_multilinearity_and_symmetry():
    z = zero_field(6)
    f = random_field(3, 6, 0.5, 0.7)
    assert np.all(b4(z, f, f, f, 0.2).coeffs == 0)
    out = b4(f, f, f, f, 0.2)
    assert out.symmetry == "anti"
    np.testing.assert_allclose(out.coeffs, -np.conj(out.coeffs[::-1]), atol=1e-13)


def test_b4_matches_brute_quadruple_sum():
    for seed in range(3):
        fs = [random_field(seed * 4 + j, 6, 0.5, 0.7) for j in range(4)]
        for t in (0.0, 0.7):
            fast = b4(*fs, t)
            brute = brute_force_oracle(OperatorId.B4, fs, t)
            assert rel_err(fast.coeffs, brute.coeffs) < 1e-12


def test_b1_vec_examples():
    u = random_field(5, 8, 0.5, 0.5)
    p_diag = make_pair(u, u)
    out = b1_vec(p_diag, 0.3)
    assert np.max(np.abs(out.u.coeffs)) < 1e-15
    assert np.max(np.abs(out.v.coeffs)) < 1e-15
    p_inv = make_pair(u, zero_field(8))
    out = b1_vec(p_inv, 0.3)
    expected = b1(u, u, 0.3)
    np.testing.assert_allclose(out.u.coeffs, -expected.coeffs, atol=1e-14)
    assert np.max(np.abs(out.v.coeffs)) == 0.0


def test_b1_vec_compositional():
    p = random_pair(8, 12, 0.5, 0.6)
    t = 0.41
    out = b1_vec(p, t)
    buv = b1(p.u, p.v, t)
    buu = b1(p.u, p.u, t)
    bvv = b1(p.v, p.v, t)
    assert rel_err(out.u.coeffs, buv.coeffs - buu.coeffs) < 1e-12
    assert rel_err(out.v.coeffs, buv.coeffs - bvv.coeffs) < 1e-12


def test_b1_low_vec_cases():
    p = random_pair(2, 12, 0.5, 0.6)
    hi = SpectralPair(*(type(f)(f.modes, np.where(np.abs(np.arange(-12, 13)) > 4,
                                                  f.coeffs, 0.0))
                        for f in (p.u, p.v)))
    assert pair_norm(b1_low_vec(hi, 0.3, 4), 0) == 0.0
    full = b1_vec(p, 0.3)
    low = b1_low_vec(p, 0.3, 12)
    assert rel_err(low.u.coeffs, full.u.coeffs) < 1e-13
    # output support: |k| <= 2 n_cut
    out = b1_low_vec(p, 0.3, 4)
    k = np.arange(-12, 13)
    assert np.all(out.u.coeffs[np.abs(k) > 8] == 0)


def test_b1_split_identity():
    p = random_pair(21, 16, 0.5, 0.6)
    for t in (0.0, 0.37, 2.0):
        full = b1_vec(p, t)
        low = b1_low_vec(p, t, 6)
        high = b1_high_vec(p, t, 6)
        assert rel_err(
            np.stack([full.u.coeffs, full.v.coeffs]),
            np.stack([low.u.coeffs + high.u.coeffs, low.v.coeffs + high.v.coeffs]),
        ) < 1e-12


def test_b2_high_vec_cases():
    p = random_pair(31, 12, 0.5, 0.6)
    lowp = SpectralPair(*(type(f)(f.modes, np.where(np.abs(np.arange(-12, 13)) <= 5,
                                                    f.coeffs, 0.0))
                          for f in (p.u, p.v)))
    assert pair_norm(b2_high_vec(lowp, 0.4, 5), 0) == 0.0
    diag = make_pair(p.u, p.u)
    out = b2_high_vec(diag, 0.4, 5)
    np.testing.assert_allclose(out.u.coeffs, out.v.coeffs, atol=1e-15)


def test_r3q_split_and_resonant_time_independence():
    p = random_pair(41, 12, 0.5, 0.6)
    n_cut = 5
    full = r3_high_vec(p, 0.6, n_cut)
    res, n0, n1 = split_r3q(p, 0.6, n_cut)
    assert rel_err(
        np.stack([full.u.coeffs, full.v.coeffs]),
        np.stack([res.u.coeffs + n0.u.coeffs + n1.u.coeffs,
                  res.v.coeffs + n0.v.coeffs + n1.v.coeffs])) < 1e-12
    res2, _, _ = split_r3q(p, 0.0, n_cut)
    np.testing.assert_allclose(res.u.coeffs, res2.u.coeffs, atol=1e-15)


def test_high_split_degenerate_cutoff():
    p = random_pair(51, 10, 0.5, 0.6)
    assert pair_norm(b2_high_vec(p, 0.3, 10), 0) == 0.0
    assert pair_norm(r3_high_vec(p, 0.3, 10), 0) == 0.0
    assert pair_norm(b30_vec(p, 0.3, 10), 0) == 0.0
    assert pair_norm(b40_vec(p, 0.3, 10), 0) == 0.0


def test_b40_zero_pair_and_symmetry():
    z = make_pair(zero_field(8), zero_field(8))
    assert pair_norm(b40_vec(z, 0.2, 3), 0) == 0.0
    p = random_pair(61, 8, 0.5, 0.6)
    out = b40_vec(p, 0.2, 3)
    np.testing.assert_allclose(out.u.coeffs, np.conj(out.u.coeffs[::-1]), atol=1e-15)


def test_vector_outputs_hermitian():
    p = random_pair(71, 10, 0.5, 0.6)
    for op in (lambda: b1_vec(p, 0.5), lambda: b2_high_vec(p, 0.5, 4),
               lambda: r3_high_vec(p, 0.5, 4), lambda: b30_vec(p, 0.5, 4),
               lambda: b40_vec(p, 0.5, 4)):
        out = op()
        assert out.u.symmetry == "hermitian"
        np.testing.assert_allclose(out.u.coeffs, np.conj(out.u.coeffs[::-1]),
                                   atol=1e-13 * max(np.max(np.abs(out.u.coeffs)), 1e-30))


def test_bare_structures_anti_hermitian():
    u = random_field(3, 8, 0.5, 0.7)
    for f in (r3(u, u, u, 0.3), r3nres(u, u, u, 0.3), r3res_closed(u, u, u)):
        assert f.symmetry == "anti"
        np.testing.assert_allclose(f.coeffs, -np.conj(f.coeffs[::-1]), atol=1e-13)


@pytest.mark.parametrize("op,nargs", [("b2", 2), ("r3", 3), ("b3", 3)])
def test_multilinearity(op, nargs):
    fn = {"b2": lambda a, t: b2(*a, t), "r3": lambda a, t: r3(*a, t),
          "b3": lambda a, t: b3(*a, t)}[op]
    rng = np.random.default_rng(11)
    base = [random_field(int(rng.integers(2 ** 31)), 10, 0.5, 0.7) for _ in range(nargs)]
    extra = random_field(int(rng.integers(2 ** 31)), 10, 0.5, 0.7)
    a, b_ = 0.7, -1.3
    combo = base.copy()
    combo[0] = a * base[0] + b_ * extra
    lhs = fn(combo, 0.37)
    alt = base.copy()
    alt[0] = extra
    rhs = a * fn(base, 0.37) + b_ * fn(alt, 0.37)
    assert rel_err(lhs.coeffs, rhs.coeffs) < 1e-12


def test_filter_partition():
    u = random_field(1, 10, 0.5, 0.7)
    v = random_field(2, 10, 0.5, 0.7)
    w = random_field(3, 10, 0.5, 0.7)
    t = 0.29
    full = r3(u, v, w, t)
    lowpair = r3(u, v, w, t, ArgumentFilter(("all",) * 3, n_cut=4, pair=(1, 2), pair_tag="low"))
    highpair = r3(u, v, w, t, ArgumentFilter(("all",) * 3, n_cut=4, pair=(1, 2), pair_tag="high"))
    assert rel_err(full.coeffs, lowpair.coeffs + highpair.coeffs) < 1e-13
    lowarg = r3(u, v, w, t, ArgumentFilter(("low", "all", "all"), n_cut=4))
    higharg = r3(u, v, w, t, ArgumentFilter(("high", "all", "all"), n_cut=4))
    assert rel_err(full.coeffs, lowarg.coeffs + higharg.coeffs) < 1e-13


def test_filter_validation():
    with pytest.raises(ValueError):
        ArgumentFilter(("low",), n_cut=0)
    with pytest.raises(ValueError):
        ArgumentFilter(("sideways",), n_cut=3)


def test_phase_cache_unit_modulus():
    cache = PhaseCache(0.77, 12)
    for block in (cache.bilinear(), cache.gauge_factors(),
                  cache.trilinear_block(np.array([1, 2, 3])),
                  cache.quadrilinear_block(np.array([1, 2, 3]))):
        assert np.max(np.abs(np.abs(block) - 1.0)) < 1e-14


def test_mode_set_mismatch_rejected():
    with pytest.raises(FieldError):
        b1(zero_field(4), zero_field(5), 0.0)
    with pytest.raises(FieldError):
        r3(zero_field(4), zero_field(4), zero_field(5), 0.0)


def test_gauge_precondition_on_vector_ops():
    p = random_pair(1, 8, 0.5, 0.5, Gauge.PHYSICAL)
    with pytest.raises(FieldError):
        b1_vec(p, 0.1)


def test_trace_records():
    records = []
    f = random_field(9, 6, 0.5, 0.7)
    with trace_evaluations(records.append):
        b1(f, f, 0.2)
        b4(f, f, f, f, 0.2)
    assert [r["op"] for r in records] == ["B1", "B4"]
    for r in records:
        assert set(r) == {"op", "n_max", "n_cut", "t", "terms", "skipped_denominators"}
    assert records[1]["skipped_denominators"] > 0
    # file-like sinks receive JSON lines
    buf = io.StringIO()
    with trace_evaluations(buf):
        b2(f, f, 0.2)
    assert json.loads(buf.getvalue())["op"] == "B2"
