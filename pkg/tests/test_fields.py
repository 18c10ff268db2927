import json

import numpy as np
import pytest

from ckdv.fields import (
    FieldError,
    Gauge,
    ModeSet,
    SpectralField,
    SpectralPair,
    energy_functional,
    field_from_json,
    field_to_json,
    gauge,
    hamiltonian,
    inner0,
    make_field,
    make_pair,
    pair_norm,
    project_high,
    project_low,
    random_field,
    random_pair,
    sobolev_norm,
    zero_field,
)


def test_make_field_conjugation_fill():
    f = make_field(4, [(1, 1 + 0j)])
    assert f.coeff(1) == 1 and f.coeff(-1) == 1
    g = make_field(4, [(2, 3j)])
    assert g.coeff(2) == 3j and g.coeff(-2) == -3j


def test_make_field_rejects_mode_zero():
    with pytest.raises(FieldError):
        make_field(4, [(0, 1)])


def test_make_field_rejects_out_of_range():
    with pytest.raises(FieldError):
        make_field(4, [(5, 1.0)])


def test_make_field_rejects_inconsistent_pair():
    with pytest.raises(FieldError):
        make_field(4, [(1, 1 + 1j), (-1, 1 + 1j)])
    # consistent explicit halves are fine
    f = make_field(4, [(1, 1 + 1j), (-1, 1 - 1j)])
    assert f.coeff(-1) == 1 - 1j


def test_mode_set_validation():
    with pytest.raises(FieldError):
        ModeSet(0)


def test_sobolev_norm_examples():
    f = make_field(4, [(1, 1.0)])
    assert sobolev_norm(f, 0) == pytest.approx(np.sqrt(2), rel=1e-14)
    g = make_field(4, [(2, 3j)])
    assert sobolev_norm(g, 1) ** 2 == pytest.approx(72.0, rel=1e-13)
    assert sobolev_norm(zero_field(4), 1.7) == 0.0
    # negative orders are allowed
    assert sobolev_norm(g, -1) ** 2 == pytest.approx(2 * 9 / 4, rel=1e-13)


def test_pair_norm_additivity():
    u = random_field(1, 16, 0.5, 1.0)
    v = random_field(2, 16, 0.5, 1.0)
    p = make_pair(u, v)
    assert pair_norm(p, 0) ** 2 == pytest.approx(
        sobolev_norm(u, 0) ** 2 + sobolev_norm(v, 0) ** 2, rel=1e-13)


def test_projections():
    f = make_field(4, [(1, 1.0), (3, 2.0)])
    low = project_low(f, 2)
    assert low.coeff(1) == 1.0 and low.coeff(3) == 0.0
    high = project_high(f, 2)
    assert high.coeff(3) == 2.0 and high.coeff(1) == 0.0
    assert project_low(make_field(4, [(1, 1.0)]), 5).coeff(1) == 1.0


def test_projection_algebra_random():
    f = random_field(7, 32, 0.5, 1.0)
    for n in (1, 5, 17, 32):
        low = project_low(f, n)
        high = project_high(f, n)
        np.testing.assert_array_equal(low.coeffs + high.coeffs, f.coeffs)
        np.testing.assert_array_equal(project_low(low, n).coeffs, low.coeffs)
        np.testing.assert_array_equal(project_high(high, n).coeffs, high.coeffs)
        assert np.all(project_low(high, n).coeffs == 0)


def test_gauge_full_period_mode():
    f = make_field(4, [(2, 0.3 + 0.4j)])
    p = make_pair(f, f, Gauge.PHYSICAL)
    g = gauge(p, np.pi, Gauge.INTERACTION)
    # k = 2 at t = pi: factor exp(8i pi) = 1
    np.testing.assert_allclose(g.u.coeffs, f.coeffs, atol=1e-14)


def test_gauge_identity_at_t0():
    p = random_pair(3, 8, 1.0, 0.5)
    g = gauge(p, 0.0, Gauge.PHYSICAL)
    np.testing.assert_array_equal(g.u.coeffs, p.u.coeffs)


def test_gauge_isometry():
    p = random_pair(5, 64, 0.5, 1.0)
    for t in (0.1, 1.0, 10.0):
        g = gauge(p, t, Gauge.PHYSICAL)
        for s in (0.0, 0.5, 1.0):
            before = sobolev_norm(p.u, s)
            after = sobolev_norm(g.u, s)
            assert abs(after - before) <= 1e-12 * before


def test_gauge_round_trip():
    p = random_pair(9, 32, 1.0, 0.5)
    back = gauge(gauge(p, 2.7, Gauge.PHYSICAL), 2.7, Gauge.INTERACTION)
    np.testing.assert_allclose(back.u.coeffs, p.u.coeffs, rtol=0, atol=1e-15)


def test_energy_examples():
    f = make_field(4, [(1, 1.0)])
    assert energy_functional(make_pair(f, f)) == pytest.approx(8.0, rel=1e-13)
    assert energy_functional(make_pair(f, zero_field(4))) == pytest.approx(6.0, rel=1e-13)


def test_energy_algebraic_identity():
    for seed in range(5):
        p = random_pair(seed, 24, 0.5, 0.8)
        expected = (3 * sobolev_norm(p.u, 0) ** 2 + 3 * sobolev_norm(p.v, 0) ** 2
                    - 2 * inner0(p.u, p.v))
        assert energy_functional(p) == pytest.approx(expected, abs=1e-13 * max(expected, 1))


def test_energy_gauge_invariant():
    p = random_pair(11, 16, 1.0, 0.5)
    g = gauge(p, 1.3, Gauge.PHYSICAL)
    assert energy_functional(g) == pytest.approx(energy_functional(p), rel=1e-13)


def test_hamiltonian_diagonal_subspace():
    f = make_field(8, [(1, 0.3), (2, 0.1j)])
    p = make_pair(f, f, Gauge.PHYSICAL)
    # U = V means A = 0, so H = (1/2) integral(B_x^2) >= 0 with B = U
    quad = float(np.sum(np.arange(-8, 9) ** 2 * np.abs(f.coeffs) ** 2))
    assert hamiltonian(p) == pytest.approx(np.pi * quad, rel=1e-13)
    assert hamiltonian(p) >= 0.0


def test_hamiltonian_zero_pair():
    p = make_pair(zero_field(4), zero_field(4), Gauge.PHYSICAL)
    assert hamiltonian(p) == 0.0


def test_hamiltonian_requires_physical():
    p = random_pair(1, 8, 1.0, 0.5)
    with pytest.raises(FieldError):
        hamiltonian(p)


def test_random_field_determinism_and_decay():
    a = random_field(42, 256, 1.0, 0.5)
    b = random_field(42, 256, 1.0, 0.5)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    c = random_field(43, 256, 1.0, 0.5)
    assert np.any(a.coeffs != c.coeffs)
    norm = sobolev_norm(a, 1.0)
    assert 0.05 <= norm <= 5.0  # within a factor 10 of the amplitude


def test_random_field_hermitian():
    f = random_field(4, 64, 0.0, 1.0)
    np.testing.assert_allclose(f.coeffs, np.conj(f.coeffs[::-1]), atol=0, rtol=0)


def test_serialization_round_trip_bit_exact():
    f = random_field(17, 32, 0.7, 0.9)
    g = field_from_json(field_to_json(f))
    np.testing.assert_array_equal(f.coeffs, g.coeffs)
    doc = json.loads(field_to_json(f))
    assert doc["n_max"] == 32
    assert all(k > 0 for k, _, _ in doc["modes"])


def test_serialization_rejects_negative_modes():
    with pytest.raises(FieldError):
        field_from_json(json.dumps({"n_max": 4, "modes": [[-1, 1.0, 0.0]]}))


def test_field_immutability():
    f = random_field(1, 8, 0.5, 1.0)
    with pytest.raises(ValueError):
        f.coeffs[3] = 1.0


def test_symmetry_classes():
    # anti-Hermitian fields are representable; mixing classes is not
    c = np.zeros(9, dtype=complex)
    c[4 + 2] = 1.0
    c[4 - 2] = -1.0
    f = SpectralField(ModeSet(4), c, "anti")
    assert f.coeff(-2) == -np.conj(f.coeff(2))
    with pytest.raises(FieldError):
        SpectralField(ModeSet(4), c)  # violates Hermitian symmetry
    h = make_field(4, [(2, 1.0)])
    with pytest.raises(FieldError):
        _ = f + h


def test_pair_requires_shared_modes():
    with pytest.raises(FieldError):
        SpectralPair(zero_field(4), zero_field(5))


def test_nonfinite_rejected():
    c = np.zeros(9, dtype=complex)
    c[0] = np.inf
    with pytest.raises(FieldError):
        SpectralField(ModeSet(4), c)
