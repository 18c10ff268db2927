"""Truncated Fourier representations of real mean-zero functions on [0, 2*pi].

A field is stored as a dense complex array over wavenumbers k = -n_max..n_max.
Mode 0 is pinned to zero (mean-zero convention) and Hermitian symmetry
``c[-k] == conj(c[k])`` is maintained, so every field represents a real
function.  The homogeneous Sobolev norm used throughout is

    ||f||_{Hs}^2 = sum_{k != 0} |k|^{2s} |c_k|^2,

so the s = 0 norm equals the L^2 norm divided by sqrt(2*pi).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "FieldError",
    "Gauge",
    "ModeSet",
    "SpectralField",
    "SpectralPair",
    "energy_functional",
    "field_from_json",
    "field_to_json",
    "gauge",
    "hamiltonian",
    "inner0",
    "make_field",
    "make_pair",
    "pair_norm",
    "project_high",
    "project_low",
    "random_field",
    "random_pair",
    "sobolev_norm",
    "zero_field",
]

TWO_PI = 2.0 * np.pi

# Relative slack allowed when validating Hermitian symmetry of computed
# fields; exact symmetry cannot survive reordered floating-point sums.  The
# absolute floor tolerates cancellation dust in outputs that vanish
# identically (e.g. operators on the diagonal subspace).
_HERMITIAN_RTOL = 1e-9
_HERMITIAN_ATOL = 1e-16


class FieldError(ValueError):
    """Invalid spectral field construction or incompatible operands."""


class Gauge(Enum):
    PHYSICAL = "physical"
    INTERACTION = "interaction"


@dataclass(frozen=True)
class ModeSet:
    """Wavenumbers k with 0 < |k| <= n_max (mode 0 is never representable)."""

    n_max: int

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise FieldError(f"n_max must be a positive integer, got {self.n_max!r}")

    @property
    def size(self) -> int:
        return 2 * self.n_max + 1

    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers -n_max..n_max (the 0 entry is a placeholder)."""
        return np.arange(-self.n_max, self.n_max + 1, dtype=np.int64)

    def index(self, k: int) -> int:
        return int(k) + self.n_max


@dataclass(frozen=True)
class SpectralField:
    """Immutable coefficient array over a ModeSet with a definite symmetry.

    ``symmetry == "hermitian"`` (the default, representing a real function)
    requires c(-k) = conj(c(k)); ``"anti"`` requires c(-k) = -conj(c(k)).
    The raw trilinear/quadrilinear operator structures carry odd weights
    (1/k1 and friends) and therefore produce anti-Hermitian output; the
    evolution-facing vector combinations restore Hermitian symmetry through
    their imaginary coefficients.
    """

    modes: ModeSet
    coeffs: np.ndarray = field(repr=False)
    symmetry: str = "hermitian"

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.modes.size,):
            raise FieldError(
                f"coefficient array has shape {c.shape}, expected ({self.modes.size},)"
            )
        if not np.all(np.isfinite(c.view(np.float64))):
            raise FieldError("non-finite coefficient")
        n = self.modes.n_max
        if c[n] != 0:
            raise FieldError("mode 0 must vanish (mean-zero convention)")
        if self.symmetry not in ("hermitian", "anti"):
            raise FieldError(f"unknown symmetry {self.symmetry!r}")
        mirror = np.conj(c[::-1])
        if self.symmetry == "anti":
            mirror = -mirror
        scale = float(np.max(np.abs(c), initial=0.0))
        atol = max(_HERMITIAN_RTOL * scale, _HERMITIAN_ATOL)
        if not np.allclose(c, mirror, rtol=0.0, atol=atol):
            raise FieldError(f"coefficients violate {self.symmetry} symmetry")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return self.modes.n_max

    def coeff(self, k: int) -> complex:
        """Coefficient of mode k (k nonzero, |k| <= n_max)."""
        k = int(k)
        if k == 0 or abs(k) > self.n_max:
            raise FieldError(f"mode {k} outside the mode set")
        return complex(self.coeffs[self.modes.index(k)])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_modes(self, other)
        if self.symmetry != other.symmetry:
            raise FieldError("cannot combine fields of different symmetry")
        return SpectralField(self.modes, self.coeffs + other.coeffs, self.symmetry)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_modes(self, other)
        if self.symmetry != other.symmetry:
            raise FieldError("cannot combine fields of different symmetry")
        return SpectralField(self.modes, self.coeffs - other.coeffs, self.symmetry)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.modes, self.coeffs * float(a), self.symmetry)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.modes, -self.coeffs, self.symmetry)


def _check_same_modes(f: SpectralField, g: SpectralField) -> None:
    if f.modes != g.modes:
        raise FieldError(f"mode sets differ: {f.modes} vs {g.modes}")


@dataclass(frozen=True)
class SpectralPair:
    """The coupled state (u, v) on a shared mode set.

    ``gauge == Gauge.INTERACTION`` means the stored coefficients are the
    slow variables u_k(t) related to the physical ones by
    U_k(t) = exp(-i k^3 t) u_k(t), anchored at time ``t_ref``.
    """

    u: SpectralField
    v: SpectralField
    gauge: Gauge = Gauge.INTERACTION
    t_ref: float = 0.0

    def __post_init__(self):
        if self.u.modes != self.v.modes:
            raise FieldError("u and v must share one mode set")

    @property
    def modes(self) -> ModeSet:
        return self.u.modes

    @property
    def n_max(self) -> int:
        return self.u.n_max


def zero_field(n_max: int) -> SpectralField:
    modes = ModeSet(n_max)
    return SpectralField(modes, np.zeros(modes.size, dtype=np.complex128))


def make_field(n_max, entries) -> SpectralField:
    """Build a field from (k, value) pairs.

    Entries with k > 0 fill the conjugate mode automatically.  If both k and
    -k are given they must agree exactly under conjugation.  k = 0 and
    |k| > n_max are rejected.
    """
    modes = ModeSet(n_max)
    c = np.zeros(modes.size, dtype=np.complex128)
    seen: dict[int, complex] = {}
    for k, value in entries:
        k = int(k)
        if k == 0:
            raise FieldError("mode 0 is not representable (mean-zero fields)")
        if abs(k) > modes.n_max:
            raise FieldError(f"mode {k} exceeds truncation n_max={modes.n_max}")
        value = complex(value)
        if k in seen and seen[k] != value:
            raise FieldError(f"conflicting values for mode {k}")
        seen[k] = value
    for k, value in seen.items():
        if -k in seen and seen[-k] != value.conjugate():
            raise FieldError(f"modes {k} and {-k} are not conjugate-symmetric")
    for k, value in seen.items():
        c[modes.index(k)] = value
        if -k not in seen:
            c[modes.index(-k)] = value.conjugate()
    return SpectralField(modes, c)


def make_pair(u: SpectralField, v: SpectralField, gauge: Gauge = Gauge.INTERACTION,
              t_ref: float = 0.0) -> SpectralPair:
    return SpectralPair(u, v, gauge, t_ref)


def sobolev_norm(f: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm of order s (s may be negative)."""
    n = f.n_max
    k = np.abs(f.modes.wavenumbers()).astype(np.float64)
    k[n] = 1.0  # placeholder; the zero slot carries no mass
    w = k ** (2.0 * float(s))
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def pair_norm(p: SpectralPair, s: float) -> float:
    """Product norm on (Hs)^2: sqrt(||u||^2 + ||v||^2)."""
    return float(np.hypot(sobolev_norm(p.u, s), sobolev_norm(p.v, s)))


def inner0(f: SpectralField, g: SpectralField) -> float:
    """H0 inner product <f, g> = sum_k f_k conj(g_k) (real for real fields)."""
    _check_same_modes(f, g)
    return float(np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


def project_low(f: SpectralField, n_cut: int) -> SpectralField:
    """Keep modes |k| <= n_cut, zero the rest (the projection P)."""
    if n_cut < 1:
        raise FieldError("n_cut must be >= 1")
    k = f.modes.wavenumbers()
    c = np.where(np.abs(k) <= n_cut, f.coeffs, 0.0)
    return SpectralField(f.modes, c, f.symmetry)


def project_high(f: SpectralField, n_cut: int) -> SpectralField:
    """Complement Q = I - P of project_low."""
    if n_cut < 1:
        raise FieldError("n_cut must be >= 1")
    k = f.modes.wavenumbers()
    c = np.where(np.abs(k) > n_cut, f.coeffs, 0.0)
    return SpectralField(f.modes, c, f.symmetry)


def cube_phase(n_max: int, t: float) -> np.ndarray:
    """Unit complex factors exp(i k^3 t) over k = -n_max..n_max.

    k^3 is exact in int64 and the product with t plus the 2*pi reduction run
    in extended precision, so the phase stays accurate at large k where the
    plain double product k^3 * t would lose several digits.
    """
    k = np.arange(-n_max, n_max + 1, dtype=np.int64)
    cubes = k * k * k
    theta = np.mod(cubes.astype(np.longdouble) * np.longdouble(t), np.longdouble(TWO_PI))
    return np.exp(1j * theta.astype(np.float64))


def gauge(p: SpectralPair, t: float | None = None, target: Gauge = Gauge.INTERACTION) -> SpectralPair:
    """Move a pair between the physical and interaction representations.

    Physical -> Interaction multiplies mode k by exp(i k^3 t); the inverse
    direction multiplies by exp(-i k^3 t).  Isometric in every Hs norm.
    """
    if t is None:
        t = p.t_ref
    t = float(t)
    if p.gauge == target:
        return SpectralPair(p.u, p.v, target, t)
    phase = cube_phase(p.n_max, t)
    if target == Gauge.PHYSICAL:
        phase = np.conj(phase)
    u = SpectralField(p.modes, p.u.coeffs * phase)
    v = SpectralField(p.modes, p.v.coeffs * phase)
    return SpectralPair(u, v, target, t)


def energy_functional(p: SpectralPair) -> float:
    """Conserved energy 2||u||^2 + 2||v||^2 + ||u - v||^2 (H0 norms).

    Gauge-independent: the gauge transform only rotates the phases of the
    coefficients entering each |.|^2.
    """
    nu = sobolev_norm(p.u, 0.0)
    nv = sobolev_norm(p.v, 0.0)
    nd = sobolev_norm(p.u - p.v, 0.0)
    return 2.0 * nu * nu + 2.0 * nv * nv + nd * nd


def hamiltonian(p: SpectralPair) -> float:
    """Hamiltonian diagnostic (symmetric model only).

    Recovers A = (U - V)/sqrt(2), B = (U + V)/2 from the physical pair and
    evaluates H = (1/2) * integral(A_x^2 + B_x^2 + A^2 B) dx spectrally; the
    cubic term is a triple convolution over k1 + k2 + k3 = 0.
    """
    if p.gauge != Gauge.PHYSICAL:
        raise FieldError("hamiltonian expects a pair in the physical gauge")
    a = (p.u.coeffs - p.v.coeffs) / np.sqrt(2.0)
    b = (p.u.coeffs + p.v.coeffs) / 2.0
    n = p.n_max
    k = p.modes.wavenumbers()
    quad = float(np.sum(k.astype(np.float64) ** 2 * (np.abs(a) ** 2 + np.abs(b) ** 2)))
    # cubic term: sum over k1 + k2 + k3 = 0 of A_{k1} A_{k2} B_{k3}
    k1 = k[:, None]
    k2 = k[None, :]
    k3 = -(k1 + k2)
    valid = (k1 != 0) & (k2 != 0) & (k3 != 0) & (np.abs(k3) <= n)
    idx3 = np.clip(k3 + n, 0, 2 * n)
    cubic = np.sum(np.where(valid, a[:, None] * a[None, :] * b[idx3], 0.0))
    return float(np.pi * (quad + np.real(cubic)))


def random_field(seed: int, n_max: int, s: float, amplitude: float) -> SpectralField:
    """Deterministic random field with |c_k| = amplitude * |k|^(-s-0.6).

    The decay keeps the Hs norm finite while the Hs+0.1 norm is borderline,
    so these fields exercise operator bounds near their sharp regime.
    """
    if amplitude <= 0:
        raise FieldError("amplitude must be positive")
    rng = np.random.default_rng(seed)
    modes = ModeSet(n_max)
    k = np.arange(1, n_max + 1, dtype=np.float64)
    mags = float(amplitude) * k ** (-float(s) - 0.6)
    phases = rng.uniform(0.0, TWO_PI, size=n_max)
    pos = mags * np.exp(1j * phases)
    c = np.zeros(modes.size, dtype=np.complex128)
    c[n_max + 1:] = pos
    c[:n_max] = np.conj(pos[::-1])
    return SpectralField(modes, c)


def random_pair(seed: int, n_max: int, s: float, amplitude: float,
                gauge_tag: Gauge = Gauge.INTERACTION, t_ref: float = 0.0) -> SpectralPair:
    """Pair of independent random fields from one seed (u uses seed, v seed+1)."""
    return SpectralPair(
        random_field(seed, n_max, s, amplitude),
        random_field(seed + 1, n_max, s, amplitude),
        gauge_tag,
        t_ref,
    )


def field_to_json(f: SpectralField) -> str:
    """Serialize as {"n_max": int, "modes": [[k, re, im], ...]} for k > 0 only."""
    rows = []
    for k in range(1, f.n_max + 1):
        c = f.coeffs[f.modes.index(k)]
        if c != 0:
            rows.append([k, c.real, c.imag])
    return json.dumps({"n_max": f.n_max, "modes": rows})


def field_from_json(text: str) -> SpectralField:
    """Inverse of field_to_json; negative modes restored by conjugation."""
    doc = json.loads(text)
    entries = [(int(k), complex(re, im)) for k, re, im in doc["modes"]]
    for k, _ in entries:
        if k <= 0:
            raise FieldError("serialized fields list k > 0 modes only")
    return make_field(int(doc["n_max"]), entries)
