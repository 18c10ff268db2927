"""Symbolic term lists for the differentiation-by-parts reformulations.

The coupled system's reformulations replace the convective nonlinearity with
sums of multilinear operators whose exact term lists (dozens of signed terms
with low/high-mode filters) are error-prone to transcribe by hand.  This
module generates them mechanically from two product rules:

* ``dbp_bilinear``  : a B1-type term equals d/dt of the matching B2-type term
  minus trilinear remainder terms obtained by substituting the evolution
  equation into each factor.
* ``dbp_trilinear`` : a non-resonant trilinear term equals d/dt of a B3-type
  term minus quadrilinear remainder terms, likewise.

Terms are evaluated against the Galerkin-truncated evolution on the ambient
mode set (cutoff n_max), so a differentiated factor's children carry a band
constraint on their index sum: the factor's own low/high tag intersected
with the ambient cutoff.  With these bands the generated identities hold
exactly (to rounding) along integrated Galerkin trajectories.

Weight families, in the canonical slot order used here (slot 0 always holds
the smoothing index k1):

    B1  : (i/2) (k1+k2) * e^{3i(k1+k2)k1k2 t}
    B2  : 1/(6 k1 k2)   * e^{3i(k1+k2)k1k2 t}
    R3  : 1/k1          * e^{3i(k1+k2)(k2+k3)(k1+k3) t}
    B3  : 1/(k1(k1+k2)(k2+k3)(k1+k3)) * same phase, non-resonant triples
    B41 : 1/((k1+k2)(k1+k3+k4)(k2+k3+k4))            * e^{i Phi4 t}
    B42 : (k3+k4)/(k1(k1+k2)(k1+k3+k4)(k2+k3+k4))    * e^{i Phi4 t}

with Phi4 = (k1+k2+k3+k4)^3 - k1^3 - k2^3 - k3^3 - k4^3.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "FormTerms",
    "SumConstraint",
    "Term",
    "VectorTerms",
    "b1_low_terms",
    "b1_high_terms",
    "b1_vec_terms",
    "b2q_literal_terms",
    "dbp_bilinear",
    "dbp_trilinear",
    "form_terms",
    "merge_terms",
    "modified_first_parts",
    "modified_second_parts",
    "split_nres01",
    "split_resonance",
]

ARITY = {"B1": 2, "B2": 2, "R3": 3, "B3": 3, "B41": 4, "B42": 4}

# evolution of each field in the gauged frame: d/dt u ~ (i/2) k * sum of
# (child_a * child_b) with these signs (phases handled by the expander)
_CHILDREN = {
    "u": ((("u", "v"), 1.0), (("u", "u"), -1.0)),
    "v": ((("u", "v"), 1.0), (("v", "v"), -1.0)),
}


@dataclass(frozen=True)
class SumConstraint:
    """Require lo < |sum of the indices in slots| <= hi (None bound = skip)."""

    slots: tuple[int, ...]
    lo: int | None = None
    hi: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(sorted(self.slots)))

    def is_trivial(self, n_max: int) -> bool:
        reach = len(self.slots) * n_max
        lo_triv = self.lo is None or (self.lo <= 0 and len(self.slots) == 1)
        hi_triv = self.hi is None or self.hi >= reach
        return lo_triv and hi_triv


@dataclass(frozen=True)
class Term:
    """One multilinear summand: coeff * sum over index tuples of
    phase * weight(kind) * product of argument coefficients, restricted by
    the constraints and the resonance flag."""

    coeff: complex
    kind: str
    args: tuple[str, ...]
    constraints: tuple[SumConstraint, ...] = ()
    resonance: str = "all"  # "all" | "res" | "nres" (trilinear kinds only)

    def __post_init__(self):
        if self.kind not in ARITY:
            raise ValueError(f"unknown kind {self.kind!r}")
        if len(self.args) != ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {ARITY[self.kind]} args")

    @property
    def arity(self) -> int:
        return ARITY[self.kind]


# a vector operator is a pair of term tuples, one per component
VectorTerms = tuple[tuple[Term, ...], tuple[Term, ...]]


def _slot_constraint(slot: int, tag: str, n_cut: int) -> tuple[SumConstraint, ...]:
    if tag == "low":
        return (SumConstraint((slot,), hi=n_cut),)
    if tag == "high":
        return (SumConstraint((slot,), lo=n_cut),)
    if tag == "all":
        return ()
    raise ValueError(f"unknown tag {tag!r}")


def _merged_band(term: Term, slot: int) -> tuple[int | None, int | None]:
    """Intersection of all single-slot constraints on `slot` as (lo, hi)."""
    lo: int | None = None
    hi: int | None = None
    for c in term.constraints:
        if c.slots == (slot,):
            if c.lo is not None:
                lo = c.lo if lo is None else max(lo, c.lo)
            if c.hi is not None:
                hi = c.hi if hi is None else min(hi, c.hi)
    return lo, hi


def _remap(constraints, images: dict[int, tuple[int, ...]]) -> tuple[SumConstraint, ...]:
    out = []
    for c in constraints:
        slots: list[int] = []
        for s in c.slots:
            slots.extend(images[s])
        out.append(SumConstraint(tuple(slots), lo=c.lo, hi=c.hi))
    return tuple(out)


def b1_vec_terms() -> VectorTerms:
    """RHS of the gauged system: (B1(u,v)-B1(u,u), B1(u,v)-B1(v,v))."""
    comp_u = (Term(1.0, "B1", ("u", "v")), Term(-1.0, "B1", ("u", "u")))
    comp_v = (Term(1.0, "B1", ("u", "v")), Term(-1.0, "B1", ("v", "v")))
    return comp_u, comp_v


def b1_low_terms(n_cut: int) -> VectorTerms:
    """Low-mode block: B1 acting on projected arguments only."""
    p0 = SumConstraint((0,), hi=n_cut)
    p1 = SumConstraint((1,), hi=n_cut)
    comp_u = (
        Term(1.0, "B1", ("u", "v"), (p0, p1)),
        Term(-1.0, "B1", ("u", "u"), (p0, p1)),
    )
    comp_v = (
        Term(1.0, "B1", ("u", "v"), (p0, p1)),
        Term(-1.0, "B1", ("v", "v"), (p0, p1)),
    )
    return comp_u, comp_v


def _split_bilinear(op: str, a: str, b: str, n_cut: int, sign: float) -> tuple[Term, ...]:
    """sign * [op(Pa, Qb) + op(Qa, b)] for op in {B1, B2}."""
    return (
        Term(sign, op, (a, b), (SumConstraint((0,), hi=n_cut), SumConstraint((1,), lo=n_cut))),
        Term(sign, op, (a, b), (SumConstraint((0,), lo=n_cut),)),
    )


def b1_high_terms(n_cut: int) -> VectorTerms:
    """Complement block: b1_vec minus the low-mode block, as in the splitting
    B1(u,v) = B1(Pu,Pv) + [B1(Pu,Qv) + B1(Qu,v)]."""
    comp_u = (
        _split_bilinear("B1", "u", "v", n_cut, 1.0)
        + _split_bilinear("B1", "u", "u", n_cut, -1.0)
    )
    comp_v = (
        _split_bilinear("B1", "u", "v", n_cut, 1.0)
        + _split_bilinear("B1", "v", "v", n_cut, -1.0)
    )
    return comp_u, comp_v


def b2q_literal_terms(n_cut: int) -> VectorTerms:
    """The high-mode B2 combination written out literally (cross-check for
    the generated version)."""
    comp_u = (
        _split_bilinear("B2", "u", "v", n_cut, 1.0)
        + _split_bilinear("B2", "u", "u", n_cut, -1.0)
    )
    comp_v = (
        _split_bilinear("B2", "u", "v", n_cut, 1.0)
        + _split_bilinear("B2", "v", "v", n_cut, -1.0)
    )
    return comp_u, comp_v


def dbp_bilinear(terms: tuple[Term, ...], n_max: int) -> tuple[tuple[Term, ...], tuple[Term, ...]]:
    """First differentiation by parts.

    For each B1-type term returns the matching B2-type term (same coefficient
    and filters) and the trilinear remainder terms, so that

        sum(B1 terms) = d/dt sum(B2 terms) - sum(R3 remainder terms)

    holds along the ambient-truncated evolution.  The returned remainder
    terms are negated already: B1 = d/dt B2 + remainder.
    """
    b2_terms = []
    r3_terms = []
    for t in terms:
        if t.kind != "B1":
            raise ValueError("dbp_bilinear expects B1-type terms")
        b2_terms.append(Term(t.coeff, "B2", t.args, t.constraints))
        for slot in (0, 1):
            other = 1 - slot
            lo, hi = _merged_band(t, slot)
            child_band = SumConstraint((1, 2), lo=0 if lo is None else lo,
                                       hi=n_max if hi is None else hi)
            kept = tuple(c for c in t.constraints if c.slots != (slot,))
            kept = _remap(kept, {slot: (1, 2), other: (0,)})
            for (ca, cb), sign in _CHILDREN[t.args[slot]]:
                coeff = -t.coeff * 1j * sign / 12.0
                r3_terms.append(Term(coeff, "R3", (t.args[other], ca, cb),
                                     kept + (child_band,)))
    return tuple(b2_terms), tuple(r3_terms)


def split_resonance(terms: tuple[Term, ...]) -> tuple[tuple[Term, ...], tuple[Term, ...]]:
    """Split trilinear terms by the resonance condition
    (k1+k2)(k2+k3)(k1+k3) = 0; phases vanish identically on the resonant part."""
    res = []
    nres = []
    for t in terms:
        if t.arity != 3 or t.resonance != "all":
            raise ValueError("split_resonance expects unsplit trilinear terms")
        res.append(Term(t.coeff, t.kind, t.args, t.constraints, "res"))
        nres.append(Term(t.coeff, t.kind, t.args, t.constraints, "nres"))
    return tuple(res), tuple(nres)


def split_nres01(terms: tuple[Term, ...], n_cut: int) -> tuple[tuple[Term, ...], tuple[Term, ...]]:
    """Split non-resonant trilinear terms into the part with high-mode
    trailing factors (both slots 1 and 2 above n_cut; one smoothed factor)
    and the rest (at least one projected trailing factor; two smoothed
    factors)."""
    nres0 = []
    nres1 = []
    for t in terms:
        if t.resonance != "nres":
            raise ValueError("split_nres01 expects non-resonant terms")
        q1 = SumConstraint((1,), lo=n_cut)
        q2 = SumConstraint((2,), lo=n_cut)
        p1 = SumConstraint((1,), hi=n_cut)
        p2 = SumConstraint((2,), hi=n_cut)
        nres0.append(Term(t.coeff, t.kind, t.args, t.constraints + (q1, q2), "nres"))
        nres1.append(Term(t.coeff, t.kind, t.args, t.constraints + (p1,), "nres"))
        nres1.append(Term(t.coeff, t.kind, t.args, t.constraints + (q1, p2), "nres"))
    return tuple(nres0), tuple(nres1)


def dbp_trilinear(terms: tuple[Term, ...], n_max: int) -> tuple[tuple[Term, ...], tuple[Term, ...]]:
    """Second differentiation by parts, applied to non-resonant trilinear
    terms:

        sum(R3-type terms) = d/dt sum(B3 terms) + sum(B4 remainder terms).

    Differentiating slot 0 produces B41-type terms (the smoothing 1/k1
    cancels); slots 1 and 2 produce B42-type terms carrying the child-sum
    numerator.
    """
    b3_terms = []
    b4_terms = []
    slot_images = {
        0: ({0: (2, 3), 1: (0,), 2: (1,)}, "B41", (1, 2)),
        1: ({0: (0,), 1: (2, 3), 2: (1,)}, "B42", (0, 2)),
        2: ({0: (0,), 1: (1,), 2: (2, 3)}, "B42", (0, 1)),
    }
    for t in terms:
        if t.kind != "R3" or t.resonance != "nres":
            raise ValueError("dbp_trilinear expects non-resonant R3-type terms")
        b3_terms.append(Term(t.coeff * (-1j / 3.0), "B3", t.args, t.constraints, "nres"))
        for slot, (images, kind, survivors) in slot_images.items():
            lo, hi = _merged_band(t, slot)
            child_band = SumConstraint((2, 3), lo=0 if lo is None else lo,
                                       hi=n_max if hi is None else hi)
            kept = tuple(c for c in t.constraints if c.slots != (slot,))
            kept = _remap(kept, images)
            new_args_head = tuple(t.args[j] for j in survivors)
            for (ca, cb), sign in _CHILDREN[t.args[slot]]:
                coeff = -t.coeff * sign / 6.0
                b4_terms.append(Term(coeff, kind, new_args_head + (ca, cb),
                                     kept + (child_band,), "nres"))
    return tuple(b3_terms), tuple(b4_terms)


def _canonical(term: Term, n_max: int) -> Term:
    """Drop trivial constraints, merge duplicate bands, and sort symmetric
    argument slots so structurally equal terms compare equal."""
    merged: dict[tuple[int, ...], list] = {}
    for c in term.constraints:
        if c.is_trivial(n_max):
            continue
        lo, hi = merged.get(c.slots, [None, None])
        if c.lo is not None:
            lo = c.lo if lo is None else max(lo, c.lo)
        if c.hi is not None:
            hi = c.hi if hi is None else min(hi, c.hi)
        merged[c.slots] = [lo, hi]
    constraints = tuple(
        SumConstraint(slots, lo, hi) for slots, (lo, hi) in sorted(merged.items())
    )
    # slot groups whose weight/phase are swap-invariant per kind
    sym_groups = {"B1": ((0, 1),), "B2": ((0, 1),), "R3": ((1, 2),),
                  "B3": ((1, 2),), "B41": ((0, 1), (2, 3)), "B42": ((2, 3),)}
    args = list(term.args)
    for group in sym_groups[term.kind]:
        group_set = set(group)
        # only safe to reorder args when every constraint treats the group
        # as a block (contains all of it or none of it)
        if all(len(set(c.slots) & group_set) in (0, len(group_set)) for c in constraints):
            names = sorted(args[s] for s in group)
            for s, name in zip(group, names):
                args[s] = name
    return Term(term.coeff, term.kind, tuple(args), constraints, term.resonance)


def merge_terms(terms: tuple[Term, ...], n_max: int) -> tuple[Term, ...]:
    """Combine structurally identical terms (after canonicalization) by
    summing coefficients; drop exact zeros."""
    acc: dict[tuple, complex] = {}
    order: list[tuple] = []
    for t in terms:
        t = _canonical(t, n_max)
        key = (t.kind, t.args, t.constraints, t.resonance)
        if key not in acc:
            acc[key] = 0.0
            order.append(key)
        acc[key] += t.coeff
    out = []
    for key in order:
        coeff = acc[key]
        if coeff != 0:
            kind, args, constraints, resonance = key
            out.append(Term(coeff, kind, args, constraints, resonance))
    return tuple(out)


@lru_cache(maxsize=64)
def modified_first_parts(n_cut: int, n_max: int):
    """Generated pieces of the modified first form at split cutoff n_cut:
    (B1P, B2Q, R3Q) as per-component term tuples."""
    b1p = b1_low_terms(n_cut)
    b2q = []
    r3q = []
    for comp in b1_high_terms(n_cut):
        b2_terms, r3_terms = dbp_bilinear(comp, n_max)
        b2q.append(b2_terms)
        r3q.append(r3_terms)
    return b1p, (b2q[0], b2q[1]), (r3q[0], r3q[1])


@lru_cache(maxsize=64)
def modified_second_parts(n_cut: int, n_max: int):
    """Generated pieces of the modified second form:
    (B1P, B2Q, R3Qres, R3Qnres0, R3Qnres1, B30, B40)."""
    b1p, b2q, r3q = modified_first_parts(n_cut, n_max)
    res, nres0, nres1, b30, b40 = [], [], [], [], []
    for comp in r3q:
        r, n = split_resonance(comp)
        n0, n1 = split_nres01(n, n_cut)
        b3t, b4t = dbp_trilinear(n0, n_max)
        res.append(r)
        nres0.append(n0)
        nres1.append(n1)
        b30.append(merge_terms(b3t, n_max))
        b40.append(merge_terms(b4t, n_max))
    return (b1p, b2q, tuple(res), tuple(nres0), tuple(nres1),
            (b30[0], b30[1]), (b40[0], b40[1]))


@dataclass(frozen=True)
class FormTerms:
    """One reformulation: d/dt [state + bracket(state)] = rhs(state)."""

    name: str
    bracket: VectorTerms
    rhs: VectorTerms


def _negate(terms: tuple[Term, ...]) -> tuple[Term, ...]:
    return tuple(Term(-t.coeff, t.kind, t.args, t.constraints, t.resonance) for t in terms)


@lru_cache(maxsize=64)
def form_terms(form: str, n_max: int, n_cut: int | None = None) -> FormTerms:
    """Term lists for one of the four reformulations.

    form in {"first", "second", "modified_first", "modified_second"};
    n_cut is the high/low split cutoff, required for the modified forms.
    The bracket lists are signed so that bracket(state) is *added* to the
    state.
    """
    if form in ("modified_first", "modified_second") and n_cut is None:
        raise ValueError(f"form {form!r} requires n_cut")
    if form == "first":
        bracket, rhs = [], []
        for comp in b1_vec_terms():
            b2t, r3t = dbp_bilinear(comp, n_max)
            bracket.append(_negate(b2t))
            rhs.append(merge_terms(r3t, n_max))
        return FormTerms(form, (bracket[0], bracket[1]), (rhs[0], rhs[1]))
    if form == "second":
        bracket, rhs = [], []
        for comp in b1_vec_terms():
            b2t, r3t = dbp_bilinear(comp, n_max)
            res, nres = split_resonance(merge_terms(r3t, n_max))
            b3t, b4t = dbp_trilinear(nres, n_max)
            bracket.append(_negate(b2t) + _negate(merge_terms(b3t, n_max)))
            rhs.append(res + merge_terms(b4t, n_max))
        return FormTerms(form, (bracket[0], bracket[1]), (rhs[0], rhs[1]))
    if form == "modified_first":
        b1p, b2q, r3q = modified_first_parts(n_cut, n_max)
        bracket = tuple(_negate(c) for c in b2q)
        rhs = tuple(b1p[i] + merge_terms(r3q[i], n_max) for i in range(2))
        return FormTerms(form, bracket, rhs)
    if form == "modified_second":
        b1p, b2q, res, _n0, nres1, b30, b40 = modified_second_parts(n_cut, n_max)
        bracket = tuple(_negate(b2q[i]) + _negate(b30[i]) for i in range(2))
        rhs = tuple(b1p[i] + merge_terms(res[i] + nres1[i], n_max) + b40[i]
                    for i in range(2))
        return FormTerms(form, bracket, rhs)
    raise ValueError(f"unknown form {form!r}")
