"""Expansions over an exponent lattice and the coefficient recursion.

An Expansion couples a lattice with one spectral coefficient per entry
(zero fields allowed), representing sum_n xi_n psi_{lambda_n}(t).  Given a
force expansion, the solution coefficients are produced entry by entry:

    xi_1 = A^-1 phi_1
    xi_n = A^-1 ( phi_n - chi_n - sum_{wedge(i,j) = n} d B(xi_i, xi_j) )

where chi_n collects c_{p,k} xi_p over all vee routes (p, k) landing on
entry n.  Wedge and vee route sets come from lattice provenance; the
residual checker below re-derives them by direct scan so the two paths
stay independently testable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .lattice import ExponentLattice
from .spectral import (
    GevreyIndex,
    SpectralField,
    apply_inverse_stokes,
    apply_multiplier,
    bilinear_form,
)
from .systems import Exponent

__all__ = [
    "Expansion",
    "ExpansionError",
    "normalize_force",
    "compute_coefficients",
    "compute_coefficients_discrete",
    "evaluate_expansion",
    "recursion_residual",
]

MAX_VEE_ROUTES = 10 ** 4


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class Expansion:
    """Ordered coefficients (one per lattice entry, leading segment)."""

    lattice: ExponentLattice
    fields: tuple[SpectralField, ...]
    gevrey: GevreyIndex

    def __post_init__(self):
        if len(self.fields) > len(self.lattice):
            raise ExpansionError("more coefficients than lattice entries")
        cuts = {f.cutoff for f in self.fields}
        if len(cuts) > 1:
            raise ExpansionError(f"coefficients carry mixed cutoffs {sorted(cuts)}")

    def __len__(self) -> int:
        return len(self.fields)

    @property
    def cutoff(self) -> int:
        if not self.fields:
            raise ExpansionError("empty expansion has no cutoff")
        return self.fields[0].cutoff

    def field(self, n: int) -> SpectralField:
        return self.fields[n - 1]

    def exponent(self, n: int) -> Exponent:
        return self.lattice.exponent(n)

    def terms(self):
        for n, f in enumerate(self.fields, 1):
            yield n, self.lattice.exponent(n), f

    def scaled(self, c: float) -> "Expansion":
        return Expansion(self.lattice, tuple(c * f for f in self.fields), self.gevrey)

    def to_json(self) -> dict:
        return {
            "gevrey": [self.gevrey.alpha, self.gevrey.sigma],
            "terms": [{"n": n, "lambda": lam.value, "field": f.to_json()}
                      for n, lam, f in self.terms()],
        }


def normalize_force(raw: Sequence[tuple], lat: ExponentLattice,
                    gevrey: GevreyIndex = GevreyIndex(0.5, 0.0)) -> Expansion:
    """Re-index raw force terms onto the lattice, zero-padding the gaps.

    Every raw exponent must already be a lattice entry (generators are
    supposed to be included at closure time); the result covers the full
    lattice so downstream recursions can run to any depth.
    """
    if gevrey.alpha < 0.5:
        raise ExpansionError("force expansions need Gevrey order alpha >= 1/2")
    placed: dict[int, SpectralField] = {}
    cutoff = None
    for exp, field in raw:
        exp = lat.system.exponent(exp)
        n = lat.index_of(exp)
        if n is None:
            raise ExpansionError(
                f"force exponent {exp.value:g} is not a lattice entry; "
                "include it among the closure generators")
        if n in placed:
            raise ExpansionError(f"duplicate force term at lattice entry {n}")
        placed[n] = field
        cutoff = field.cutoff
    if cutoff is None:
        raise ExpansionError("force must contain at least one term")
    zero = SpectralField.zero(cutoff)
    fields = tuple(placed.get(n, zero) for n in range(1, len(lat) + 1))
    return Expansion(lat, fields, gevrey)


def _vee_coeff(lat: ExponentLattice, p: int, k: int) -> float:
    terms = lat.system.vee(lat.exponent(p), lat.cutoff)
    return terms[k - 1].coeff


def _wedge_d(lat: ExponentLattice, i: int, j: int) -> float:
    return lat.system.wedge(lat.exponent(i), lat.exponent(j)).d


def _recursion(force: Expansion, N: int) -> Expansion:
    lat = force.lattice
    if N > len(force):
        raise ExpansionError(f"requested {N} coefficients but the force has {len(force)} entries")
    out: list[SpectralField] = []
    for n in range(1, N + 1):
        acc = force.field(n)
        routes = lat.vee_sources(n)
        if len(routes) > MAX_VEE_ROUTES:
            raise ExpansionError(
                f"{len(routes)} vee routes land on entry {n}; system too exotic")
        for (p, k) in routes:
            if p <= n - 1:
                acc = acc - _vee_coeff(lat, p, k) * out[p - 1]
        for (i, j) in lat.wedge_pairs(n):
            if i <= n - 1 and j <= n - 1:
                acc = acc - _wedge_d(lat, i, j) * bilinear_form(out[i - 1], out[j - 1])
        out.append(apply_inverse_stokes(acc))
    g = force.gevrey
    return Expansion(lat, tuple(out), GevreyIndex(g.alpha + 1.0, g.sigma))


def compute_coefficients(force: Expansion, N: Optional[int] = None) -> Expansion:
    """Solution coefficients for a force expansion over a continuum system."""
    if force.gevrey.alpha < 0.5:
        raise ExpansionError("the recursion requires Gevrey order alpha >= 1/2")
    return _recursion(force, len(force) if N is None else N)


def compute_coefficients_discrete(force: Expansion, N: Optional[int] = None) -> Expansion:
    """Same recursion keyed by exact exponent pairs (background-system case).

    Wedge matches are index-level (pairs adding to the entry's pair) and the
    vee weights aggregate every finite route between pairs; both are already
    encoded in the provenance of a pair-indexed lattice, which is required
    here.
    """
    lat = force.lattice
    if not lat.system.discrete:
        raise ExpansionError("discrete recursion requires a discrete (background) system")
    if any(e.exponent.pair is None for e in lat.entries):
        raise ExpansionError("discrete recursion requires pair metadata on every entry")
    if force.gevrey.alpha < 0.5:
        raise ExpansionError("the recursion requires Gevrey order alpha >= 1/2")
    return _recursion(force, len(force) if N is None else N)


def evaluate_expansion(exp: Expansion, t: float, upto: Optional[int] = None) -> SpectralField:
    """Partial sum sum_{n <= upto} xi_n psi_{lambda_n}(t)."""
    sys = exp.lattice.system
    sys.check_domain(t)
    upto = len(exp) if upto is None else upto
    if upto > len(exp):
        raise ExpansionError(f"expansion has {len(exp)} terms, requested {upto}")
    acc = SpectralField.zero(exp.cutoff)
    for n in range(1, upto + 1):
        acc = acc + sys.eval(exp.exponent(n), t) * exp.field(n)
    return acc


def recursion_residual(coeffs: Expansion, force: Expansion, n: int) -> float:
    """Relative defect of A xi_n + chi_n + sum d B(xi_i, xi_j) = phi_n.

    The chi and wedge sums are rebuilt by direct scan over the lattice
    (independent of the provenance tags used to compute the coefficients),
    so this doubles as a bookkeeping cross-check.
    """
    lat = coeffs.lattice
    sys = lat.system
    target = lat.exponent(n)
    lhs = apply_multiplier(coeffs.field(n), "A_alpha", 1.0)
    scale = lhs.l2()
    for p in range(1, n):
        src = lat.exponent(p)
        if src.value >= lat.cutoff:
            continue
        for term in sys.vee(src, lat.cutoff):
            if _matches(sys, term.exponent, target):
                piece = term.coeff * coeffs.field(p)
                scale = max(scale, piece.l2())
                lhs = lhs + piece
    for i in range(1, n):
        for j in range(1, n):
            w = sys.wedge(lat.exponent(i), lat.exponent(j))
            if _matches(sys, w.gamma, target):
                piece = w.d * bilinear_form(coeffs.field(i), coeffs.field(j))
                scale = max(scale, piece.l2())
                lhs = lhs + piece
    phi = force.field(n)
    # relative to the largest constituent, so exact cancellations score ~0
    scale = max(scale, phi.l2(), 1e-300)
    return (lhs - phi).l2() / scale


def _matches(sys, a: Exponent, b: Exponent) -> bool:
    if sys.discrete:
        return a.pair == b.pair
    return abs(a.value - b.value) <= 1e-9
