"""Closure of a set of decay exponents under the wedge and vee operations.

Starting from the force exponents, alternately adjoin every vee image and
every pairwise wedge, keeping only exponents up to a cutoff; the fixed
point is the sorted index set that a solution expansion lives on.  Each
entry records its provenance (generator, wedge of two earlier entries, or
k-th vee image of an earlier entry) so the recursion engine can enumerate
exactly the interactions landing on a given entry without re-searching.

Non-product systems deduplicate by value with a 1e-9 absolute tolerance;
product systems compare exact rational pairs, for which true collisions
cannot occur when the mixing weight is irrational.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .systems import DecaySystem, Exponent, ProductSystem

__all__ = [
    "LatticeEntry",
    "ExponentLattice",
    "ClosureError",
    "closure",
    "decompose_product_exponent",
    "enumerate_pair_components",
]

VALUE_TOL = 1e-9
MAX_ENTRIES = 10 ** 6


class ClosureError(ValueError):
    """Invalid closure request or runaway (non-terminating) closure."""


@dataclass(frozen=True)
class LatticeEntry:
    exponent: Exponent
    origins: tuple[tuple, ...]  # ("generator",) | ("wedge", i, j) | ("vee", p, k)

    @property
    def value(self) -> float:
        return self.exponent.value

    def is_generator(self) -> bool:
        return ("generator",) in self.origins


@dataclass(frozen=True)
class ExponentLattice:
    system: DecaySystem
    cutoff: float
    entries: tuple[LatticeEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def values(self) -> list[float]:
        return [e.value for e in self.entries]

    def exponent(self, n: int) -> Exponent:
        """Exponent of the 1-based entry n."""
        return self.entries[n - 1].exponent

    def index_of(self, exponent) -> Optional[int]:
        """1-based position of an exponent, or None.

        Matches by exact pair for pair-carrying exponents, by value within
        1e-9 otherwise; never by floating comparison of pair-indexed entries.
        """
        if isinstance(exponent, Exponent) and exponent.pair is not None:
            for n, e in enumerate(self.entries, 1):
                if e.exponent.pair == exponent.pair:
                    return n
            return None
        value = exponent.value if isinstance(exponent, Exponent) else float(exponent)
        vals = self.values()
        i = bisect_left(vals, value - VALUE_TOL)
        if i < len(vals) and abs(vals[i] - value) <= VALUE_TOL:
            return i + 1
        return None

    def wedge_pairs(self, n: int) -> list[tuple[int, int]]:
        """Ordered index pairs (i, j) with lambda_i wedge lambda_j = lambda_n."""
        return [(i, j) for tag, *rest in self.entries[n - 1].origins
                if tag == "wedge" for i, j in [rest]]

    def vee_sources(self, n: int) -> list[tuple[int, int]]:
        """Pairs (p, k): entry n is the k-th vee image of entry p."""
        return [(p, k) for tag, *rest in self.entries[n - 1].origins
                if tag == "vee" for p, k in [rest]]

    def to_json(self) -> dict:
        entries = []
        for n, e in enumerate(self.entries, 1):
            rec = {"n": n, "value": e.value,
                   "origins": [list(o) for o in e.origins]}
            if e.exponent.pair is not None:
                a, b = e.exponent.pair
                rec["pair"] = [[a.numerator, a.denominator], [b.numerator, b.denominator]]
            entries.append(rec)
        return {"cutoff": self.cutoff, "system": self.system.to_json(), "entries": entries}


class _WorkingSet:
    """Sorted collection of exponents with system-appropriate deduplication."""

    def __init__(self, by_pair: bool):
        self.by_pair = by_pair
        self.values: list[float] = []
        self.items: list[Exponent] = []
        self.pairs: set = set()

    def add(self, exp: Exponent) -> bool:
        if self.by_pair:
            if exp.pair in self.pairs:
                return False
            self.pairs.add(exp.pair)
        else:
            i = bisect_left(self.values, exp.value - VALUE_TOL)
            if i < len(self.values) and abs(self.values[i] - exp.value) <= VALUE_TOL:
                return False
        j = bisect_left(self.values, exp.value)
        self.values.insert(j, exp.value)
        self.items.insert(j, exp)
        return True


def closure(sys: DecaySystem, generators: Sequence, cutoff: float) -> ExponentLattice:
    """Smallest exponent set containing the generators, closed under wedge
    and vee below the cutoff, sorted increasingly.

    Alternates vee passes and wedge passes until a full sweep adds nothing.
    Termination for well-posed systems follows from the minimum spacing of
    reachable exponents; a runaway count (> 10^6) raises ClosureError.
    """
    gens = [sys.exponent(g) for g in generators]
    if not gens:
        raise ClosureError("closure requires at least one generator")
    if cutoff < min(g.value for g in gens):
        raise ClosureError(f"cutoff {cutoff:g} is below the smallest generator")
    if any(g.value > cutoff + VALUE_TOL for g in gens):
        raise ClosureError("every generator must lie within the cutoff")

    work = _WorkingSet(by_pair=sys.discrete)
    for g in gens:
        work.add(g)

    changed = True
    while changed:
        changed = False
        # vee pass
        for exp in list(work.items):
            if exp.value >= cutoff:
                continue
            for term in sys.vee(exp, cutoff):
                changed |= work.add(term.exponent)
        # wedge pass
        snapshot = list(work.items)
        for i, a in enumerate(snapshot):
            for b in snapshot[i:]:
                if a.value + b.value > cutoff + VALUE_TOL:
                    break  # snapshot is sorted; later b only grow
                gamma = sys.wedge(a, b).gamma
                if gamma.value <= cutoff + VALUE_TOL:
                    changed |= work.add(gamma)
        if len(work.items) > MAX_ENTRIES:
            raise ClosureError(
                f"closure exceeded {MAX_ENTRIES} entries below cutoff {cutoff:g}; "
                "the exponent set appears to accumulate")

    exponents = list(work.items)
    gen_keys = {_key(sys, g) for g in gens}
    entries = []
    for n, exp in enumerate(exponents, 1):
        origins: list[tuple] = []
        if _key(sys, exp) in gen_keys:
            origins.append(("generator",))
        for i, a in enumerate(exponents[: n - 1], 1):
            for j, b in enumerate(exponents[: n - 1], 1):
                if abs(a.value + b.value - exp.value) > 0.5:  # cheap reject
                    continue
                if _same(sys, sys.wedge(a, b).gamma, exp):
                    origins.append(("wedge", i, j))
        for p, src in enumerate(exponents[: n - 1], 1):
            if src.value >= cutoff:
                continue
            for k, term in enumerate(sys.vee(src, cutoff), 1):
                if _same(sys, term.exponent, exp):
                    origins.append(("vee", p, k))
        entries.append(LatticeEntry(exp, tuple(origins)))
    return ExponentLattice(sys, float(cutoff), tuple(entries))


def _key(sys: DecaySystem, exp: Exponent):
    return exp.pair if sys.discrete else round(exp.value / VALUE_TOL)


def _same(sys: DecaySystem, a: Exponent, b: Exponent) -> bool:
    if sys.discrete:
        return a.pair == b.pair
    return abs(a.value - b.value) <= VALUE_TOL


# ---------------------------------------------------------------------------
# product-exponent decomposition
# ---------------------------------------------------------------------------

def enumerate_pair_components(generators: Sequence[Fraction], bound: Fraction) -> list[Fraction]:
    """All values (sum of >= 1 generators) + nonnegative integer <= bound.

    This is one factor of the candidate grid E1 x E2 on which product
    exponents decompose.
    """
    gens = sorted(Fraction(g) for g in generators)
    if not gens or gens[0] <= 0:
        raise ValueError("pair component generators must be positive")
    bound = Fraction(bound)
    sums = set()
    frontier = [Fraction(0)]
    while frontier:
        nxt = []
        for base in frontier:
            for g in gens:
                s = base + g
                if s <= bound and s not in sums:
                    sums.add(s)
                    nxt.append(s)
        frontier = nxt
    out = set()
    for s in sums:
        k = Fraction(0)
        while s + k <= bound:
            out.add(s + k)
            k += 1
    return sorted(out)


def decompose_product_exponent(sys: ProductSystem, mu: float,
                               alpha_gens: Sequence, beta_gens: Sequence) -> Exponent:
    """Recover the unique pair (a, b) with mu = g a + (1-g) b on the
    candidate grid generated by the given pair components.

    An exhaustive scan is used; zero matches means mu is off the grid, two
    or more matches means the mixing weight resolves rationals too poorly
    to separate pairs (both are errors).
    """
    if not isinstance(sys, ProductSystem):
        raise TypeError("pair decomposition only applies to product systems")
    g = sys.gamma
    mu = float(mu)
    bound_a = Fraction(int(mu / g) + 2)
    bound_b = Fraction(int(mu / (1.0 - g)) + 2)
    e1 = enumerate_pair_components(alpha_gens, bound_a)
    e2 = enumerate_pair_components(beta_gens, bound_b)
    matches = []
    for a in e1:
        for b in e2:
            if abs(g * float(a) + (1 - g) * float(b) - mu) <= 1e-9:
                matches.append((a, b))
    if not matches:
        raise ClosureError(f"value {mu:g} does not decompose on the candidate pair grid")
    if len(matches) > 1:
        raise ClosureError(
            f"value {mu:g} decomposes ambiguously ({matches[:4]}); "
            "the mixing weight is too close to a rational")
    return sys.exponent_from_pair(*matches[0])
