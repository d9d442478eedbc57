"""Exact-rational polynomial engine for the gauge-fixed scaling equations.

Feeding rational matrix data and targets into the row/column sum equations
(with one factor pinned to 1) yields a small zero-dimensional polynomial
system.  This module computes its reduced lex Groebner basis with
Buchberger's algorithm over exact rationals and reads off the degree of
the univariate elimination polynomial in the last variable, which is the
algebraic degree of that coordinate over the input data.

Numeric parameters are substituted before the basis computation, so the
ideals live in at most a handful of unknowns; symbolic parameters are out
of scope.  Everything is exact: coefficients are ``fractions.Fraction``
throughout, and degree results are certificates, not approximations.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import MatrixBalanceError, ShapeMismatch
from .iterative import GaugeFix

# Arbitrary-precision rational: always lowest terms, positive denominator,
# canonical zero 0/1.  The stdlib type satisfies every invariant we need.
BigRational = Fraction

# Exponent vector, one entry per unknown in the ambient variable order.
# Plain tuples compare lexicographically, which *is* the lex monomial order.
Monomial = tuple[int, ...]

DEFAULT_MAX_PAIRS = 100_000
DEFAULT_MAX_TERMS = 1_000_000


class ResourceLimit(MatrixBalanceError):
    """Basis computation exceeded the configured pair or term budget."""


class NotZeroDimensional(MatrixBalanceError):
    """No univariate elimination polynomial exists in the last variable."""


class UnitIdeal(MatrixBalanceError):
    """The ideal is the whole ring (the system has no solution)."""


class MissingAssignment(MatrixBalanceError, KeyError):
    """A variable required for evaluation has no assigned value."""


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def monomial_div(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x - y for x, y in zip(a, b))


def monomial_divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


def monomial_lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


def monomial_degree(a: Monomial) -> int:
    return sum(a)


class MultivariatePolynomial:
    """Polynomial over the rationals in a fixed ordered tuple of unknowns.

    Terms map exponent tuples to nonzero coefficients; zero coefficients
    are never stored, so equal polynomials have equal term maps.
    """

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[Monomial, Fraction] | None = None):
        self.variables = tuple(variables)
        width = len(self.variables)
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for mono, coeff in terms.items():
                if len(mono) != width:
                    raise ValueError(f"monomial {mono} has {len(mono)} exponents, expected {width}")
                coeff = Fraction(coeff)
                if coeff:
                    clean[tuple(mono)] = coeff
        self.terms = clean

    @classmethod
    def constant(cls, value, variables: Sequence[str]) -> "MultivariatePolynomial":
        mono = (0,) * len(tuple(variables))
        return cls(variables, {mono: Fraction(value)})

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "MultivariatePolynomial":
        variables = tuple(variables)
        idx = variables.index(name)
        mono = tuple(1 if k == idx else 0 for k in range(len(variables)))
        return cls(variables, {mono: Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(monomial_degree(m) == 0 for m in self.terms)

    def leading_monomial(self) -> Monomial:
        return max(self.terms)

    def leading_coefficient(self) -> Fraction:
        return self.terms[max(self.terms)]

    def total_degree(self) -> int:
        if not self.terms:
            return 0
        return max(monomial_degree(m) for m in self.terms)

    def degree_in(self, name: str) -> int:
        idx = self.variables.index(name)
        if not self.terms:
            return 0
        return max(m[idx] for m in self.terms)

    def uses_only(self, name: str) -> bool:
        """True when every term involves no unknown other than ``name``."""
        idx = self.variables.index(name)
        return all(
            all(e == 0 for k, e in enumerate(m) if k != idx) for m in self.terms
        )

    def monic(self) -> "MultivariatePolynomial":
        if not self.terms:
            return self
        lead = self.leading_coefficient()
        if lead == 1:
            return self
        out = MultivariatePolynomial(self.variables)
        out.terms = {m: c / lead for m, c in self.terms.items()}
        return out

    def _check_compatible(self, other: "MultivariatePolynomial"):
        if self.variables != other.variables:
            raise ValueError(f"variable orders differ: {self.variables} vs {other.variables}")

    def __add__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        self._check_compatible(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m, _ZERO) + c
            if s:
                terms[m] = s
            elif m in terms:
                del terms[m]
        out = MultivariatePolynomial(self.variables)
        out.terms = terms
        return out

    def __sub__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        self._check_compatible(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m, _ZERO) - c
            if s:
                terms[m] = s
            elif m in terms:
                del terms[m]
        out = MultivariatePolynomial(self.variables)
        out.terms = terms
        return out

    def __neg__(self) -> "MultivariatePolynomial":
        out = MultivariatePolynomial(self.variables)
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def mul_term(self, coeff: Fraction, mono: Monomial) -> "MultivariatePolynomial":
        out = MultivariatePolynomial(self.variables)
        if coeff:
            out.terms = {monomial_mul(m, mono): c * coeff for m, c in self.terms.items()}
        return out

    def __mul__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        self._check_compatible(other)
        terms: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = monomial_mul(m1, m2)
                s = terms.get(m, _ZERO) + c1 * c2
                if s:
                    terms[m] = s
                elif m in terms:
                    del terms[m]
        out = MultivariatePolynomial(self.variables)
        out.terms = terms
        return out

    def evaluate(self, assignment: Mapping[str, float]) -> float:
        """Floating-point value at the assignment; every unknown must be present."""
        values = []
        for name in self.variables:
            if name not in assignment:
                raise MissingAssignment(name)
            values.append(float(assignment[name]))
        total = 0.0
        for mono, coeff in sorted(self.terms.items()):
            term = float(coeff)
            for v, e in zip(values, mono):
                if e:
                    term *= v**e
            total += term
        return total

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultivariatePolynomial):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.variables, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms, reverse=True):
            coeff = self.terms[mono]
            names = [
                f"{name}^{e}" if e > 1 else name
                for name, e in zip(self.variables, mono)
                if e
            ]
            body = "*".join(names)
            if not body:
                parts.append(str(coeff))
            elif coeff == 1:
                parts.append(body)
            elif coeff == -1:
                parts.append(f"-{body}")
            else:
                parts.append(f"{coeff}*{body}")
        return " + ".join(parts).replace("+ -", "- ")


_ZERO = Fraction(0)


@dataclass(frozen=True)
class GroebnerBasis:
    """Reduced monic lex basis, sorted by decreasing leading monomial."""

    polynomials: tuple[MultivariatePolynomial, ...]
    variables: tuple[str, ...]

    @property
    def is_unit(self) -> bool:
        return len(self.polynomials) == 1 and self.polynomials[0].is_constant() and not self.polynomials[0].is_zero()


def normal_form(
    poly: MultivariatePolynomial,
    basis: "GroebnerBasis | Iterable[MultivariatePolynomial]",
) -> MultivariatePolynomial:
    """Remainder of multivariate division by the basis; zero iff a member of the ideal."""
    divisors = list(basis.polynomials) if isinstance(basis, GroebnerBasis) else [g for g in basis if not g.is_zero()]
    for g in divisors:
        if g.variables != poly.variables:
            raise ValueError("normal_form requires a common variable order")
    leads = [(g.leading_monomial(), g.leading_coefficient(), g) for g in divisors]
    work = dict(poly.terms)
    remainder: dict[Monomial, Fraction] = {}
    while work:
        mono = max(work)
        coeff = work.pop(mono)
        for lead_mono, lead_coeff, g in leads:
            if monomial_divides(lead_mono, mono):
                shift = monomial_div(mono, lead_mono)
                factor = coeff / lead_coeff
                for m, c in g.terms.items():
                    if m == lead_mono:
                        continue
                    target = monomial_mul(m, shift)
                    s = work.get(target, _ZERO) - factor * c
                    if s:
                        work[target] = s
                    elif target in work:
                        del work[target]
                break
        else:
            remainder[mono] = coeff
    out = MultivariatePolynomial(poly.variables)
    out.terms = remainder
    return out


def s_polynomial(f: MultivariatePolynomial, g: MultivariatePolynomial) -> MultivariatePolynomial:
    lcm = monomial_lcm(f.leading_monomial(), g.leading_monomial())
    left = f.mul_term(1 / f.leading_coefficient(), monomial_div(lcm, f.leading_monomial()))
    right = g.mul_term(1 / g.leading_coefficient(), monomial_div(lcm, g.leading_monomial()))
    return left - right


def _update_pairs(
    pairs: list[tuple[int, Monomial, int, int]],
    lead: list[Monomial],
    t: int,
) -> list[tuple[int, Monomial, int, int]]:
    """Gebauer-Moeller pair update when basis element ``t`` is appended.

    Installs Buchberger's two classical discarding criteria: pairs whose
    leading monomials are coprime reduce to zero, and pairs dominated by a
    chain through the new element are redundant.
    """
    new_lead = lead[t]
    lcms = {i: monomial_lcm(lead[i], new_lead) for i in range(t)}

    # Drop old pairs strictly dominated by the new element.
    survivors = []
    for entry in pairs:
        _, lcm_ij, i, j = entry
        if (
            monomial_divides(new_lead, lcm_ij)
            and lcms[i] != lcm_ij
            and lcms[j] != lcm_ij
        ):
            continue
        survivors.append(entry)
    heapq.heapify(survivors)

    # Among the new pairs, drop those whose lcm is a proper multiple of
    # another new pair's lcm, then keep one representative per equal lcm.
    candidates = sorted(range(t), key=lambda i: (monomial_degree(lcms[i]), lcms[i], i))
    kept: list[int] = []
    kept_lcms: list[Monomial] = []
    seen: set[Monomial] = set()
    for i in candidates:
        lcm_it = lcms[i]
        if lcm_it in seen:
            continue
        if any(monomial_divides(other, lcm_it) and other != lcm_it for other in kept_lcms):
            continue
        kept.append(i)
        kept_lcms.append(lcm_it)
        seen.add(lcm_it)

    # Product criterion: coprime leading monomials reduce to zero.
    for i in kept:
        lcm_it = lcms[i]
        if lcm_it == monomial_mul(lead[i], new_lead):
            continue
        heapq.heappush(survivors, (monomial_degree(lcm_it), lcm_it, i, t))
    return survivors


def buchberger(
    generators: Sequence[MultivariatePolynomial],
    max_pairs: int = DEFAULT_MAX_PAIRS,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> GroebnerBasis:
    """Reduced monic lex Groebner basis of the generated ideal.

    Pairs are processed lowest-lcm-degree first (normal selection).  A
    nonzero constant remainder short-circuits to the unit basis.

    Raises:
        ResourceLimit: the pair or stored-term budget was exceeded.
    """
    generators = list(generators)
    if not generators:
        raise ValueError("buchberger requires at least one generator")
    variables = generators[0].variables
    for g in generators:
        if g.variables != variables:
            raise ValueError("generators must share one variable order")

    unit = GroebnerBasis(
        polynomials=(MultivariatePolynomial.constant(1, variables),), variables=variables
    )

    basis: list[MultivariatePolynomial] = []
    lead: list[Monomial] = []
    pairs: list[tuple[int, Monomial, int, int]] = []
    term_count = 0

    def append(p: MultivariatePolynomial):
        nonlocal pairs, term_count
        basis.append(p)
        lead.append(p.leading_monomial())
        term_count += len(p.terms)
        if term_count > max_terms:
            raise ResourceLimit(f"stored terms exceeded {max_terms}")
        pairs = _update_pairs(pairs, lead, len(basis) - 1)

    for g in generators:
        r = normal_form(g, basis)
        if r.is_zero():
            continue
        if r.is_constant():
            return unit
        append(r.monic())

    processed = 0
    while pairs:
        processed += 1
        if processed > max_pairs:
            raise ResourceLimit(f"processed pairs exceeded {max_pairs}")
        _, _, i, j = heapq.heappop(pairs)
        r = normal_form(s_polynomial(basis[i], basis[j]), basis)
        if r.is_zero():
            continue
        if r.is_constant():
            return unit
        append(r.monic())

    return GroebnerBasis(polynomials=tuple(_reduce_basis(basis)), variables=variables)


def _reduce_basis(basis: list[MultivariatePolynomial]) -> list[MultivariatePolynomial]:
    """Minimalize (no leading monomial divides another) then tail-reduce."""
    ordered = sorted(basis, key=lambda g: g.leading_monomial())
    minimal: list[MultivariatePolynomial] = []
    for g in ordered:
        lm = g.leading_monomial()
        if any(monomial_divides(h.leading_monomial(), lm) for h in minimal):
            continue
        minimal.append(g)
    reduced = []
    for idx, g in enumerate(minimal):
        others = minimal[:idx] + minimal[idx + 1 :]
        r = normal_form(g, others)
        reduced.append(r.monic())
    reduced.sort(key=lambda g: g.leading_monomial(), reverse=True)
    return reduced


def elimination_degree(basis: GroebnerBasis, variable: str) -> int:
    """Degree of the univariate basis element in the last lex variable.

    This is the algebraic degree of that coordinate over the data field.

    Raises:
        UnitIdeal: the system has no solution at all.
        NotZeroDimensional: no univariate element exists.
    """
    if variable not in basis.variables:
        raise ValueError(f"unknown variable {variable!r}; order is {basis.variables}")
    if basis.variables[-1] != variable:
        raise ValueError(
            f"{variable!r} is not last in the lex order {basis.variables}; "
            "elimination reads off the final coordinate only"
        )
    if basis.is_unit:
        raise UnitIdeal("inconsistent system: basis is {1}")
    univariate = [g for g in basis.polynomials if g.uses_only(variable) and not g.is_zero()]
    if not univariate:
        raise NotZeroDimensional(f"no univariate basis element in {variable!r}")
    # A reduced basis cannot contain two: one leading power would divide the other.
    assert len(univariate) == 1
    return univariate[0].degree_in(variable)


@dataclass(frozen=True)
class VarietyReport:
    """Float evaluation of a polynomial family at a candidate point."""

    residuals: tuple[float, ...]
    max_abs_residual: float
    tolerance: float
    passed: bool


def verify_solution_on_variety(
    polynomials: "GroebnerBasis | Sequence[MultivariatePolynomial]",
    assignment: Mapping[str, float],
    tol: float,
) -> VarietyReport:
    """Evaluate every polynomial at the assignment and compare against ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    polys = list(polynomials.polynomials) if isinstance(polynomials, GroebnerBasis) else list(polynomials)
    residuals = tuple(p.evaluate(assignment) for p in polys)
    worst = max((abs(v) for v in residuals), default=0.0)
    return VarietyReport(
        residuals=residuals,
        max_abs_residual=worst,
        tolerance=tol,
        passed=worst <= tol,
    )


@dataclass(frozen=True)
class RationalInstance:
    """A balancing problem at exact rational data plus a gauge choice."""

    entries: tuple[tuple[Fraction, ...], ...]
    row_targets: tuple[Fraction, ...]
    col_targets: tuple[Fraction, ...]
    gauge: GaugeFix

    def __post_init__(self):
        entries = tuple(tuple(Fraction(v) for v in row) for row in self.entries)
        rows = tuple(Fraction(v) for v in self.row_targets)
        cols = tuple(Fraction(v) for v in self.col_targets)
        if not entries or not entries[0]:
            raise ShapeMismatch("matrix must be nonempty")
        width = len(entries[0])
        if any(len(row) != width for row in entries):
            raise ShapeMismatch("matrix rows have unequal lengths")
        if len(rows) != len(entries) or len(cols) != width:
            raise ShapeMismatch(
                f"targets of lengths ({len(rows)}, {len(cols)}) for a "
                f"{len(entries)}x{width} matrix"
            )
        for value in itertools.chain(rows, cols, *entries):
            if value <= 0:
                raise ValueError(f"all data must be strictly positive, got {value}")
        if self.gauge.kind == "unit_row_factor":
            if self.gauge.index >= len(entries):
                raise ShapeMismatch(f"row gauge index {self.gauge.index} for {len(entries)} rows")
        elif self.gauge.index >= width:
            raise ShapeMismatch(f"col gauge index {self.gauge.index} for {width} cols")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "row_targets", rows)
        object.__setattr__(self, "col_targets", cols)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def is_consistent(self) -> bool:
        return sum(self.row_targets) == sum(self.col_targets)


def default_gauge(rows: int, cols: int) -> GaugeFix:
    """Pin the last column factor, or the single row factor for one-row shapes."""
    if rows == 1:
        return GaugeFix("unit_row_factor", 0)
    return GaugeFix("unit_col_factor", cols - 1)


def scaling_variables(rows: int, cols: int, gauge: GaugeFix) -> tuple[str, ...]:
    """Unknown names r1..rn, c1..cm with the gauge-fixed one removed."""
    names = [f"r{i + 1}" for i in range(rows)] + [f"c{j + 1}" for j in range(cols)]
    if gauge.kind == "unit_row_factor":
        names.remove(f"r{gauge.index + 1}")
    else:
        names.remove(f"c{gauge.index + 1}")
    return tuple(names)


def build_scaling_ideal(
    instance: RationalInstance,
    variables: Sequence[str] | None = None,
) -> list[MultivariatePolynomial]:
    """The n + m gauge-fixed row/column sum polynomials of the instance.

    Row i contributes ``sum_j a_ij r_i c_j - R_i`` and column j contributes
    ``sum_i a_ij r_i c_j - C_j``, with the gauged factor replaced by 1.
    Every generator has total degree at most 2.
    """
    if variables is None:
        variables = scaling_variables(instance.rows, instance.cols, instance.gauge)
    variables = tuple(variables)
    expected = set(scaling_variables(instance.rows, instance.cols, instance.gauge))
    if set(variables) != expected:
        raise ValueError(f"variables must be a permutation of {sorted(expected)}")
    index = {name: k for k, name in enumerate(variables)}
    width = len(variables)

    def factor_mono(name: str) -> Monomial | None:
        # None means the factor is gauge-fixed to 1.
        if name not in index:
            return None
        return tuple(1 if k == index[name] else 0 for k in range(width))

    row_monos = [factor_mono(f"r{i + 1}") for i in range(instance.rows)]
    col_monos = [factor_mono(f"c{j + 1}") for j in range(instance.cols)]
    zero_mono = (0,) * width

    def cell_mono(i: int, j: int) -> Monomial:
        rm, cm = row_monos[i], col_monos[j]
        if rm is None and cm is None:
            return zero_mono
        if rm is None:
            return cm
        if cm is None:
            return rm
        return monomial_mul(rm, cm)

    polys = []
    for i in range(instance.rows):
        terms: dict[Monomial, Fraction] = {}
        for j in range(instance.cols):
            mono = cell_mono(i, j)
            terms[mono] = terms.get(mono, _ZERO) + instance.entries[i][j]
        terms[zero_mono] = terms.get(zero_mono, _ZERO) - instance.row_targets[i]
        polys.append(MultivariatePolynomial(variables, terms))
    for j in range(instance.cols):
        terms = {}
        for i in range(instance.rows):
            mono = cell_mono(i, j)
            terms[mono] = terms.get(mono, _ZERO) + instance.entries[i][j]
        terms[zero_mono] = terms.get(zero_mono, _ZERO) - instance.col_targets[j]
        polys.append(MultivariatePolynomial(variables, terms))
    return polys


def _random_fraction(rng: random.Random, high: int = 100) -> Fraction:
    return Fraction(rng.randint(1, high), rng.randint(1, high))


def random_rational_instance(
    rows: int,
    cols: int,
    rng: random.Random | int,
    gauge: GaugeFix | None = None,
) -> RationalInstance:
    """Seeded random positive instance with exactly consistent targets.

    Entries and row targets draw numerator and denominator uniformly from
    [1, 100]; column targets split the row total along random rational
    weights, so consistency holds exactly.
    """
    if isinstance(rng, int):
        rng = random.Random(rng)
    entries = tuple(tuple(_random_fraction(rng) for _ in range(cols)) for _ in range(rows))
    row_targets = tuple(_random_fraction(rng) for _ in range(rows))
    total = sum(row_targets)
    weights = [_random_fraction(rng) for _ in range(cols)]
    weight_sum = sum(weights)
    col_targets = tuple(total * w / weight_sum for w in weights)
    return RationalInstance(
        entries=entries,
        row_targets=row_targets,
        col_targets=col_targets,
        gauge=gauge if gauge is not None else default_gauge(rows, cols),
    )


def random_inconsistent_instance(
    rows: int,
    cols: int,
    rng: random.Random | int,
    gauge: GaugeFix | None = None,
) -> RationalInstance:
    """Like :func:`random_rational_instance` but with a deliberate target defect."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    base = random_rational_instance(rows, cols, rng, gauge)
    defect = sum(base.row_targets) * Fraction(rng.randint(1, 3), 10)
    bumped = list(base.col_targets)
    bumped[rng.randrange(cols)] += defect
    return RationalInstance(
        entries=base.entries,
        row_targets=base.row_targets,
        col_targets=tuple(bumped),
        gauge=base.gauge,
    )
