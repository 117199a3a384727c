"""Exact differential polynomials in ψ, ψ̄, U with formal D⁻¹ factors, and the hierarchy operators.

Units are fixed to ħ = 2m = 1 here. A :class:`DiffPoly` is a canonical tuple of terms; each term
is a rational coefficient times a power of i (0 or 1 after absorbing signs) times a sorted
multiset of factors. Structural equality of canonical forms is polynomial equality.
"""

import re
from dataclasses import dataclass
from enum import Enum
from itertools import groupby
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import sympy
from sympy.parsing.sympy_parser import convert_xor, implicit_multiplication, parse_expr, standard_transformations


class HierarchyError(ValueError):
    """Raised for malformed seeds, unknown operators and invalid depths"""


class FieldKind(str, Enum):
    POTENTIAL = "U"
    PSI = "psi"
    PSIBAR = "psibar"
    NONLOCAL = "D^-1"


# U factors first, then ψ/ψ̄ by derivative order, then nonlocal factors
_GROUP = {FieldKind.POTENTIAL: 0, FieldKind.PSI: 1, FieldKind.PSIBAR: 1, FieldKind.NONLOCAL: 2}
_RANK = {FieldKind.POTENTIAL: 0, FieldKind.PSI: 0, FieldKind.PSIBAR: 1, FieldKind.NONLOCAL: 0}
_CONJUGATE_KIND = {FieldKind.PSI: FieldKind.PSIBAR, FieldKind.PSIBAR: FieldKind.PSI}

Coefficient = Union[int, sympy.Rational]


@dataclass(frozen=True)
class Factor:
    kind: FieldKind
    order: int = 0
    argument: Optional["DiffPoly"] = None

    def sort_key(self) -> tuple:
        inner = self.argument.sort_key() if self.argument is not None else ()
        return (_GROUP[self.kind], self.order, _RANK[self.kind], inner)

    def conjugate(self) -> "Factor":
        if self.kind is FieldKind.NONLOCAL:
            return Factor(self.kind, 0, conjugate(self.argument))
        return Factor(_CONJUGATE_KIND.get(self.kind, self.kind), self.order)

    def __str__(self) -> str:
        suffix = "_" + "x" * self.order if self.order else ""
        if self.kind is FieldKind.PSI:
            return "psi" + suffix
        if self.kind is FieldKind.PSIBAR:
            return f"conj(psi{suffix})"
        if self.kind is FieldKind.POTENTIAL:
            return "U" + suffix
        return f"D^-1[{render(self.argument)}]"


class Term(NamedTuple):
    coefficient: sympy.Rational
    ipow: int
    factors: Tuple[Factor, ...]

    @property
    def degree(self) -> int:
        return len(self.factors)

    def sort_key(self) -> tuple:
        highest = max((factor.order for factor in self.factors), default=0)
        return (self.degree, -highest, tuple(factor.sort_key() for factor in self.factors), self.ipow)


@dataclass(frozen=True)
class DiffPoly:
    terms: Tuple[Term, ...] = ()

    @classmethod
    def build(cls, raw: Iterable[Tuple[Coefficient, int, Iterable[Factor]]]) -> "DiffPoly":
        """Canonical form of a sum of (coefficient, power of i, factors) triples"""
        collected: Dict[Tuple[Tuple[Factor, ...], int], sympy.Rational] = {}
        for coefficient, ipow, factors in raw:
            coefficient = sympy.Rational(coefficient)
            ipow %= 4
            if ipow >= 2:
                coefficient, ipow = -coefficient, ipow - 2
            key = (tuple(sorted(factors, key=Factor.sort_key)), ipow)
            collected[key] = collected.get(key, sympy.Integer(0)) + coefficient
        terms = [Term(coefficient, ipow, factors) for (factors, ipow), coefficient in collected.items() if coefficient != 0]
        return cls(tuple(sorted(terms, key=Term.sort_key)))

    @classmethod
    def constant(cls, value: Coefficient, ipow: int = 0) -> "DiffPoly":
        return cls.build([(value, ipow, ())])

    def sort_key(self) -> tuple:
        return tuple((term.sort_key(), int(term.coefficient.p), int(term.coefficient.q)) for term in self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_local(self) -> bool:
        return all(factor.kind is not FieldKind.NONLOCAL for term in self.terms for factor in term.factors)

    def __add__(self, other: "DiffPoly") -> "DiffPoly":
        return DiffPoly.build(list(self.terms) + list(other.terms))

    def __neg__(self) -> "DiffPoly":
        return self * -1

    def __sub__(self, other: "DiffPoly") -> "DiffPoly":
        return self + (-other)

    def __mul__(self, other: Union["DiffPoly", Coefficient]) -> "DiffPoly":
        if not isinstance(other, DiffPoly):
            other = DiffPoly.constant(other)
        return DiffPoly.build((a.coefficient * b.coefficient, a.ipow + b.ipow, a.factors + b.factors) for a in self.terms for b in other.terms)

    __rmul__ = __mul__

    def times_i(self, power: int = 1) -> "DiffPoly":
        return DiffPoly.build((term.coefficient, term.ipow + power, term.factors) for term in self.terms)

    def __str__(self) -> str:
        return render(self)


ZERO = DiffPoly()
ONE = DiffPoly.constant(1)
I = DiffPoly.constant(1, 1)


def _field(kind: FieldKind, order: int) -> DiffPoly:
    return DiffPoly.build([(1, 0, (Factor(kind, order),))])


def psi(order: int = 0) -> DiffPoly:
    return _field(FieldKind.PSI, order)


def psibar(order: int = 0) -> DiffPoly:
    return _field(FieldKind.PSIBAR, order)


def potential(order: int = 0) -> DiffPoly:
    return _field(FieldKind.POTENTIAL, order)


def formal_dminus1(argument: DiffPoly) -> DiffPoly:
    """Formal factor D⁻¹[argument]"""
    if argument.is_zero:
        return ZERO
    return DiffPoly.build([(1, 0, (Factor(FieldKind.NONLOCAL, 0, argument),))])


def differentiate(poly: DiffPoly) -> DiffPoly:
    """Total x-derivative by the Leibniz rule; ∂ₓD⁻¹[Q] = Q"""
    raw = []
    for term in poly.terms:
        for index, factor in enumerate(term.factors):
            rest = term.factors[:index] + term.factors[index + 1 :]
            if factor.kind is FieldKind.NONLOCAL:
                raw.extend((term.coefficient * inner.coefficient, term.ipow + inner.ipow, rest + inner.factors) for inner in factor.argument.terms)
            else:
                raw.append((term.coefficient, term.ipow, rest + (Factor(factor.kind, factor.order + 1),)))
    return DiffPoly.build(raw)


def _derivative_power(poly: DiffPoly, times: int, sign: int = 1) -> DiffPoly:
    for _ in range(times):
        poly = differentiate(poly) * sign
    return poly


def conjugate(poly: DiffPoly) -> DiffPoly:
    """Swap ψ ↔ ψ̄ and negate the power of i"""
    return DiffPoly.build((term.coefficient, -term.ipow, tuple(factor.conjugate() for factor in term.factors)) for term in poly.terms)


def _partial(term: Term, factor: Factor) -> DiffPoly:
    """∂term/∂factor, treating the factor as an independent jet variable"""
    count = term.factors.count(factor)
    if not count:
        return ZERO
    index = term.factors.index(factor)
    rest = term.factors[:index] + term.factors[index + 1 :]
    return DiffPoly.build([(term.coefficient * count, term.ipow, rest)])


def integrate_exact(poly: DiffPoly) -> Optional[DiffPoly]:
    """Q with ∂ₓQ = P when P is a local total derivative, else None.

    Uses the homotopy operator: every monomial of degree d contributes
    (1/d)·Σ_{u^(j), j≥1} Σ_{k<j} u^(k)·(−∂ₓ)^{j−k−1}(∂P/∂u^(j)). The candidate is accepted
    only if its derivative reproduces P. Constants of integration are dropped.
    """
    if poly.is_zero:
        return ZERO
    if not poly.is_local:
        return None
    result = ZERO
    for term in poly.terms:
        if not term.degree:
            return None
        contribution = ZERO
        for factor in sorted(set(term.factors), key=Factor.sort_key):
            partial = _partial(term, factor)
            for k in range(factor.order):
                contribution = contribution + _field(factor.kind, k) * _derivative_power(partial, factor.order - k - 1, sign=-1)
        result = result + contribution * sympy.Rational(1, term.degree)
    if differentiate(result) != poly:
        return None
    return result


def variational_derivative(poly: DiffPoly, kind: FieldKind) -> DiffPoly:
    """Euler operator Σ_j (−∂ₓ)^j ∂P/∂u^(j) for u = ψ, ψ̄ or U"""
    if not poly.is_local:
        raise HierarchyError("the Euler operator is only defined on local polynomials")
    result = ZERO
    orders = {factor.order for term in poly.terms for factor in term.factors if factor.kind is kind}
    for order in sorted(orders):
        factor = Factor(kind, order)
        partial = ZERO
        for term in poly.terms:
            partial = partial + _partial(term, factor)
        result = result + _derivative_power(partial, order, sign=-1)
    return result


def dminus1(poly: DiffPoly) -> DiffPoly:
    """D⁻¹ that substitutes the local antiderivative when one exists"""
    if poly.is_zero:
        return ZERO
    local = integrate_exact(poly) if poly.is_local else None
    return local if local is not None else formal_dminus1(poly)


class OperatorKind(str, Enum):
    TLIN = "T"
    TG = "TG"
    TK = "TK"
    TN = "TN"


_OPERATOR_ALIASES = {"t": OperatorKind.TLIN, "tlin": OperatorKind.TLIN, "tg": OperatorKind.TG, "tk": OperatorKind.TK, "tn": OperatorKind.TN}


@dataclass(frozen=True)
class SymbolicOperator:
    """One of the hierarchy operators at ħ = 2m = 1:

    T   P = −P_xx + U·P
    TG  P = P_xx + ψₓ·D⁻¹[ψₓ·P]
    TK  P = P_xx + (2/3)ψ·P + (1/3)ψₓ·D⁻¹[P]
    TN  P = i(Pₓ + α·ψ·D⁻¹[ψ·P̄ + ψ̄·P])
    """

    kind: OperatorKind
    alpha: Coefficient = 1
    with_potential: bool = True

    @classmethod
    def from_name(cls, name: str) -> "SymbolicOperator":
        try:
            return cls(_OPERATOR_ALIASES[name.strip().lower()])
        except KeyError:
            raise HierarchyError(f"unknown operator {name!r}; expected one of T, TG, TK, TN") from None

    @property
    def name(self) -> str:
        return self.kind.value


def apply_operator(op: SymbolicOperator, poly: DiffPoly) -> DiffPoly:
    second = _derivative_power(poly, 2)
    if op.kind is OperatorKind.TLIN:
        result = -second
        if op.with_potential:
            result = result + potential() * poly
        return result
    if op.kind is OperatorKind.TG:
        return second + psi(1) * dminus1(psi(1) * poly)
    if op.kind is OperatorKind.TK:
        return second + psi() * poly * sympy.Rational(2, 3) + psi(1) * dminus1(poly) * sympy.Rational(1, 3)
    result = differentiate(poly)
    if op.alpha != 0:
        result = result + psi() * dminus1(psi() * conjugate(poly) + psibar() * poly) * op.alpha
    return result.times_i()


def generate_hierarchy(op: SymbolicOperator, seed: DiffPoly, depth: int) -> List[DiffPoly]:
    """Flows op(seed), op²(seed), …, op^depth(seed); nonlocal flows keep their D⁻¹ factors"""
    if depth < 1:
        raise HierarchyError(f"depth must be at least 1, got {depth}")
    flows = []
    flow = seed
    for _ in range(depth):
        flow = apply_operator(op, flow)
        flows.append(flow)
    return flows


class IdentityCase(NamedTuple):
    label: str
    lhs: DiffPoly
    rhs: DiffPoly

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs


class IdentityReport(NamedTuple):
    holds: bool
    cases: List[IdentityCase]


def check_T_equals_TN_squared(with_potential: bool = False) -> IdentityReport:
    """Compare TN∘TN at α = 0 with T on {ψ, ψₓ, iψ, ψ²ψ̄}; holds only with U dropped"""
    basis = [("psi", psi()), ("psi_x", psi(1)), ("i*psi", I * psi()), ("psi^2*conj(psi)", psi() * psi() * psibar())]
    tn = SymbolicOperator(OperatorKind.TN, alpha=0)
    t = SymbolicOperator(OperatorKind.TLIN, with_potential=with_potential)
    cases = [IdentityCase(label, apply_operator(tn, apply_operator(tn, poly)), apply_operator(t, poly)) for label, poly in basis]
    return IdentityReport(all(case.holds for case in cases), cases)


def _body(term: Term, imaginary: bool = False) -> str:
    """Magnitude, then i, then the factors: ``2*i*U*psi_xx``"""
    magnitude = abs(term.coefficient)
    pieces = [str(magnitude)] if magnitude != 1 or not (term.factors or imaginary) else []
    if imaginary:
        pieces.append("i")
    for factor, group in groupby(term.factors):
        count = len(list(group))
        pieces.append(str(factor) if count == 1 else f"{factor}^{count}")
    return "*".join(pieces)


def render(poly: DiffPoly) -> str:
    """Deterministic plain-text notation, e.g. ``-(psi_xxx + 3*psi*conj(psi)*psi_x)``"""
    if poly.is_zero:
        return "0"
    units = {(term.coefficient < 0, term.ipow) for term in poly.terms}
    if len(units) == 1:
        negative, ipow = units.pop()
        if len(poly.terms) == 1:
            return ("-" if negative else "") + _body(poly.terms[0], bool(ipow))
        prefix = ("-" if negative else "") + ("i*" if ipow else "")
        inner = " + ".join(_body(term) for term in poly.terms)
        return f"{prefix}({inner})" if prefix else inner
    text = ""
    for index, term in enumerate(poly.terms):
        if index == 0:
            text += ("-" if term.coefficient < 0 else "") + _body(term, bool(term.ipow))
        else:
            text += (" - " if term.coefficient < 0 else " + ") + _body(term, bool(term.ipow))
    return text


_CONJ = sympy.Function("conj")
_NAME = re.compile(r"^(?P<field>psi|U)(?:_(?P<order>x+))?$")
_SYMBOL = re.compile(r"\b(?:psi|U)(?:_x+)?\b")
_TRANSFORMATIONS = standard_transformations + (implicit_multiplication, convert_xor)


def _unicode_to_ascii(text: str) -> str:
    text = text.replace("−", "-")
    text = re.sub("ψ̄(ₓ*)", lambda m: f" conj(psi{'_' + 'x' * len(m.group(1)) if m.group(1) else ''})", text)
    text = re.sub("ψ(ₓ*)", lambda m: f" psi{'_' + 'x' * len(m.group(1)) if m.group(1) else ''}", text)
    return text


def _from_sympy(expr) -> DiffPoly:
    result = ZERO
    for term in sympy.Add.make_args(sympy.expand(expr)):
        coefficient, rest = term.as_coeff_Mul()
        if not coefficient.is_Rational:
            coefficient = sympy.nsimplify(coefficient, rational=True)
        poly = DiffPoly.constant(coefficient)
        for factor in sympy.Mul.make_args(rest):
            exponent = 1
            if factor.is_Pow:
                factor, exponent = factor.base, factor.exp
                if not (exponent.is_Integer and exponent > 0):
                    raise HierarchyError(f"only positive integer powers are allowed, got {factor}**{exponent}")
            poly = poly * _power(_atom(factor), int(exponent))
        result = result + poly
    return result


def _power(poly: DiffPoly, exponent: int) -> DiffPoly:
    result = ONE
    for _ in range(exponent):
        result = result * poly
    return result


def _atom(factor) -> DiffPoly:
    if factor == 1:
        return ONE
    if factor == sympy.I:
        return I
    if getattr(factor, "func", None) == _CONJ:
        return conjugate(_from_sympy(factor.args[0]))
    if factor.is_Symbol:
        match = _NAME.match(factor.name)
        if match:
            order = len(match.group("order") or "")
            return psi(order) if match.group("field") == "psi" else potential(order)
    raise HierarchyError(f"unsupported symbol {factor} in seed; use psi, psi_x, conj(psi_x), U, i and rationals")


def parse_flow(text: str) -> DiffPoly:
    """Parse a seed such as ``-i*psi``, ``psi_x``, ``psi^2*conj(psi)`` or ``-iψ``"""
    source = _unicode_to_ascii(text).strip()
    if not source:
        raise HierarchyError("empty seed")
    try:
        names = {name: sympy.Symbol(name) for name in _SYMBOL.findall(source)}
        expr = parse_expr(source, local_dict={**names, "i": sympy.I, "I": sympy.I, "conj": _CONJ}, transformations=_TRANSFORMATIONS)
    except (SyntaxError, TypeError, ValueError, sympy.SympifyError) as e:
        raise HierarchyError(f"cannot parse seed {text!r}: {e}") from None
    return _from_sympy(expr)
