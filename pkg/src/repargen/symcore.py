"""Exact symbolic kernel for rational expressions over named symbols.

Expressions are sympy objects restricted to the rational fragment: exact
rational constants, symbols, sums, products, integer powers and quotients.
Non-integer rational powers (e.g. ``G^1.7``) are supported through opaque
"power atoms": ``base^q`` is split into ``base^floor(q) * A`` where ``A``
stands for ``base^frac(q)`` and is treated as an extra symbol whose
derivatives close over the rational fragment (``dA = frac(q)*A/base * d base``).

Everything here is pure and side-effect free apart from the atom registry,
which only interns atoms; expressions are immutable and safe to share
between threads.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable, Mapping

import sympy as sp

Expression = sp.Expr
Symbol = sp.Symbol
Rational = Fraction

_ZERO = sp.Integer(0)
_ONE = sp.Integer(1)


class SymcoreError(Exception):
    """Base class for kernel errors."""


class ZeroDenominatorError(SymcoreError):
    """Division by the identically-zero polynomial."""


class PoleError(SymcoreError):
    """Evaluation hit a zero denominator."""


class UnboundSymbolError(SymcoreError):
    """Evaluation point does not bind a symbol of the expression."""


class NonlinearError(SymcoreError):
    """Expression is not linear in the requested unknowns."""


# ---------------------------------------------------------------------------
# rational constants

def Q(p, q=1) -> sp.Rational:
    """Exact rational constant."""
    return sp.Rational(p, q)


def rational_from_decimal(text: str) -> sp.Rational:
    """Parse a decimal or integer literal exactly (never via float)."""
    text = text.strip()
    if "." in text:
        intpart, fracpart = text.split(".", 1)
        if not fracpart.isdigit() or (intpart and not intpart.lstrip("+-").isdigit()):
            raise ValueError(f"bad numeric literal: {text!r}")
        sign = -1 if intpart.startswith("-") else 1
        intpart = intpart.lstrip("+-") or "0"
        num = int(intpart) * 10 ** len(fracpart) + int(fracpart)
        return sp.Rational(sign * num, 10 ** len(fracpart))
    return sp.Rational(int(text))


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, sp.Rational):
        return Fraction(int(x.p), int(x.q))
    raise TypeError(f"not an exact rational: {x!r}")


# ---------------------------------------------------------------------------
# opaque atoms for non-integer rational powers

_ATOM_INFO: dict[sp.Symbol, tuple[sp.Expr, sp.Rational]] = {}
_ATOM_BY_KEY: dict[tuple[sp.Expr, sp.Rational], sp.Symbol] = {}


def fractional_power(base: Expression, exponent) -> Expression:
    """``base**exponent`` with exact rational exponent.

    Integer exponents give a plain power; otherwise the fractional part is
    interned as an opaque atom so the expression stays in the rational
    fragment.
    """
    exponent = sp.Rational(exponent)
    if exponent.is_integer:
        return sp.Pow(base, int(exponent))
    n = sp.floor(exponent)
    r = exponent - n
    cbase = canonicalize(base)
    if _atoms_of(cbase):
        raise SymcoreError("nested non-integer powers are not supported")
    key = (cbase, r)
    atom = _ATOM_BY_KEY.get(key)
    if atom is None:
        atom = sp.Symbol(f"_pw{len(_ATOM_BY_KEY)}")
        _ATOM_BY_KEY[key] = atom
        _ATOM_INFO[atom] = (cbase, r)
    head = sp.Pow(base, int(n)) if n != 0 else _ONE
    return head * atom


def atom_info(symbol: sp.Symbol):
    """(base, fractional exponent) for a power atom, else None."""
    return _ATOM_INFO.get(symbol)


def _atoms_of(e: Expression) -> set[sp.Symbol]:
    return {s for s in e.free_symbols if s in _ATOM_INFO}


def atoms_of(e: Expression) -> set[sp.Symbol]:
    return _atoms_of(sp.sympify(e))


def model_symbols(e: Expression) -> set[sp.Symbol]:
    """Free symbols of ``e`` with power atoms replaced by their base's symbols."""
    out = set()
    for s in sp.sympify(e).free_symbols:
        info = _ATOM_INFO.get(s)
        if info is None:
            out.add(s)
        else:
            out |= model_symbols(info[0])
    return out


def display_expr(e: Expression) -> Expression:
    """Replace power atoms by explicit fractional powers (printing only)."""
    e = sp.sympify(e)
    repl = {}
    for a in _atoms_of(e):
        base, r = _ATOM_INFO[a]
        repl[a] = sp.Pow(display_expr(base), r, evaluate=False)
    return e.xreplace(repl) if repl else e


# ---------------------------------------------------------------------------
# core operations

def canonicalize(e: Expression) -> Expression:
    """Rational normal form: a quotient of two expanded, coprime polynomials
    with the denominator's leading coefficient positive.  Idempotent; two
    expressions equal as rational functions canonicalize identically.
    """
    e = sp.sympify(e)
    if e.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise ZeroDenominatorError("division by the identically-zero polynomial")
    if e.is_Number:
        return e
    c = sp.cancel(e)
    if c.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise ZeroDenominatorError("division by the identically-zero polynomial")
    n, d = c.as_numer_denom()
    if d.is_zero:
        raise ZeroDenominatorError("division by the identically-zero polynomial")
    if n.is_zero:
        return _ZERO
    if d.is_Number:
        return sp.expand(n / d)
    gens = sorted(d.free_symbols, key=str)
    lead = sp.Poly(d, *gens).LC()
    if lead.is_negative:
        n, d = -n, -d
    return sp.expand(n) / sp.expand(d)


def differentiate(e: Expression, v: Symbol) -> Expression:
    """Exact partial derivative, canonicalized.  Power atoms follow the
    chain rule ``dA = q*A/base * d(base)``."""
    return canonicalize(differentiate_raw(e, v))


def differentiate_raw(e: Expression, v: Symbol) -> Expression:
    """Like :func:`differentiate` but without canonicalization (cheap, for
    building derivative towers)."""
    e = sp.sympify(e)
    d = sp.diff(e, v)
    for a in _atoms_of(e):
        base, q = _ATOM_INFO[a]
        dbase = sp.diff(base, v)
        if dbase.is_zero:
            continue
        d = d + sp.diff(e, a) * q * a / base * dbase
    return d


def substitute(e: Expression, bindings: Mapping[Symbol, Expression]) -> Expression:
    """Simultaneous substitution, result canonicalized.

    Atoms whose base mentions a substituted symbol are rebased, so e.g.
    substituting into ``G`` rewrites ``(8.4/G)^0.7`` consistently.
    """
    e = sp.sympify(e)
    plain = {s: sp.sympify(x) for s, x in bindings.items()}
    repl = dict(plain)
    for a in _atoms_of(e):
        base, q = _ATOM_INFO[a]
        newbase = base.xreplace(plain)
        if newbase != base:
            repl[a] = fractional_power(newbase, q)
    return canonicalize(e.xreplace(repl) if repl else e)


def evaluate(e: Expression, point: Mapping[Symbol, object]) -> Fraction:
    """Exact rational value of ``e`` at ``point`` (which must bind every free
    symbol, including power atoms)."""
    e = sp.sympify(e)
    vals = {s: to_fraction(x) for s, x in point.items()}
    missing = e.free_symbols - set(vals)
    if missing:
        raise UnboundSymbolError(f"unbound symbols: {sorted(map(str, missing))}")
    cache: dict[sp.Expr, Fraction] = {}

    def rec(node: sp.Expr) -> Fraction:
        got = cache.get(node)
        if got is not None:
            return got
        if node.is_Rational:
            val = Fraction(int(node.p), int(node.q))
        elif node.is_Symbol:
            val = vals[node]
        elif node.is_Add:
            val = sum((rec(a) for a in node.args), Fraction(0))
        elif node.is_Mul:
            val = Fraction(1)
            for a in node.args:
                val *= rec(a)
        elif node.is_Pow:
            b, x = node.args
            if not (x.is_Rational and x.is_integer):
                raise SymcoreError(f"non-integer exponent in evaluation: {node}")
            bv = rec(b)
            try:
                val = bv ** int(x)
            except ZeroDivisionError:
                raise PoleError(f"pole at evaluation point in {node}") from None
        else:
            raise SymcoreError(f"unsupported node in evaluation: {node!r}")
        cache[node] = val
        return val

    return rec(e)


def linear_coefficients(e: Expression, unknowns: Iterable[Symbol]) -> dict[Expression, Expression]:
    """Decompose an expression that is linear in ``unknowns`` into
    ``{monomial-over-remaining-symbols: coefficient}``.

    The canonical denominator must be free of the unknowns; coefficients are
    scaled by it so that ``sum(coeff*monomial) == e`` exactly.
    """
    unknowns = set(unknowns)
    c = canonicalize(e)
    n, d = c.as_numer_denom()
    if d.free_symbols & unknowns:
        raise NonlinearError("denominator depends on the unknowns")
    others = sorted(n.free_symbols - unknowns, key=str)

    def check_linear(coeff: sp.Expr) -> sp.Expr:
        present = sorted(coeff.free_symbols & unknowns, key=str)
        if present and sp.Poly(coeff, *present).total_degree() > 1:
            raise NonlinearError(f"nonlinear in unknowns: {coeff}")
        return canonicalize(coeff / d)

    if not others:
        return {_ONE: check_linear(n)}
    out: dict[Expression, Expression] = {}
    poly = sp.Poly(n, *others)
    for monom, coeff in poly.terms():
        mexpr = sp.Mul(*[g ** k for g, k in zip(poly.gens, monom) if k])
        if mexpr == 1:
            mexpr = _ONE
        out[mexpr] = check_linear(coeff)
    return out


def is_zero(e: Expression) -> bool:
    """True iff the canonical form is the zero polynomial.  A positive answer
    is cross-checked by evaluation at 3 random points, guarding against
    canonicalization bugs."""
    c = canonicalize(e)
    if c != _ZERO:
        return False
    rng = random.Random(0x5EED)
    syms = sorted(sp.sympify(e).free_symbols, key=str)
    checked = 0
    attempts = 0
    while checked < 3:
        attempts += 1
        if attempts > 60:
            raise SymcoreError("could not find pole-free check points")
        point = {s: Fraction(rng.randint(2, 10 ** 4)) for s in syms}
        try:
            val = evaluate(e, point)
        except PoleError:
            continue
        if val != 0:
            raise SymcoreError(
                "canonicalization inconsistency: canonical zero but nonzero value")
        checked += 1
    return True


def random_point(symbols: Iterable[Symbol], rng: random.Random,
                 lo: int = 2, hi: int = 10 ** 4) -> dict[Symbol, Fraction]:
    """Uniform random integer point, drawn in sorted symbol order so the same
    seed always yields the same point."""
    return {s: Fraction(rng.randint(lo, hi)) for s in sorted(symbols, key=str)}
