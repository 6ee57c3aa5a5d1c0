"""Sparse multivariate polynomials over the integers.

Polynomials are stored as ``{exponent tuple: int coefficient}`` with no zero
coefficients. The gcd is the classical recursive one: split off contents,
then run a subresultant remainder sequence in the main variable with
coefficients in the remaining variables. Monomial inputs take a fast path
(coordinatewise minimum of exponents).
"""
from __future__ import annotations

from math import gcd as igcd
from typing import Iterable, Mapping

import numpy as np

__all__ = ["Poly", "poly_gcd", "TermBudgetExceeded", "NotDivisibleError"]


class TermBudgetExceeded(RuntimeError):
    """An intermediate polynomial grew past the allowed number of terms."""


class NotDivisibleError(ArithmeticError):
    pass


def _add_exps(a, b):
    return tuple(x + y for x, y in zip(a, b))


class Poly:
    """Immutable sparse polynomial in ``nvars`` variables with integer coefficients."""

    __slots__ = ("nvars", "terms", "_hash")

    def __init__(self, terms: Mapping[tuple[int, ...], int] | None = None, nvars: int = 4):
        clean = {}
        if terms:
            for e, c in terms.items():
                c = int(c)
                if c:
                    e = tuple(int(x) for x in e)
                    if len(e) != nvars:
                        raise ValueError(f"exponent {e} has wrong length for {nvars} variables")
                    if any(x < 0 for x in e):
                        raise ValueError(f"negative exponent {e}")
                    clean[e] = clean.get(e, 0) + c
                    if clean[e] == 0:
                        del clean[e]
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, key, value):
        raise AttributeError("Poly is immutable")

    # constructors ---------------------------------------------------------
    @classmethod
    def const(cls, c: int, nvars: int = 4) -> "Poly":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def var(cls, i: int, nvars: int = 4) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls({tuple(e): 1}, nvars)

    @classmethod
    def monomial(cls, exps: Iterable[int], coeff: int = 1) -> "Poly":
        exps = tuple(exps)
        return cls({exps: coeff}, len(exps))

    # basic queries --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not any(next(iter(self.terms))))

    def __len__(self):
        return len(self.terms)

    def total_degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def is_homogeneous(self) -> bool:
        degs = {sum(e) for e in self.terms}
        return len(degs) <= 1

    def degree_in(self, v: int) -> int:
        if not self.terms:
            return -1
        return max(e[v] for e in self.terms)

    def min_exponents(self) -> tuple[int, ...]:
        if not self.terms:
            return (0,) * self.nvars
        return tuple(min(e[i] for e in self.terms) for i in range(self.nvars))

    def content(self) -> int:
        g = 0
        for c in self.terms.values():
            g = igcd(g, c)
        return g

    def leading(self) -> tuple[tuple[int, ...], int]:
        """Lexicographic leading term."""
        e = max(self.terms)
        return e, self.terms[e]

    def variables(self) -> list[int]:
        return [i for i in range(self.nvars) if any(e[i] for e in self.terms)]

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        if isinstance(other, int):
            return Poly.const(other, self.nvars)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = out.get(e, 0) + c
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return Poly(out, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Poly({e: -c for e, c in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = _add_exps(e1, e2)
                v = out.get(e, 0) + c1 * c2
                if v:
                    out[e] = v
                else:
                    out.pop(e, None)
        return Poly(out, self.nvars)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        result = Poly.const(1, self.nvars)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def scale(self, c: int) -> "Poly":
        return Poly({e: c * v for e, v in self.terms.items()}, self.nvars)

    def shift(self, exps: tuple[int, ...]) -> "Poly":
        return Poly({_add_exps(e, exps): c for e, c in self.terms.items()}, self.nvars)

    def div_int(self, c: int) -> "Poly":
        out = {}
        for e, v in self.terms.items():
            q, r = divmod(v, c)
            if r:
                raise NotDivisibleError(f"coefficient {v} not divisible by {c}")
            out[e] = q
        return Poly(out, self.nvars)

    def exact_div(self, other: "Poly") -> "Poly":
        """Quotient of an exact division; raises NotDivisibleError otherwise."""
        if other.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        if other.is_monomial():
            (eo, co), = other.terms.items()
            out = {}
            for e, c in self.terms.items():
                d = tuple(x - y for x, y in zip(e, eo))
                if min(d) < 0 or c % co:
                    raise NotDivisibleError("monomial does not divide")
                out[d] = c // co
            return Poly(out, self.nvars)
        le, lc = other.leading()
        rem = dict(self.terms)
        quot: dict = {}
        while rem:
            e = max(rem)
            c = rem[e]
            d = tuple(x - y for x, y in zip(e, le))
            if min(d) < 0 or c % lc:
                raise NotDivisibleError("polynomial does not divide")
            q = c // lc
            quot[d] = q
            for eo, co in other.terms.items():
                ee = _add_exps(eo, d)
                v = rem.get(ee, 0) - q * co
                if v:
                    rem[ee] = v
                else:
                    rem.pop(ee, None)
        return Poly(quot, self.nvars)

    def __eq__(self, other):
        if isinstance(other, int):
            other = Poly.const(other, self.nvars)
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.nvars, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def diff(self, v: int) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[v]:
                out[e[:v] + (e[v] - 1,) + e[v + 1:]] = c * e[v]
        return Poly(out, self.nvars)

    # univariate views -----------------------------------------------------
    def coeffs_in(self, v: int) -> dict[int, "Poly"]:
        """Coefficients of self viewed as a polynomial in variable ``v``."""
        groups: dict[int, dict] = {}
        for e, c in self.terms.items():
            k = e[v]
            ee = e[:v] + (0,) + e[v + 1:]
            groups.setdefault(k, {})[ee] = c
        return {k: Poly(t, self.nvars) for k, t in groups.items()}

    def lc_in(self, v: int) -> "Poly":
        d = self.degree_in(v)
        return self.coeffs_in(v)[d]

    # substitution / evaluation -------------------------------------------
    def compose(self, subs: list["Poly"], term_budget: int | None = None) -> "Poly":
        """Substitute ``subs[i]`` for variable ``i``."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        nv = subs[0].nvars
        powers: list[dict[int, Poly]] = [{0: Poly.const(1, nv), 1: s} for s in subs]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                s = subs[i]
                if s.is_monomial():
                    (e, c), = s.terms.items()
                    cache[k] = Poly({tuple(k * x for x in e): c ** k}, nv)
                elif k - max(cache) <= 4:
                    j = max(cache)
                    p = cache[j]
                    while j < k:
                        p = p * s
                        j += 1
                        cache[j] = p
                        if term_budget is not None and len(p) > term_budget:
                            raise TermBudgetExceeded(f"{len(p)} terms > budget {term_budget}")
                else:
                    cache[k] = s ** k
                    if term_budget is not None and len(cache[k]) > term_budget:
                        raise TermBudgetExceeded(f"{len(cache[k])} terms > budget {term_budget}")
            return cache[k]

        acc: dict = {}
        for e, c in self.terms.items():
            t = Poly.const(c, nv)
            for i, k in enumerate(e):
                if k:
                    t = t * power(i, k)
                    if term_budget is not None and len(t) > term_budget:
                        raise TermBudgetExceeded(f"{len(t)} terms > budget {term_budget}")
            for ee, cc in t.terms.items():
                v = acc.get(ee, 0) + cc
                if v:
                    acc[ee] = v
                else:
                    acc.pop(ee, None)
            if term_budget is not None and len(acc) > term_budget:
                raise TermBudgetExceeded(f"{len(acc)} terms > budget {term_budget}")
        return Poly(acc, nv)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at an array of complex points of shape (..., nvars)."""
        pts = np.asarray(points, dtype=complex)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for e, c in self.terms.items():
            t = np.full(pts.shape[:-1], complex(c))
            for i, k in enumerate(e):
                if k:
                    t = t * pts[..., i] ** k
            out = out + t
        return out

    def to_sympy(self, symbols):
        expr = 0
        for e, c in self.terms.items():
            t = c
            for s, k in zip(symbols, e):
                t = t * s**k
            expr = expr + t
        return expr

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            mono = "*".join(f"x{i}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"{c}*{mono}" if mono else str(c))
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# gcd
# ---------------------------------------------------------------------------

def _normalize_sign(p: Poly) -> Poly:
    if p.is_zero():
        return p
    return -p if p.leading()[1] < 0 else p


def _monomial_gcd(mono: Poly, other: Poly) -> Poly:
    (e, c), = mono.terms.items()
    m = other.min_exponents()
    exps = tuple(min(a, b) for a, b in zip(e, m))
    return Poly.monomial(exps, igcd(c, other.content()))


def _prem(a: Poly, b: Poly, v: int) -> Poly:
    """Pseudo-remainder of a by b in variable v."""
    db = b.degree_in(v)
    lcb = b.lc_in(v)
    r = a
    e = a.degree_in(v) - db + 1
    while not r.is_zero() and r.degree_in(v) >= db:
        dr = r.degree_in(v)
        lcr = r.lc_in(v)
        x = [0] * a.nvars
        x[v] = dr - db
        r = r * lcb - (lcr * b).shift(tuple(x))
        e -= 1
    if e > 0:
        r = r * (lcb ** e)
    return r


def _content_in(p: Poly, v: int, rest: list[int]) -> Poly:
    g = Poly(None, p.nvars)
    for c in p.coeffs_in(v).values():
        g = _gcd_rec(g, c, rest)
        if g.is_constant() and abs(g.terms.get((0,) * p.nvars, 0)) == 1:
            break
    return _normalize_sign(g)


def _gcd_rec(f: Poly, g: Poly, vars_: list[int]) -> Poly:
    nv = f.nvars
    if f.is_zero():
        return _normalize_sign(g)
    if g.is_zero():
        return _normalize_sign(f)
    if f.is_monomial():
        return _monomial_gcd(f, g)
    if g.is_monomial():
        return _monomial_gcd(g, f)
    if not vars_:
        return Poly.const(igcd(f.content(), g.content()), nv)
    v, rest = vars_[0], vars_[1:]
    df, dg = f.degree_in(v), g.degree_in(v)
    if df == 0 and dg == 0:
        return _gcd_rec(f, g, rest)
    cf = _content_in(f, v, rest)
    cg = _content_in(g, v, rest)
    cont = _gcd_rec(cf, cg, rest)
    a = f.exact_div(cf)
    b = g.exact_div(cg)
    if a.degree_in(v) == 0 or b.degree_in(v) == 0:
        return _normalize_sign(cont)
    if a.degree_in(v) < b.degree_in(v):
        a, b = b, a
    # subresultant remainder sequence
    gg = Poly.const(1, nv)
    hh = Poly.const(1, nv)
    while True:
        delta = a.degree_in(v) - b.degree_in(v)
        r = _prem(a, b, v)
        if r.is_zero():
            break
        if r.degree_in(v) == 0:
            return _normalize_sign(cont)
        a = b
        b = r.exact_div(gg * hh ** delta)
        gg = a.lc_in(v)
        if delta == 0:
            pass
        elif delta == 1:
            hh = gg
        else:
            hh = (gg ** delta).exact_div(hh ** (delta - 1))
    pp = b.exact_div(_content_in(b, v, rest))
    return _normalize_sign(cont * pp)


def poly_gcd(f: Poly, g: Poly) -> Poly:
    """Greatest common divisor in Z[x_0, ..., x_{n-1}], positive leading coefficient."""
    if f.nvars != g.nvars:
        raise ValueError("variable count mismatch")
    if f.is_zero():
        return _normalize_sign(g)
    if g.is_zero():
        return _normalize_sign(f)
    if f.is_monomial():
        return _monomial_gcd(f, g)
    if g.is_monomial():
        return _monomial_gcd(g, f)
    # pull out monomial factors first; keeps the remainder sequences small
    mf, mg = f.min_exponents(), g.min_exponents()
    m = tuple(min(a, b) for a, b in zip(mf, mg))
    f1 = f.exact_div(Poly.monomial(mf))
    g1 = g.exact_div(Poly.monomial(mg))
    vars_ = sorted(set(f1.variables()) | set(g1.variables()),
                   key=lambda i: (max(f1.degree_in(i), g1.degree_in(i)), i))
    core = _gcd_rec(f1, g1, vars_)
    return core.shift(m) if any(m) else core
