"""Exact intersection theory on the blowup of P^3 at finitely many points.

H^{1,1} has basis (H, E_1, ..., E_N): the pulled-back hyperplane and the
exceptional divisors. H^{2,2} has basis (h, e_1, ..., e_N): the pulled-back
line and a line inside each exceptional P^2. With these conventions

    H.H = h,   E_i.E_i = -e_i,   H.E_i = 0,   E_i.E_j = 0 (i != j)
    <H, h> = 1,   <E_i, e_i> = -1

so that the strict transform of a line through p_i and p_j has class
h - e_i - e_j.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

__all__ = [
    "BlowupSpace",
    "Class11",
    "Class22",
    "make_blowup_space",
    "cup11",
    "pair",
    "triple",
    "SpaceMismatchError",
]


class SpaceMismatchError(ValueError):
    """Raised when classes living on different blowups are combined."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        raise TypeError("floating point coefficients are not allowed; use Fraction or str")
    return Fraction(x)


@dataclass(frozen=True)
class BlowupSpace:
    n_points: int
    basis11: tuple[str, ...] = field(init=False, repr=False, compare=False)
    basis22: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_points < 0:
            raise ValueError("n_points must be nonnegative")
        n = self.n_points
        object.__setattr__(self, "basis11", ("H",) + tuple(f"E_{i}" for i in range(1, n + 1)))
        object.__setattr__(self, "basis22", ("h",) + tuple(f"e_{i}" for i in range(1, n + 1)))

    @property
    def dim(self) -> int:
        return self.n_points + 1

    @property
    def pairing_matrix(self) -> tuple[tuple[Fraction, ...], ...]:
        """Diagonal matrix of <basis11[i], basis22[j]>."""
        return _pairing_matrix(self.n_points)

    @property
    def cup_tensor(self) -> tuple[tuple[tuple[Fraction, ...], ...], ...]:
        """cup_tensor[i][j] = coefficients of basis11[i].basis11[j] in basis22."""
        return _cup_tensor(self.n_points)

    # convenience constructors ------------------------------------------------
    def class11(self, coeffs: Iterable) -> "Class11":
        return Class11(self, tuple(_frac(c) for c in coeffs))

    def class22(self, coeffs: Iterable) -> "Class22":
        return Class22(self, tuple(_frac(c) for c in coeffs))

    def H(self) -> "Class11":
        return self.basis_class11(0)

    def E(self, i: int) -> "Class11":
        return self.basis_class11(i)

    def h(self) -> "Class22":
        return self.basis_class22(0)

    def e(self, i: int) -> "Class22":
        return self.basis_class22(i)

    def basis_class11(self, k: int) -> "Class11":
        if not 0 <= k < self.dim:
            raise IndexError(k)
        return self.class11(1 if j == k else 0 for j in range(self.dim))

    def basis_class22(self, k: int) -> "Class22":
        if not 0 <= k < self.dim:
            raise IndexError(k)
        return self.class22(1 if j == k else 0 for j in range(self.dim))

    def to_json(self) -> dict:
        return {"n_points": self.n_points}

    @classmethod
    def from_json(cls, data: dict) -> "BlowupSpace":
        return make_blowup_space(int(data["n_points"]))


@lru_cache(maxsize=None)
def _pairing_matrix(n: int):
    dim = n + 1
    return tuple(
        tuple(Fraction(0) if i != j else (Fraction(1) if i == 0 else Fraction(-1)) for j in range(dim))
        for i in range(dim)
    )


@lru_cache(maxsize=None)
def _cup_tensor(n: int):
    dim = n + 1
    zero = (Fraction(0),) * dim
    rows = []
    for i in range(dim):
        row = []
        for j in range(dim):
            if i != j:
                row.append(zero)
            else:
                v = [Fraction(0)] * dim
                v[i] = Fraction(1) if i == 0 else Fraction(-1)
                row.append(tuple(v))
        rows.append(tuple(row))
    return tuple(rows)


def make_blowup_space(n_points: int) -> BlowupSpace:
    """Blowup of P^3 at ``n_points`` distinct points."""
    return BlowupSpace(int(n_points))


class _ClassBase:
    __slots__ = ("space", "coeffs")
    _basis_attr = ""

    def __init__(self, space: BlowupSpace, coeffs: Sequence):
        coeffs = tuple(_frac(c) for c in coeffs)
        if len(coeffs) != space.dim:
            raise ValueError(
                f"expected {space.dim} coefficients for {getattr(space, self._basis_attr)}, got {len(coeffs)}"
            )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, key, value):
        raise AttributeError("classes are immutable")

    def _check(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError("classes live on different blowups")
        return None

    def __add__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return type(self)(self.space, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return type(self)(self.space, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return type(self)(self.space, [-a for a in self.coeffs])

    def __mul__(self, scalar):
        if isinstance(scalar, _ClassBase):
            return NotImplemented
        s = _frac(scalar)
        return type(self)(self.space, [s * a for a in self.coeffs])

    __rmul__ = __mul__

    def __eq__(self, other):
        return type(other) is type(self) and other.space == self.space and other.coeffs == self.coeffs

    def __hash__(self):
        return hash((type(self).__name__, self.space, self.coeffs))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __repr__(self):
        labels = getattr(self.space, self._basis_attr)
        terms = [f"{c}*{lab}" for c, lab in zip(self.coeffs, labels) if c != 0]
        return f"{type(self).__name__}({' + '.join(terms) or '0'})"

    def to_json(self) -> list[str]:
        return [f"{c.numerator}/{c.denominator}" for c in self.coeffs]


class Class11(_ClassBase):
    """A class in H^{1,1} written in the basis (H, E_1, ..., E_N)."""

    __slots__ = ()
    _basis_attr = "basis11"

    @classmethod
    def from_json(cls, space: BlowupSpace, data: list[str]) -> "Class11":
        return cls(space, [Fraction(s) for s in data])


class Class22(_ClassBase):
    """A class in H^{2,2} written in the basis (h, e_1, ..., e_N)."""

    __slots__ = ()
    _basis_attr = "basis22"

    @classmethod
    def from_json(cls, space: BlowupSpace, data: list[str]) -> "Class22":
        return cls(space, [Fraction(s) for s in data])


def _same_space(*classes):
    space = classes[0].space
    for c in classes[1:]:
        if c.space != space:
            raise SpaceMismatchError("classes live on different blowups")
    return space


def cup11(a: Class11, b: Class11) -> Class22:
    """Cup product H^{1,1} x H^{1,1} -> H^{2,2}."""
    if not (isinstance(a, Class11) and isinstance(b, Class11)):
        raise TypeError("cup11 takes two Class11 arguments")
    space = _same_space(a, b)
    tensor = space.cup_tensor
    out = [Fraction(0)] * space.dim
    for i, ai in enumerate(a.coeffs):
        if ai == 0:
            continue
        for j, bj in enumerate(b.coeffs):
            if bj == 0:
                continue
            for k, t in enumerate(tensor[i][j]):
                if t:
                    out[k] += ai * bj * t
    return Class22(space, out)


def pair(a: Class11, c: Class22) -> Fraction:
    """Intersection number of a divisor class with a curve class."""
    if not (isinstance(a, Class11) and isinstance(c, Class22)):
        raise TypeError("pair takes (Class11, Class22)")
    space = _same_space(a, c)
    P = space.pairing_matrix
    total = Fraction(0)
    for i, ai in enumerate(a.coeffs):
        if ai == 0:
            continue
        for j, cj in enumerate(c.coeffs):
            if cj and P[i][j]:
                total += ai * P[i][j] * cj
    return total


def triple(a: Class11, b: Class11, c: Class11) -> Fraction:
    """Triple intersection a.b.c, computed as <a, b.c>."""
    _same_space(a, b, c)
    return pair(a, cup11(b, c))


def dumps_class(c: _ClassBase) -> str:
    return json.dumps(c.to_json())
