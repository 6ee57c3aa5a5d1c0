"""Rational self-maps of P^3: composition, reduction, evaluation, catalog."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .cohomology import BlowupSpace, Class22, make_blowup_space
from .linalg import FracMatrix, identity, inverse, matmul, transpose
from .polynomials import Poly, poly_gcd

__all__ = [
    "RationalMap",
    "CohAction",
    "INDETERMINATE",
    "compose",
    "reduce",
    "evaluate",
    "evaluate_many",
    "identity_map",
    "cremona_catalog_entry",
    "squaring_map",
    "monomial_map",
    "monomial_degree",
    "catalog",
    "load_map",
    "map_from_json",
    "map_to_json",
    "MapFormatError",
]

INDETERMINACY_TOL = 1e-12


class _Indeterminate:
    def __repr__(self):
        return "INDETERMINATE"

    def __bool__(self):
        return False


INDETERMINATE = _Indeterminate()


class MapFormatError(ValueError):
    """Malformed map definition; ``field`` names the offending entry."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


@dataclass(frozen=True)
class CohAction:
    """Exact action of a map on H^{1,1} and H^{2,2} of a blowup of P^3.

    ``M11`` and ``M22`` act on coefficient column vectors (column k is the
    image of basis vector k). For a pullback action of a pseudo-automorphism,
    ``M22`` is the pullback on curves, tied to ``M11`` by pairing invariance.
    """

    space: BlowupSpace
    M11: FracMatrix
    M22: FracMatrix
    exceptional_curves: tuple[Class22, ...] = ()
    direction: str = "pullback"

    def __post_init__(self):
        n = self.space.dim
        for name in ("M11", "M22"):
            M = getattr(self, name)
            if len(M) != n or any(len(r) != n for r in M):
                raise ValueError(f"{name} must be {n}x{n}")
        if self.direction not in ("pullback", "pushforward"):
            raise ValueError("direction must be 'pullback' or 'pushforward'")

    @property
    def push11(self) -> FracMatrix:
        """Pushforward on H^{1,1}; the inverse of the pullback for pseudo-automorphisms."""
        return inverse(self.M11)

    @property
    def push22(self) -> FracMatrix:
        """Pushforward on H^{2,2}: the adjoint of M11 under the pairing."""
        P = self.space.pairing_matrix
        return matmul(inverse(P), matmul(transpose(self.M11), P))

    def to_json(self) -> dict:
        def enc(M):
            return [[f"{x.numerator}/{x.denominator}" for x in row] for row in M]

        return {
            "n_points": self.space.n_points,
            "M11": enc(self.M11),
            "M22": enc(self.M22),
            "exceptional_curves": [c.to_json() for c in self.exceptional_curves],
            "direction": self.direction,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CohAction":
        space = make_blowup_space(int(data["n_points"]))

        def dec(M):
            return tuple(tuple(Fraction(x) for x in row) for row in M)

        curves = tuple(Class22.from_json(space, c) for c in data.get("exceptional_curves", []))
        M11 = dec(data["M11"])
        M22 = dec(data["M22"]) if "M22" in data else pairing_dual(space, M11)
        return cls(space, M11, M22, curves, data.get("direction", "pullback"))


def pairing_dual(space: BlowupSpace, M11: FracMatrix) -> FracMatrix:
    """The unique M22 with pair(M11 a, M22 c) = pair(a, c) for all a, c."""
    P = space.pairing_matrix
    # M11^T P M22 = P
    return matmul(inverse(P), matmul(transpose(inverse(M11)), P))


@dataclass(frozen=True, eq=False)
class RationalMap:
    """A rational self-map of P^3 given by four homogeneous integer polynomials."""

    components: tuple[Poly, ...]
    name: str = "map"
    inverse: "RationalMap | None" = field(default=None, repr=False)
    self_inverse: bool = False
    action: CohAction | None = field(default=None, repr=False)
    flags: dict = field(default_factory=dict, repr=False)
    monomial_matrix: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 4:
            raise ValueError("a self-map of P^3 needs 4 components")
        if all(c.is_zero() for c in comps):
            raise ValueError("zero map")
        degs = {c.total_degree() for c in comps if not c.is_zero()}
        if len(degs) != 1 or not all(c.is_homogeneous() for c in comps):
            raise ValueError("components must be homogeneous of a common degree")
        object.__setattr__(self, "components", comps)

    @property
    def degree(self) -> int:
        return next(c.total_degree() for c in self.components if not c.is_zero())

    @property
    def inverse_map(self) -> "RationalMap | None":
        return self if self.self_inverse else self.inverse

    def same_components(self, other: "RationalMap") -> bool:
        """Equality of the underlying projective maps up to a nonzero integer scalar."""
        a = [c for c in self.components]
        b = [c for c in other.components]
        ka = next(i for i, c in enumerate(a) if not c.is_zero())
        if b[ka].is_zero():
            return False
        # a = (p/q) b  <=>  q a = p b, with p, q leading coefficients
        p = a[ka].leading()[1]
        q = b[ka].leading()[1]
        return all(ai.scale(q) == bi.scale(p) for ai, bi in zip(a, b))

    def is_reduced(self) -> bool:
        g = _components_gcd(self.components)
        return g.is_constant()

    def with_components(self, comps, name=None) -> "RationalMap":
        return RationalMap(tuple(comps), name=name or self.name)


def _components_gcd(comps: Sequence[Poly]) -> Poly:
    g = Poly(None, 4)
    for c in sorted(comps, key=len):
        g = poly_gcd(g, c)
        if g.is_constant():
            break
    return g


def compose(f: RationalMap, g: RationalMap, term_budget: int | None = None) -> RationalMap:
    """f o g, not reduced; degree deg(f) * deg(g)."""
    comps = [c.compose(list(g.components), term_budget=term_budget) for c in f.components]
    return RationalMap(tuple(comps), name=f"{f.name}o{g.name}")


def reduce(f: RationalMap) -> RationalMap:
    """Divide all components by their gcd (integer content included)."""
    g = _components_gcd(f.components)
    if g.is_constant():
        c = abs(g.terms[(0, 0, 0, 0)])
        if c == 1:
            return f
        comps = [p.div_int(c) for p in f.components]
    else:
        comps = [p.exact_div(g) for p in f.components]
    return RationalMap(
        tuple(comps), name=f.name, inverse=f.inverse, self_inverse=f.self_inverse,
        action=f.action, flags=f.flags, monomial_matrix=f.monomial_matrix,
    )


def evaluate_many(f: RationalMap, points, tol: float = INDETERMINACY_TOL):
    """Vectorized evaluation; returns (images, indeterminate_mask).

    Images are normalized so the first coordinate of maximal modulus is 1.
    Masked rows are filled with nan.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    scale = np.max(np.abs(pts), axis=-1)
    if np.any(scale == 0):
        raise ValueError("the zero vector is not a point of P^3")
    pts = pts / scale[:, None]
    vals = np.stack([c.evaluate(pts) for c in f.components], axis=-1)
    mags = np.abs(vals)
    top = np.max(mags, axis=-1)
    mask = top < tol
    idx = np.argmax(mags, axis=-1)
    lead = vals[np.arange(len(vals)), idx]
    lead = np.where(mask, 1.0, lead)
    out = vals / lead[:, None]
    out[mask] = np.nan
    return out, mask


def evaluate(f: RationalMap, point, tol: float = INDETERMINACY_TOL):
    """Image of one point, or INDETERMINATE."""
    pt = np.asarray(point, dtype=complex)
    if pt.shape != (4,):
        raise ValueError("a point of P^3 has 4 coordinates")
    if not np.any(pt):
        raise ValueError("the zero vector is not a point of P^3")
    img, mask = evaluate_many(f, pt[None, :], tol)
    if mask[0]:
        return INDETERMINATE
    return img[0]


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _var(i):
    return Poly.var(i, 4)


def identity_map() -> RationalMap:
    return RationalMap(tuple(_var(i) for i in range(4)), name="identity", self_inverse=True,
                       flags={"is_pseudo_automorphism": True, "is_1_stable_downstairs": True,
                              "holomorphic": True},
                       monomial_matrix=((1, 0, 0), (0, 1, 0), (0, 0, 1)))


def squaring_map() -> RationalMap:
    comps = tuple(Poly.monomial([2 if j == i else 0 for j in range(4)]) for i in range(4))
    return RationalMap(comps, name="squaring",
                       flags={"is_pseudo_automorphism": False, "is_1_stable_downstairs": True,
                              "holomorphic": True, "topological_degree": 8},
                       monomial_matrix=((2, 0, 0), (0, 2, 0), (0, 0, 2)))


def cremona_action() -> CohAction:
    """Pullback of the lifted standard Cremona involution on Bl_4 P^3."""
    space = make_blowup_space(4)
    n = space.dim
    M = [[Fraction(0)] * n for _ in range(n)]
    # column 0: H -> 3H - 2 sum E_i
    M[0][0] = Fraction(3)
    for i in range(1, n):
        M[i][0] = Fraction(-2)
    # column i: E_i -> H - sum_{j != i} E_j
    for i in range(1, n):
        M[0][i] = Fraction(1)
        for j in range(1, n):
            if j != i:
                M[j][i] = Fraction(-1)
    M11 = tuple(tuple(r) for r in M)
    M22 = CREMONA_M22
    curves = tuple(space.e(i) for i in range(1, n))
    return CohAction(space, M11, M22, curves, "pullback")


# Derived once from pairing invariance against the M11 above (see
# pairing_dual) and frozen; test_maps checks the two stay in agreement.
CREMONA_M22: FracMatrix = tuple(
    tuple(Fraction(x) for x in row)
    for row in (
        (3, 2, 2, 2, 2),
        (-1, 0, -1, -1, -1),
        (-1, -1, 0, -1, -1),
        (-1, -1, -1, 0, -1),
        (-1, -1, -1, -1, 0),
    )
)


def cremona_catalog_entry() -> RationalMap:
    """J = [x1x2x3 : x0x2x3 : x0x1x3 : x0x1x2], i.e. [1/x0 : 1/x1 : 1/x2 : 1/x3]."""
    comps = tuple(Poly.monomial([0 if j == i else 1 for j in range(4)]) for i in range(4))
    return RationalMap(comps, name="cremona_j", self_inverse=True, action=cremona_action(),
                       flags={"is_pseudo_automorphism": True, "is_1_stable_downstairs": False,
                              "holomorphic": False, "topological_degree": 1,
                              "blowup_points": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]},
                       monomial_matrix=((-1, 0, 0), (0, -1, 0), (0, 0, -1)))


def _det3(A) -> int:
    return (A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1])
            - A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0])
            + A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]))


def _monomial_exponents(A):
    vecs = [(0, 0, 0)] + [tuple(int(x) for x in row) for row in A]
    m = [min(v[j] for v in vecs) for j in range(3)]
    w = [tuple(v[j] - m[j] for j in range(3)) for v in vecs]
    d = max(sum(x) for x in w)
    return [(d - sum(x),) + x for x in w], d


def monomial_degree(A) -> int:
    """Algebraic degree of the reduced homogenized monomial map of A."""
    return _monomial_exponents(A)[1]


def monomial_map(A, name: str | None = None) -> RationalMap:
    """Homogenization of the torus map x_i -> prod_j x_j^{A_ij} (affine chart x_0 = 1)."""
    A = tuple(tuple(int(x) for x in row) for row in A)
    if len(A) != 3 or any(len(r) != 3 for r in A):
        raise ValueError("A must be 3x3")
    det = _det3(A)
    if det == 0:
        raise ValueError("singular exponent matrix")
    exps, _ = _monomial_exponents(A)
    comps = tuple(Poly.monomial(e) for e in exps)
    f = RationalMap(comps, name=name or f"monomial{list(map(list, A))}",
                    flags={"is_pseudo_automorphism": False, "topological_degree": abs(det)},
                    monomial_matrix=A)
    return reduce(f)


def compound_matrix(A, p: int) -> np.ndarray:
    """p-th compound (exterior power) matrix of A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    idx = list(combinations(range(n), p))
    C = np.empty((len(idx), len(idx)))
    for a, I in enumerate(idx):
        for b, J in enumerate(idx):
            C[a, b] = np.linalg.det(A[np.ix_(I, J)]) if p else 1.0
    return C


MONOMIAL_TEMPLATES = {
    "monomial_cyclic": ((1, 1, 0), (0, 1, 1), (1, 0, 1)),
    "monomial_rotation": ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
}


def catalog() -> dict[str, RationalMap]:
    out = {
        "cremona_j": cremona_catalog_entry(),
        "squaring": squaring_map(),
        "identity": identity_map(),
    }
    for name, A in MONOMIAL_TEMPLATES.items():
        out[name] = monomial_map(A, name=name)
    return out


# ---------------------------------------------------------------------------
# JSON map files
# ---------------------------------------------------------------------------

def _parse_components(data, where: str) -> tuple[Poly, ...]:
    if not isinstance(data, list) or len(data) != 4:
        raise MapFormatError(where, "expected a list of 4 components")
    comps = []
    for k, comp in enumerate(data):
        if not isinstance(comp, list):
            raise MapFormatError(f"{where}[{k}]", "expected a list of terms")
        terms = {}
        for t, term in enumerate(comp):
            try:
                coeff = int(str(term["coeff"]))
                exps = tuple(int(e) for e in term["exps"])
            except (KeyError, TypeError, ValueError) as exc:
                raise MapFormatError(f"{where}[{k}][{t}]", f"bad term ({exc})") from None
            if len(exps) != 4 or min(exps) < 0:
                raise MapFormatError(f"{where}[{k}][{t}].exps", "need 4 nonnegative exponents")
            terms[exps] = terms.get(exps, 0) + coeff
        comps.append(Poly(terms, 4))
    return tuple(comps)


def map_from_json(data: dict) -> RationalMap:
    if not isinstance(data, dict):
        raise MapFormatError("<root>", "expected an object")
    if data.get("vars", 4) != 4:
        raise MapFormatError("vars", "only maps of P^3 (4 variables) are supported")
    if "components" not in data:
        raise MapFormatError("components", "missing")
    comps = _parse_components(data["components"], "components")
    inv = data.get("inverse")
    inverse_map = None
    self_inverse = False
    if inv == "self":
        self_inverse = True
    elif inv is not None:
        try:
            inverse_map = map_from_json(inv)
        except MapFormatError as exc:
            raise MapFormatError(f"inverse.{exc.field}", str(exc)) from None
    action = None
    if data.get("action") is not None:
        try:
            action = CohAction.from_json(data["action"])
        except (KeyError, ValueError, ZeroDivisionError, TypeError) as exc:
            raise MapFormatError("action", str(exc)) from None
    mm = data.get("monomial_matrix")
    if mm is not None:
        try:
            mm = tuple(tuple(int(x) for x in row) for row in mm)
        except (TypeError, ValueError):
            raise MapFormatError("monomial_matrix", "expected a 3x3 integer matrix") from None
    flags = data.get("flags", {}) or {}
    if not isinstance(flags, dict):
        raise MapFormatError("flags", "expected an object")
    try:
        return RationalMap(comps, name=str(data.get("name", "map")), inverse=inverse_map,
                           self_inverse=self_inverse, action=action, flags=dict(flags),
                           monomial_matrix=mm)
    except ValueError as exc:
        raise MapFormatError("components", str(exc)) from None


def map_to_json(f: RationalMap) -> dict:
    def comps(m):
        return [
            [{"coeff": str(c), "exps": list(e)} for e, c in sorted(p.terms.items(), reverse=True)]
            for p in m.components
        ]

    out = {"vars": 4, "name": f.name, "components": comps(f)}
    if f.self_inverse:
        out["inverse"] = "self"
    elif f.inverse is not None:
        out["inverse"] = map_to_json(f.inverse)
    if f.action is not None:
        out["action"] = f.action.to_json()
    if f.monomial_matrix is not None:
        out["monomial_matrix"] = [list(r) for r in f.monomial_matrix]
    out["flags"] = dict(f.flags)
    return out


def load_map(source: str | Path) -> RationalMap:
    """Catalog name or path to a JSON map definition."""
    cat = catalog()
    if isinstance(source, str) and source in cat:
        return cat[source]
    path = Path(source)
    if not path.exists():
        raise MapFormatError("map", f"{source!r} is neither a catalog name nor a file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MapFormatError("<root>", f"invalid JSON ({exc})") from None
    return map_from_json(data)
