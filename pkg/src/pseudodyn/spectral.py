"""Invariant classes of a cohomology action.

Perron eigenpairs normalized so that <theta+, eta-> = 1, Cesaro means of
normalized iterates, exact checks of the pseudo-automorphism identities and
the self-intersection test for holomorphic-like maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .cohomology import BlowupSpace, Class11, Class22, cup11, pair
from .degrees import SpectralEnclosure, _deriv, _peval, _pgcd, spectral_radius
from .linalg import charpoly, identity, inverse, matmul, matvec, nullspace, transpose
from .maps import CohAction

__all__ = [
    "InvariantPair",
    "SpectralError",
    "perron_pair",
    "cesaro_means",
    "check_pseudo_identities",
    "holomorphic_like_check",
    "self_intersection_zero_solutions",
]

PAIRING_TOL = 1e-10
HOLOMORPHIC_LIKE_TOL = 1e-9
PSEF_TOL = 1e-9


class SpectralError(ValueError):
    """Raised with ``code`` NONSIMPLE_DOMINANT or ORTHOGONAL_PAIR."""

    def __init__(self, code: str, msg: str):
        super().__init__(f"{code}: {msg}")
        self.code = code


@dataclass(frozen=True)
class InvariantPair:
    theta_plus: Class11
    eta_minus: Class22
    lambda1: SpectralEnclosure
    normalized: bool
    method: str = "kernel"
    checks: dict = field(default_factory=dict)

    @property
    def pairing(self) -> Fraction:
        return pair(self.theta_plus, self.eta_minus)

    def to_json(self) -> dict:
        p = self.pairing
        return {
            "lambda1": self.lambda1.to_json(),
            "theta_plus": self.theta_plus.to_json(),
            "eta_minus": self.eta_minus.to_json(),
            "pairing": str(p) if p.denominator == 1 else repr(float(p)),
            "method": self.method,
            "checks": self.checks,
        }


# ---------------------------------------------------------------------------
# eigenvectors
# ---------------------------------------------------------------------------

def _rational_root(cp: list[Fraction], enc: SpectralEnclosure) -> Fraction | None:
    """A rational root +-r of cp inside the enclosure, if there is one."""
    # rational roots of a monic-after-scaling integer polynomial are p/q with
    # q | lead, p | const; the enclosure is narrow so test nearby candidates
    den = math.lcm(*(c.denominator for c in cp))
    ints = [int(c * den) for c in cp]
    lead = abs(ints[0])
    for q in range(1, lead + 1):
        if lead % q:
            continue
        for p in {math.floor(enc.lo * q), math.ceil(enc.hi * q)}:
            r = Fraction(p, q)
            if enc.lo - Fraction(1, 10**9) <= r <= enc.hi + Fraction(1, 10**9) and _peval(cp, r) == 0:
                return r
    return None


def _multiplicity(cp: list[Fraction], r) -> int:
    m = 0
    p = cp
    while len(p) > 1:
        if isinstance(r, Fraction):
            zero = _peval(p, r) == 0
        else:
            zero = abs(_mp_eval(p, r)) < mpmath.mpf(10) ** (-(mpmath.mp.dps - 10))
        if not zero:
            break
        m += 1
        p = _deriv(p)
    return m


def _mp_eval(p, x):
    v = mpmath.mpf(0)
    for c in p:
        v = v * x + mpmath.mpf(c.numerator) / c.denominator
    return v


def _refine_root(cp, enc: SpectralEnclosure, dps: int):
    """Newton refinement of the simple root inside the enclosure."""
    with mpmath.workdps(dps + 20):
        x = mpmath.mpf(enc.lo.numerator) / enc.lo.denominator
        x = (x + mpmath.mpf(enc.hi.numerator) / enc.hi.denominator) / 2
        d = _deriv(cp)
        for _ in range(200):
            step = _mp_eval(cp, x) / _mp_eval(d, x)
            x -= step
            if abs(step) < mpmath.mpf(10) ** (-(dps + 10)):
                break
        return x


def _mp_kernel_vector(M, lam, dps: int) -> list:
    """Null vector of (M - lam I) at high precision: fix one coordinate to 1."""
    n = len(M)
    with mpmath.workdps(dps + 20):
        A = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                A[i, j] = mpmath.mpf(M[i][j].numerator) / M[i][j].denominator - (lam if i == j else 0)
        best = None
        for fix in range(n):
            for drop in range(n):
                rows = [i for i in range(n) if i != drop]
                cols = [j for j in range(n) if j != fix]
                B = mpmath.matrix([[A[i, j] for j in cols] for i in rows])
                rhs = mpmath.matrix([-A[i, fix] for i in rows])
                try:
                    det = abs(mpmath.det(B))
                except ZeroDivisionError:
                    continue
                if best is None or det > best[0]:
                    best = (det, fix, B, rhs, cols)
        _, fix, B, rhs, cols = best
        sol = mpmath.lu_solve(B, rhs)
        v = [mpmath.mpf(0)] * n
        v[fix] = mpmath.mpf(1)
        for k, j in enumerate(cols):
            v[j] = sol[k]
        return v


def _mp_to_fraction(x, dps: int) -> Fraction:
    return Fraction(mpmath.nstr(x, dps, min_fixed=-math.inf, max_fixed=math.inf))


def _tie_break(v: Sequence) -> list:
    first = next((x for x in v if x != 0), None)
    if first is not None and first < 0:
        return [-x for x in v]
    return list(v)


def _l1_normalize(v: Sequence[Fraction]) -> list[Fraction]:
    s = sum(abs(x) for x in v)
    return [x / s for x in v]


def _exact_projection(M, lam: Fraction, v0: Sequence[Fraction]) -> list[Fraction]:
    """Projection of v0 onto ker(M - lam) along im(M - lam).

    This is the limit of the Cesaro means when lam is a semisimple dominant
    eigenvalue.
    """
    n = len(M)
    A = [[M[i][j] - (lam if i == j else 0) for j in range(n)] for i in range(n)]
    K = nullspace(A)
    # column space basis of A
    cols = [tuple(A[i][j] for i in range(n)) for j in range(n)]
    R = []
    for c in cols:
        trial = R + [c]
        if not nullspace(transpose(trial)):
            R = trial
    basis = K + R
    # rank-nullity gives the count; ker and im only span when lam is semisimple
    if len(basis) != n or nullspace(transpose(basis)):
        raise SpectralError("NONSIMPLE_DOMINANT", "dominant eigenvalue is not semisimple")
    coeffs = matvec(inverse(transpose(basis)), v0)
    out = [Fraction(0)] * n
    for a, k in zip(coeffs[: len(K)], K):
        out = [o + a * x for o, x in zip(out, k)]
    return out


def perron_pair(action: CohAction, cesaro_fallback: bool = False, v0: Class11 | None = None,
                w0: Class22 | None = None, dps: int = 50) -> InvariantPair:
    """Eigenclasses of f^* on H^{1,1} and f_* on H^{2,2} for lambda_1.

    The eigenvalue is isolated from the exact characteristic polynomial. If it
    is rational the eigenvectors are exact kernel vectors; otherwise they are
    computed at ``dps`` digits after Newton refinement of the root. When the
    dominant eigenvalue is not simple, ``cesaro_fallback`` projects ``v0`` and
    ``w0`` (default H and h) the way the Cesaro means do.

    Tie-break: theta+ has unit l1 norm and first nonzero coordinate positive;
    eta- is then scaled so that <theta+, eta-> = 1.
    """
    space = action.space
    M = action.M11
    N = action.push22
    enc = spectral_radius(M)
    cp = charpoly(M)
    lam_q = _rational_root(cp, enc)
    if lam_q is not None:
        mult = _multiplicity(cp, lam_q)
        neg_mult = _multiplicity(cp, -lam_q) if lam_q != 0 else 0
    else:
        lam_mp = _refine_root(cp, enc, dps)
        mult = 1  # irrational roots of a squarefree factor are simple; checked below
        with mpmath.workdps(dps + 20):
            mult = _multiplicity(cp, lam_mp)
        neg_mult = 0
    simple_dominant = mult == 1 and neg_mult == 0

    if not simple_dominant:
        if not cesaro_fallback:
            raise SpectralError("NONSIMPLE_DOMINANT",
                                f"lambda_1 ~ {enc.value} has multiplicity {mult}"
                                + (f" and -lambda_1 is an eigenvalue" if neg_mult else ""))
        if lam_q is None:
            raise SpectralError("NONSIMPLE_DOMINANT", "Cesaro fallback needs a rational lambda_1")
        v0 = v0 if v0 is not None else space.H()
        w0 = w0 if w0 is not None else space.h()
        theta = _exact_projection(M, lam_q, v0.coeffs)
        eta = _exact_projection(N, lam_q, w0.coeffs)
        method = "cesaro"
    elif lam_q is not None:
        A = [[M[i][j] - (lam_q if i == j else 0) for j in range(len(M))] for i in range(len(M))]
        B = [[N[i][j] - (lam_q if i == j else 0) for j in range(len(N))] for i in range(len(N))]
        theta = list(nullspace(A)[0])
        eta = list(nullspace(B)[0])
        method = "kernel"
    else:
        with mpmath.workdps(dps + 20):
            tv = _mp_kernel_vector(M, lam_mp, dps)
            ev = _mp_kernel_vector(N, lam_mp, dps)
        theta = [_mp_to_fraction(x, dps) for x in tv]
        eta = [_mp_to_fraction(x, dps) for x in ev]
        method = "kernel-mp"

    if all(x == 0 for x in theta) or all(x == 0 for x in eta):
        raise SpectralError("ORTHOGONAL_PAIR", "Cesaro projection vanished")
    theta = _l1_normalize(_tie_break(theta))
    eta = _tie_break(eta)
    th = Class11(space, theta)
    s = pair(th, Class22(space, eta))
    if abs(s) < Fraction(1, 10**30):
        raise SpectralError("ORTHOGONAL_PAIR", "<theta+, eta-> = 0; normalization impossible")
    et = Class22(space, [x / s for x in eta])

    checks = {
        "psef_necessary": _psef_necessary(th),
        "simple_dominant": simple_dominant,
    }
    return InvariantPair(th, et, enc, True, method, checks)


def _psef_necessary(theta: Class11) -> dict:
    """Pairings of theta against movable curves h and h - e_i (all must be >= 0)."""
    space = theta.space
    tests = {"h": pair(theta, space.h())}
    for i in range(1, space.dim):
        tests[f"h-e_{i}"] = pair(theta, space.h() - space.e(i))
    ok = all(float(v) >= -PSEF_TOL for v in tests.values())
    return {"pass": ok, "pairings": {k: float(v) for k, v in tests.items()}}


# ---------------------------------------------------------------------------
# Cesaro means
# ---------------------------------------------------------------------------

@dataclass
class CesaroResult:
    means: list
    residuals: list
    exact: bool

    def fitted_constant(self, start: int = 1) -> float:
        """Smallest C with residual_N <= C / N for all N >= start."""
        return max(float(r) * n for n, r in enumerate(self.residuals, 1) if n >= start)


def cesaro_means(M, v0, lam, N: int, keep_means: bool = True) -> CesaroResult:
    """T_n = (1/n) sum_{j=1..n} M^j v0 / lam^j and residuals |M T_n - lam T_n|_1 / |T_n|_1.

    Runs in exact rational arithmetic when M, v0 and lam are all rational;
    otherwise in floating point.
    """
    if N < 1:
        raise ValueError("N must be positive")
    vec = list(v0.coeffs) if isinstance(v0, (Class11, Class22)) else list(v0)
    if not any(vec):
        raise ValueError("v0 must be nonzero")
    exact = isinstance(lam, (int, Fraction)) and all(
        isinstance(x, (int, Fraction)) for row in M for x in row) and all(
        isinstance(x, (int, Fraction)) for x in vec)
    if exact:
        lam = Fraction(lam)
        if lam <= 0:
            raise ValueError("lambda must be positive")
        Mq = tuple(tuple(Fraction(x) for x in r) for r in M)
        cur = [Fraction(x) for x in vec]
        acc = [Fraction(0)] * len(cur)
        means, res = [], []
        for n in range(1, N + 1):
            cur = [x / lam for x in matvec(Mq, cur)]
            acc = [a + c for a, c in zip(acc, cur)]
            T = [a / n for a in acc]
            MT = matvec(Mq, T)
            num = sum(abs(a - lam * t) for a, t in zip(MT, T))
            den = sum(abs(t) for t in T)
            res.append(num / den if den else Fraction(0))
            if keep_means:
                means.append(T)
        if isinstance(v0, Class11):
            means = [Class11(v0.space, T) for T in means]
        elif isinstance(v0, Class22):
            means = [Class22(v0.space, T) for T in means]
        return CesaroResult(means, res, True)
    lam = float(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    Mf = np.array([[float(x) for x in r] for r in M])
    cur = np.array([float(x) for x in vec])
    acc = np.zeros_like(cur)
    means, res = [], []
    for n in range(1, N + 1):
        cur = Mf @ cur / lam
        acc = acc + cur
        T = acc / n
        den = np.abs(T).sum()
        res.append(float(np.abs(Mf @ T - lam * T).sum() / den) if den else 0.0)
        if keep_means:
            means.append(T.copy())
    return CesaroResult(means, res, False)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def check_pseudo_identities(action: CohAction) -> dict:
    """Exact checks: f_* f^* = Id on H^{1,1}, and pairing invariance on all basis pairs.

    f_* on H^{1,1} is taken as the pairing-adjoint of the H^{2,2} pullback M22,
    so (i) tests M11 against M22 rather than against its own inverse.
    """
    space = action.space
    P = space.pairing_matrix
    n = space.dim
    # <f_* a, c> = <a, f^* c>  =>  push11 = (P M22 P^{-1})^T
    push11 = transpose(matmul(matmul(P, action.M22), inverse(P)))
    comp = matmul(push11, action.M11)
    push_ok = comp == identity(n)
    bad_entries = [(space.basis11[i], space.basis11[j]) for i in range(n) for j in range(n)
                   if comp[i][j] != (1 if i == j else 0)]
    violations = []
    for i in range(n):
        a = space.basis_class11(i)
        Ma = Class11(space, matvec(action.M11, a.coeffs))
        for j in range(n):
            c = space.basis_class22(j)
            Mc = Class22(space, matvec(action.M22, c.coeffs))
            lhs, rhs = pair(Ma, Mc), pair(a, c)
            if lhs != rhs:
                violations.append({"pair": [space.basis11[i], space.basis22[j]],
                                   "lhs": str(lhs), "rhs": str(rhs)})
    return {
        "push_pull_identity": "pass" if push_ok else "fail",
        "push_pull_violations": [list(b) for b in bad_entries],
        "pairing_invariance": "pass" if not violations else "fail",
        "pairing_violations": violations,
        "pairs_checked": n * n,
        "pass": push_ok and not violations,
    }


def holomorphic_like_check(action: CohAction, theta: Class11, ample: Class11 | None = None,
                           condition_ii: bool | None = None) -> dict:
    """Self-intersection test for a lambda_1 eigenclass.

    Condition (ii) concerns a resolution of the graph, which is not built
    here; it is recorded as declared by the caller.
    """
    space = action.space
    sq = cup11(theta, theta)
    zero = all(abs(float(c)) <= HOLOMORPHIC_LIKE_TOL for c in sq.coeffs)
    lifted = Class11(space, matvec(action.M11, theta.coeffs))
    exceptional = [{"curve": c.to_json(), "pairing": str(pair(lifted, c))} for c in action.exceptional_curves]
    out = {
        "theta": theta.to_json(),
        "theta_is_zero": theta.is_zero(),
        "self_intersection": sq.to_json(),
        "holomorphic_like_i": zero,
        "exceptional_pairings": exceptional,
        "condition_ii_declared": condition_ii,
    }
    if ample is not None:
        out["self_intersection_vs_ample"] = str(pair(ample, sq))
    return out


def self_intersection_zero_solutions(space: BlowupSpace) -> list[Class11]:
    """All exact solutions of cup11(theta, theta) = 0.

    Writing theta = sum x_k B_k, coefficient k of the square is
    sum_{i,j} x_i x_j cup[i][j][k]. On a point blowup the cup tensor is
    diagonal (cup[i][j] = 0 for i != j, cup[k][k] = +-B_k), so the system
    decouples into s_k x_k^2 = 0 with s_k = +-1 and the only solution is 0.
    The structure is checked, not assumed.
    """
    n = space.dim
    T = space.cup_tensor
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if T[i][j][k] != 0 and not (i == j == k):
                    raise NotImplementedError("non-diagonal cup tensor")
    if any(T[k][k][k] == 0 for k in range(n)):
        raise NotImplementedError("degenerate cup tensor")
    # s_k x_k^2 = 0 with s_k != 0 forces x_k = 0
    theta = Class11(space, [0] * n)
    assert cup11(theta, theta).is_zero()
    return [theta]
