"""Degree sequences of iterates, dynamical degree estimates, stability."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .linalg import as_matrix, charpoly, matpow, matvec
from .maps import RationalMap, compose, identity_map, monomial_degree, reduce
from .polynomials import TermBudgetExceeded

__all__ = [
    "DegreeSequence",
    "SpectralEnclosure",
    "degree_sequence",
    "dyn_degree_estimate",
    "spectral_radius",
    "check_log_concavity",
    "stability_report",
    "dynamical_degrees",
    "monomial_degree_sequence",
    "sequence_csv",
    "TERM_BUDGET",
]

TERM_BUDGET = 200_000


@dataclass(frozen=True)
class DegreeSequence:
    map_id: str
    entries: tuple[tuple[int, int], ...]
    p: int = 1
    truncated: bool = False

    @property
    def degrees(self) -> list[int]:
        return [d for _, d in self.entries]

    def __getitem__(self, n: int) -> int:
        for k, d in self.entries:
            if k == n:
                return d
        raise KeyError(n)

    def submultiplicative(self) -> bool:
        d = dict(self.entries)
        return all(d[m + n] <= d[m] * d[n] for m in d for n in d if m + n in d)


def degree_sequence(f: RationalMap, n_max: int, p: int = 1,
                    term_budget: int = TERM_BUDGET) -> DegreeSequence:
    """deg(reduce(f^n)) for n = 1..n_max.

    For p = 2 the sequence of the declared inverse is used, since
    deg_2(f) = deg_1(f^{-1}) for birational maps.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if p == 2:
        inv = f.inverse_map
        if inv is None:
            raise ValueError("p = 2 degrees need a declared inverse")
        seq = degree_sequence(inv, n_max, 1, term_budget)
        return DegreeSequence(f.name, seq.entries, 2, seq.truncated)
    if p != 1:
        raise ValueError("p must be 1 or 2")
    base = reduce(f)
    entries = [(1, base.degree)]
    g = base
    truncated = False
    for n in range(2, n_max + 1):
        try:
            g = reduce(compose(g, base, term_budget=term_budget))
        except TermBudgetExceeded:
            truncated = True
            break
        entries.append((n, g.degree))
    return DegreeSequence(f.name, tuple(entries), p, truncated)


def monomial_degree_sequence(A, n_max: int) -> list[int]:
    """Closed-form degrees of f_{A^n}, from exact integer matrix powers."""
    A = np.asarray(A, dtype=object)
    P = np.identity(3, dtype=object)
    out = []
    for _ in range(n_max):
        P = P.dot(A)
        out.append(monomial_degree(P.tolist()))
    return out


@dataclass(frozen=True)
class DegreeEstimate:
    estimate: float
    upper_bound: float
    upper_bounds: tuple[float, ...]
    approximate: bool = False

    def __iter__(self):
        yield self.estimate
        yield list(self.upper_bounds)


def dyn_degree_estimate(seq: DegreeSequence) -> DegreeEstimate:
    """Estimate lambda_1 from a degree sequence.

    Every d_n^{1/n} bounds lambda_1 from above (submultiplicativity); the
    estimate is the last ratio d_n / d_{n-1} clipped to [1, min d_n^{1/n}].
    """
    if len(seq.entries) < 3:
        raise ValueError("need at least 3 entries")
    bounds = tuple(d ** (1.0 / n) for n, d in seq.entries)
    ub = min(bounds)
    (_, d_prev), (_, d_last) = seq.entries[-2], seq.entries[-1]
    ratio = d_last / d_prev
    est = min(max(ratio, 1.0), ub)
    return DegreeEstimate(est, ub, bounds, approximate=seq.truncated)


# ---------------------------------------------------------------------------
# certified spectral radius
# ---------------------------------------------------------------------------

def _pnorm(p: list[Fraction]) -> list[Fraction]:
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _prem_div(a: list[Fraction], b: list[Fraction]):
    """Quotient and remainder of polynomials (highest degree first)."""
    a = list(a)
    q = []
    while len(a) >= len(b):
        c = a[0] / b[0]
        q.append(c)
        for i in range(len(b)):
            a[i] -= c * b[i]
        a.pop(0)
    return q, _pnorm(a) if a else [Fraction(0)]


def _pgcd(a, b):
    while any(b):
        _, r = _prem_div(a, b)
        a, b = b, r
    return [c / a[0] for c in a]


def _deriv(p):
    n = len(p) - 1
    return [c * (n - i) for i, c in enumerate(p[:-1])] or [Fraction(0)]


def _peval(p, x):
    v = Fraction(0)
    for c in p:
        v = v * x + c
    return v


def _sturm_chain(p):
    chain = [p, _deriv(p)]
    while len(chain[-1]) > 1 or chain[-1][0] != 0:
        _, r = _prem_div(chain[-2], chain[-1])
        if not any(r):
            break
        chain.append([-c for c in r])
    return chain


def _sign_changes(chain, x) -> int:
    signs = [s for s in (_peval(q, x) for q in chain) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def _reflect_product(p):
    """Coefficients of p(t) p(-t): roots are +-(roots of p)."""
    n = len(p) - 1
    pm = [c * (-1) ** (n - i) for i, c in enumerate(p)]
    out = [Fraction(0)] * (2 * n + 1)
    for i, a in enumerate(p):
        for j, b in enumerate(pm):
            out[i + j] += a * b
    return out


@dataclass(frozen=True)
class SpectralEnclosure:
    lo: Fraction
    hi: Fraction
    certified: bool = True

    @property
    def value(self) -> float:
        return float((self.lo + self.hi) / 2)

    def __float__(self):
        return self.value

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return float(self.lo) - slack <= x <= float(self.hi) + slack

    def to_json(self) -> dict:
        return {"lo": float(self.lo), "hi": float(self.hi)}


def largest_real_root_abs(poly: Sequence[Fraction], width: float = 1e-12) -> tuple[Fraction, Fraction]:
    """Enclosure of max |x| over real roots x of poly (Sturm + bisection)."""
    p = _pnorm([Fraction(c) for c in poly])
    q = _reflect_product(p)
    q = [c / q[0] for c in q]
    q = _pnorm([c for c in _prem_div(q, _pgcd(q, _deriv(q)))[0]])  # squarefree part
    if len(q) == 1:
        return Fraction(0), Fraction(0)
    chain = _sturm_chain(q)
    bound = 1 + max(abs(c) for c in q[1:])
    lo, hi = Fraction(0), Fraction(bound)
    # all roots of q are symmetric, so a positive root exists iff q has a nonzero root
    if _sign_changes(chain, lo) - _sign_changes(chain, hi) == 0:
        return Fraction(0), Fraction(0)
    w = Fraction(width)
    while hi - lo > w:
        mid = (lo + hi) / 2
        if _sign_changes(chain, mid) - _sign_changes(chain, hi) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def spectral_radius(M, width: float = 1e-12) -> SpectralEnclosure:
    """Certified enclosure of the spectral radius of an exact rational matrix.

    The characteristic polynomial is formed exactly and the largest real root
    in absolute value is isolated by Sturm sequences. A floating point
    eigenvalue pass checks that no complex root is larger in modulus; if one
    is, the numeric modulus is returned and the enclosure is flagged
    uncertified.
    """
    M = as_matrix(M)
    cp = charpoly(M)
    den = math.lcm(*(c.denominator for c in cp))
    cp = [c * den for c in cp]
    lo, hi = largest_real_root_abs(cp, width)
    eig = np.linalg.eigvals(np.array([[float(x) for x in r] for r in M]))
    num = float(np.max(np.abs(eig))) if len(eig) else 0.0
    if num > float(hi) + 1e-9 * max(1.0, num):
        return SpectralEnclosure(Fraction(num - width), Fraction(num + width), certified=False)
    return SpectralEnclosure(lo, hi)


# ---------------------------------------------------------------------------
# log-concavity, stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogConcavityReport:
    lams: tuple[float, ...]
    margins: tuple[float, ...]
    tol: float
    passed: bool

    def to_json(self) -> dict:
        return {"lams": list(self.lams), "margins": list(self.margins), "pass": self.passed}


def check_log_concavity(lams: Sequence[float], tol: float = 1e-9) -> LogConcavityReport:
    """lambda_p^2 >= lambda_{p-1} lambda_{p+1} for p = 1, 2."""
    lams = tuple(float(x) for x in lams)
    if len(lams) != 4:
        raise ValueError("need (lambda_0, lambda_1, lambda_2, lambda_3)")
    if abs(lams[0] - 1.0) > tol:
        raise ValueError("lambda_0 must be 1")
    margins = tuple(lams[p] ** 2 - lams[p - 1] * lams[p + 1] for p in (1, 2))
    return LogConcavityReport(lams, margins, tol, all(m >= -tol for m in margins))


def _compound(A, p: int):
    n = len(A)
    idx = list(combinations(range(n), p))

    def minor(I, J):
        sub = [[Fraction(A[i][j]) for j in J] for i in I]
        if len(sub) == 1:
            return sub[0][0]
        if len(sub) == 2:
            return sub[0][0] * sub[1][1] - sub[0][1] * sub[1][0]
        return (sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1])
                - sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0])
                + sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0]))

    return [[minor(I, J) for J in idx] for I in idx]


def dynamical_degrees(f: RationalMap) -> tuple[float, float, float, float]:
    """(lambda_0, ..., lambda_3) from the data a catalog map carries.

    Uses the cohomology action when present (rho(M11), rho(f_* on H^{2,2})),
    otherwise the compound matrices of the monomial exponent matrix, otherwise
    (1, d, d^2, d^3) for holomorphic maps.
    """
    if f.action is not None:
        l1 = spectral_radius(f.action.M11).value
        l2 = spectral_radius(f.action.push22).value
        return (1.0, l1, l2, float(f.flags.get("topological_degree", 1)))
    if f.monomial_matrix is not None:
        A = f.monomial_matrix
        l1 = spectral_radius(_compound(A, 1)).value
        l2 = spectral_radius(_compound(A, 2)).value
        l3 = float(abs(_compound(A, 3)[0][0]))
        return (1.0, l1, l2, l3)
    if f.flags.get("holomorphic"):
        d = float(f.degree)
        return (1.0, d, d * d, d ** 3)
    raise ValueError(f"no degree data for {f.name}")


@dataclass
class StabilityReport:
    map_id: str
    sequence: DegreeSequence
    predicted: list[float]
    stable_downstairs: bool
    first_drop: int | None
    upstairs_stable: bool | None = None
    upstairs_checks: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "map": self.map_id,
            "degrees": self.sequence.degrees,
            "predicted": self.predicted,
            "stable_downstairs": self.stable_downstairs,
            "first_drop": self.first_drop,
            "upstairs_stable": self.upstairs_stable,
            "upstairs_checks": self.upstairs_checks,
            "truncated": self.sequence.truncated,
        }


def stability_report(f: RationalMap, n_max: int, term_budget: int = TERM_BUDGET) -> StabilityReport:
    """Compare deg(f^n) with d_1^n and with the degree predicted by the action."""
    if f.action is None and f.monomial_matrix is None and not f.flags.get("holomorphic"):
        raise ValueError("stability report needs a cohomology action, a monomial matrix, "
                         "or a holomorphic map")
    seq = degree_sequence(f, n_max, term_budget=term_budget)
    d1 = seq.entries[0][1]
    first_drop = next((n for n, d in seq.entries if d != d1 ** n), None)
    report = StabilityReport(f.name, seq, [], first_drop is None, first_drop)

    if f.action is not None:
        M = f.action.M11
        # H-coefficient of (M11^n) H is the degree the action predicts
        report.predicted = [float(matvec(matpow(M, n), [1] + [0] * (len(M) - 1))[0])
                            for n, _ in seq.entries]
        ident = identity_map()
        base = reduce(f)
        g = base
        checks = []
        ok = True
        for n in range(1, len(seq.entries) + 1):
            if n > 1:
                g = reduce(compose(g, base, term_budget=term_budget))
            Mn = matpow(M, n)
            if g.same_components(ident):
                good = Mn == matpow(M, 0)
                checks.append({"n": n, "iterate": "identity", "consistent": good})
            elif g.same_components(base):
                good = Mn == M
                checks.append({"n": n, "iterate": "f", "consistent": good})
            else:
                good = True
                checks.append({"n": n, "iterate": "other", "consistent": None})
            ok = ok and good
        report.upstairs_checks = checks
        report.upstairs_stable = ok and bool(f.flags.get("is_pseudo_automorphism", False))
    elif f.monomial_matrix is not None:
        report.predicted = [float(d) for d in monomial_degree_sequence(f.monomial_matrix, len(seq.entries))]
    else:
        report.predicted = [float(d1) ** n for n, _ in seq.entries]
    return report


def sequence_csv(seq: DegreeSequence, rho: float | None = None, stable: bool | None = None) -> str:
    """CSV with columns n, d_n, d_n^(1/n), rho_power, stable_flag."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "d_n", "d_n_root", "rho_power", "stable_flag"])
    d1 = seq.entries[0][1]
    for n, d in seq.entries:
        rp = "" if rho is None else repr(rho ** n)
        flag = (d == d1 ** n) if stable is None else stable
        w.writerow([n, d, repr(d ** (1.0 / n)), rp, int(bool(flag))])
    return buf.getvalue()
