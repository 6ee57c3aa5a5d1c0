"""Green potentials of polynomial self-maps of P^3 and Lelong number probes.

Potentials are functions on C^4 \\ 0 invariant under scaling. With the
Fubini-Study class the minimal-singularity potential is constant, so the
first potential is

    phi1(x) = (log|F(x)| - d log|x|) / lam

and the n-th one adds lam^{-j} (phi1 - c) o f^j for j < n, where c bounds
phi1 from above so that every increment is <= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .maps import RationalMap, compose, reduce
from .polynomials import Poly

__all__ = [
    "PotentialError",
    "PotentialField",
    "sphere_samples",
    "log_norm",
    "phi1",
    "phi1_values",
    "phi1_upper_bound",
    "green_iterate",
    "green_potential",
    "raw_iterate",
    "invariance_residual",
    "lelong_probe",
    "squaring_green",
    "LelongEstimate",
]

PROXIMITY_CUTOFF = 1e-30
LOG_CUTOFF = np.log(PROXIMITY_CUTOFF)
CONVERGED_DELTA = 1e-6
DEFAULT_RADII = tuple(2.0 ** -k for k in range(4, 11))


class PotentialError(ValueError):
    """Raised with ``code`` INDETERMINATE_PROXIMITY, UNSTABLE_MAP, BAD_LAMBDA,
    NOT_CONVERGED or UNRELIABLE."""

    def __init__(self, code: str, msg: str):
        super().__init__(f"{code}: {msg}")
        self.code = code


def sphere_samples(n: int, seed: int) -> np.ndarray:
    """``n`` points uniformly distributed on the unit sphere of C^4."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))
    return z / np.linalg.norm(z, axis=1)[:, None]


def _log_abs_poly(p: Poly, logabs: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """log|p(x)| from log|x_i| and arg x_i, without forming huge powers."""
    if p.is_zero():
        return np.full(logabs.shape[0], -np.inf)
    exps = np.array(list(p.terms.keys()), dtype=float)  # (T, 4)
    coeffs = np.array([float(c) for c in p.terms.values()])
    with np.errstate(invalid="ignore"):
        # 0 * log 0 -> 0 for absent variables
        la = np.where(exps[None, :, :] == 0, 0.0, exps[None, :, :] * logabs[:, None, :]).sum(-1)
    la = la + np.log(np.abs(coeffs))[None, :]
    ang = (exps[None, :, :] * phase[:, None, :]).sum(-1) + np.where(coeffs < 0, np.pi, 0.0)[None, :]
    top = np.max(la, axis=1)
    finite = np.isfinite(top)
    safe_top = np.where(finite, top, 0.0)
    s = np.sum(np.exp(la - safe_top[:, None]) * np.exp(1j * ang), axis=1)
    with np.errstate(divide="ignore"):
        out = safe_top + np.log(np.abs(s))
    return np.where(finite, out, -np.inf)


def log_norm(f: RationalMap, pts: np.ndarray) -> np.ndarray:
    """log of the Euclidean norm of the lift F at each point."""
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(pts))
    phase = np.angle(pts)
    comps = np.stack([_log_abs_poly(c, logabs, phase) for c in f.components], axis=1)
    top = np.max(comps, axis=1)
    finite = np.isfinite(top)
    safe = np.where(finite, top, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = safe + 0.5 * np.log(np.sum(np.exp(2 * (comps - safe[:, None])), axis=1))
    return np.where(finite, out, -np.inf)


def phi1_values(f: RationalMap, lam: float, pts) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized phi1; returns (values, mask) with mask marking points too
    close to the indeterminacy locus (|F(x)| / |x|^d < 1e-30)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    d = f.degree
    lx = np.log(np.linalg.norm(pts, axis=1))
    rel = log_norm(f, pts) - d * lx
    mask = ~(rel >= LOG_CUTOFF)
    vals = np.where(mask, np.nan, rel / lam)
    return vals, mask


def phi1(f: RationalMap, lam: float, x) -> float:
    x = np.asarray(x, dtype=complex)
    if not np.any(x):
        raise ValueError("the zero vector is not a point of P^3")
    vals, mask = phi1_values(f, lam, x[None, :])
    if mask[0]:
        raise PotentialError("INDETERMINATE_PROXIMITY", "point lies within the indeterminacy cutoff")
    return float(vals[0])


def phi1_upper_bound(f: RationalMap, lam: float) -> float:
    """(1/lam) log(sum of |coefficients| of all components).

    Since |monomial(x)| <= |x|^d, |F(x)| <= sum_i |F_i(x)| <= (sum |c|) |x|^d,
    so this bounds phi1 from above on all of P^3.
    """
    total = sum(abs(c) for p in f.components for c in p.terms.values())
    return float(np.log(total)) / lam


def _normalize(pts):
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def _orbit_step(f: RationalMap, pts: np.ndarray):
    """One application of the lift, renormalized to the unit sphere."""
    out = np.stack([c.evaluate(pts) for c in f.components], axis=1)
    norms = np.linalg.norm(out, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return out / norms[:, None]


@dataclass
class PotentialField:
    map_id: str
    lam: float
    samples: np.ndarray
    values: np.ndarray          # values[n-1, s] = phi_n(sample s), unshifted
    shifted: np.ndarray         # shifted[n-1, s] = tilde phi_n(sample s)
    sup_deltas: list[float]     # sup_deltas[n-1] = sup_s |tilde phi_{n+1} - tilde phi_n|
    shift: float
    seed: int | None
    mask: np.ndarray
    method: str = "green"
    f: RationalMap | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def u(self) -> np.ndarray:
        """Final unshifted potential at the samples."""
        return self.values[-1]

    @property
    def masked_count(self) -> int:
        return int(self.mask.sum())

    def decay_ratios(self) -> list[float]:
        """sup_deltas[n] / sup_deltas[n-1], indexed from n = 2."""
        d = self.sup_deltas
        return [d[k] / d[k - 1] if d[k - 1] else 0.0 for k in range(1, len(d))]

    def monotone(self, slack: float = 1e-12) -> bool:
        live = ~self.mask
        diffs = np.diff(self.shifted[:, live], axis=0)
        return bool(np.all(diffs <= slack))

    def evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        """Function computing the same final potential at new points."""
        if self.f is None:
            raise ValueError("field has no map attached")
        f, lam, N = self.f, self.lam, self.N
        if self.method == "raw":
            return lambda pts: _raw_values(f, lam, N, pts)[0][-1]
        return lambda pts: green_potential(f, lam, pts, N)

    def csv_rows(self) -> list[tuple]:
        rows = []
        for n, dlt in enumerate(self.sup_deltas, 1):
            rows.append((n, dlt, self.masked_count))
        return rows

    def to_json(self) -> dict:
        return {
            "map": self.map_id,
            "lambda": self.lam,
            "N": self.N,
            "n_samples": int(self.samples.shape[0]),
            "seed": self.seed,
            "shift": self.shift,
            "sup_deltas": list(self.sup_deltas),
            "masked_count": self.masked_count,
            "method": self.method,
        }


def _check_green_preconditions(f: RationalMap, lam: float):
    if lam <= 1:
        raise PotentialError("BAD_LAMBDA", f"lambda must exceed 1 (got {lam})")
    if not (f.flags.get("holomorphic") or f.flags.get("is_1_stable_downstairs")):
        raise PotentialError("UNSTABLE_MAP", f"{f.name} is not known to be 1-stable; use raw_iterate")
    d1 = f.degree
    if abs(lam - d1) > 1e-9:
        raise PotentialError("BAD_LAMBDA", f"lambda {lam} differs from deg f = {d1}")


def _green_orbit(f: RationalMap, lam: float, pts: np.ndarray, N: int, shift: float | None):
    """phi1 along the orbit of each point; returns (P, mask, shift)."""
    x = _normalize(np.asarray(pts, dtype=complex))
    P = np.empty((N, x.shape[0]))
    mask = np.zeros(x.shape[0], dtype=bool)
    for j in range(N):
        v, m = phi1_values(f, lam, np.where(mask[:, None], 1.0, x))
        mask |= m
        P[j] = np.where(mask, 0.0, v)
        if j + 1 < N:
            x = _orbit_step(f, np.where(mask[:, None], 1.0, x))
    if shift is None:
        shift = phi1_upper_bound(f, lam)
    return P, mask, shift


def green_iterate(f: RationalMap, lam: float, N: int, n_samples: int = 512, seed: int = 7,
                  samples: np.ndarray | None = None) -> PotentialField:
    """Potentials phi_1..phi_N at fixed-seed sphere samples.

    phi_n = phi_{n-1} + lam^{-(n-1)} (phi1 - c) o f^{n-1}; for a 1-stable map
    f^{n-1} evaluated along the orbit agrees with the reduced iterate.
    ``values`` keeps the unshifted potentials (c = 0), whose limit is the
    Green function; ``shifted`` is the nonincreasing sequence.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    _check_green_preconditions(f, lam)
    pts = sphere_samples(n_samples, seed) if samples is None else _normalize(np.asarray(samples, dtype=complex))
    P, mask, c = _green_orbit(f, lam, pts, N, None)
    weights = lam ** -np.arange(N, dtype=float)
    values = np.cumsum(P * weights[:, None], axis=0)
    shifted = np.cumsum((P - c) * weights[:, None], axis=0)
    values[:, mask] = np.nan
    shifted[:, mask] = np.nan
    live = ~mask
    deltas = [float(np.max(np.abs(shifted[n, live] - shifted[n - 1, live]))) if live.any() else 0.0
              for n in range(1, N)]
    return PotentialField(f.name, float(lam), pts, values, shifted, deltas, float(c),
                          seed if samples is None else None, mask, "green", f)


def green_potential(f: RationalMap, lam: float, pts, N: int, shifted: bool = False) -> np.ndarray:
    """phi_N at arbitrary points (nan where masked)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    P, mask, c = _green_orbit(f, lam, pts, N, None)
    if shifted:
        P = P - c
    weights = lam ** -np.arange(N, dtype=float)
    out = (P * weights[:, None]).sum(axis=0)
    return np.where(mask, np.nan, out)


def _raw_values(f: RationalMap, lam: float, N: int, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    lx = np.log(np.linalg.norm(pts, axis=1))
    base = reduce(f)
    g = base
    vals = np.empty((N, pts.shape[0]))
    mask = np.zeros(pts.shape[0], dtype=bool)
    for n in range(1, N + 1):
        if n > 1:
            g = reduce(compose(g, base))
        rel = log_norm(g, pts) - g.degree * lx
        # per-degree cutoff: |F_n|/|x|^{d_n} decays like e^{-c d_n} even far
        # from indeterminacy; at n = 1 this is the phi1 cutoff
        mask |= ~(rel / g.degree >= LOG_CUTOFF / base.degree)
        vals[n - 1] = rel / lam ** n
    vals[:, mask] = np.nan
    return vals, mask


def raw_iterate(f: RationalMap, lam: float, N: int, samples=None, n_samples: int = 512,
                seed: int = 7) -> PotentialField:
    """u_n = lam^{-n} (log|F_n(x)| - d_n log|x|) from the reduced iterates F_n.

    No monotonicity is claimed; meant for maps that are not 1-stable.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if lam <= 1:
        raise PotentialError("BAD_LAMBDA", f"lambda must exceed 1 (got {lam})")
    pts = sphere_samples(n_samples, seed) if samples is None else np.atleast_2d(np.asarray(samples, dtype=complex))
    vals, mask = _raw_values(f, lam, N, pts)
    live = ~mask
    deltas = [float(np.max(np.abs(vals[n, live] - vals[n - 1, live]))) if live.any() else 0.0
              for n in range(1, N)]
    return PotentialField(f.name, float(lam), pts, vals, vals.copy(), deltas, 0.0,
                          seed if samples is None else None, mask, "raw", f)


def invariance_residual(u, f: RationalMap, lam: float, points=None) -> float:
    """sup |u(x) - phi1(x) - u(f(x)) / lam| over the (unmasked) points.

    ``u`` is a converged PotentialField (its final iterate is used, and
    u o f is evaluated by the same recursion) or a callable on arrays of
    points in C^4.
    """
    if isinstance(u, PotentialField):
        if not u.sup_deltas or u.sup_deltas[-1] >= CONVERGED_DELTA:
            raise PotentialError("NOT_CONVERGED", f"last sup delta {u.sup_deltas[-1] if u.sup_deltas else None}")
        pts = u.samples if points is None else np.atleast_2d(np.asarray(points, dtype=complex))
        ufun = u.evaluator()
        ux = u.u if points is None else ufun(pts)
        live = ~u.mask if points is None else np.ones(len(pts), dtype=bool)
    else:
        if points is None:
            raise ValueError("points are required with a callable potential")
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        ufun = u
        ux = np.asarray(ufun(pts), dtype=float)
        live = np.ones(len(pts), dtype=bool)
    p1, m1 = phi1_values(f, lam, pts)
    fx = _orbit_step(f, np.where(m1[:, None], 1.0, pts))
    ufx = np.asarray(ufun(fx), dtype=float)
    r = np.abs(ux - p1 - ufx / lam)
    live = live & ~m1 & np.isfinite(r)
    return float(np.max(r[live])) if live.any() else float("nan")


def squaring_green(pts) -> np.ndarray:
    """Closed-form Green function of [x_i^2]: log max|x_i| - log|x|."""
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    return np.log(np.max(np.abs(pts), axis=1)) - np.log(np.linalg.norm(pts, axis=1))


# ---------------------------------------------------------------------------
# Lelong numbers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LelongEstimate:
    slope: float
    radii: tuple[float, ...]
    means: tuple[float, ...]
    masked_fraction: tuple[float, ...]

    def to_json(self) -> dict:
        return {"nu": self.slope, "radii": list(self.radii), "means": list(self.means),
                "masked_fraction": list(self.masked_fraction)}


def _directions(n_dirs: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    half = (n_dirs + 1) // 2
    z = rng.standard_normal((half, dim)) + 1j * rng.standard_normal((half, dim))
    z /= np.linalg.norm(z, axis=1)[:, None]
    # antipodal pairs cancel the linear term of the spherical mean
    return np.concatenate([z, -z])[:n_dirs]


def lelong_probe(u, center: Sequence[complex], radii: Sequence[float] = DEFAULT_RADII,
                 n_dirs: int = 64, seed: int = 0) -> LelongEstimate:
    """Least-squares slope of the spherical mean of ``u`` against log r.

    ``u`` is a callable on arrays of chart points (shape (m, len(center))), or
    a PotentialField, whose recursion is re-evaluated at [1 : z].
    """
    center = np.asarray(center, dtype=complex)
    radii = tuple(float(r) for r in radii)
    if any(r < 1e-5 for r in radii):
        raise ValueError("radii must be >= 1e-5")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if isinstance(u, PotentialField):
        ev = u.evaluator()
        ufun = lambda z: ev(np.concatenate([np.ones((len(z), 1)), z], axis=1))  # noqa: E731
    else:
        ufun = u
    dirs = _directions(n_dirs, center.shape[0], seed)
    means, fracs = [], []
    for r in radii:
        vals = np.asarray(ufun(center[None, :] + r * dirs), dtype=float)
        ok = np.isfinite(vals)
        frac = 1.0 - ok.mean()
        if frac > 0.2:
            raise PotentialError("UNRELIABLE", f"{frac:.0%} of directions masked at r = {r}")
        means.append(float(vals[ok].mean()))
        fracs.append(float(frac))
    logr = np.log(radii)
    A = np.vstack([logr, np.ones_like(logr)]).T
    slope = float(np.linalg.lstsq(A, np.array(means), rcond=None)[0][0])
    return LelongEstimate(slope, radii, tuple(means), tuple(fracs))
