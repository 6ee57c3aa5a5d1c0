"""Monte Carlo checks of T ^ f_*(eta) = f_*(f^*T ^ eta) in an affine chart.

Work in the chart x_0 = 1 with coordinates z in C^3. A smooth (2,2) form eta
is represented by a Hermitian 3x3 matrix field A(z), normalized so that

    dd^c u ^ eta = (2/pi) <H_u, A> dV,   <H, A> = sum_jk H[j, k] A[j, k],

with H_u[j, k] = d^2 u / dz_j dzbar_k (A = I is the Euclidean form, giving
Delta u / (2 pi)). Since H_{u o g} = Jg^T H_u(g) conj(Jg) for holomorphic g,
pullback acts as

    g^* eta  <->  |det Jg|^2 Jg^{-1} A(g) Jg^{-H}.

<H_u, A> is evaluated as (1/4) sum_k mu_k (D^2_{v_k} + D^2_{i v_k}) u over the
eigenpairs (mu_k, v_k) of A, with central second differences.

The current T = dd^c u is regularized as u_eps = s/2 log(|g|^2 + eps^2).
``pair_right`` samples the preimage region by pushing the same uniform
samples through f^{-1} and weighting with |det J_{f^{-1}}|^2, so left and
right estimates share their random numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .maps import RationalMap, evaluate_many, load_map

__all__ = [
    "WedgeError",
    "LogAbsPotential",
    "FubiniStudyPotential",
    "Bump",
    "WedgeExperiment",
    "Estimate",
    "pair_left",
    "pair_right",
    "positivity_scan",
    "push_measure",
    "chart_map",
    "chart_jacobian",
    "eta_matrix",
    "load_experiment",
    "run_experiment",
]

FD_STEP = 1e-4
GUARD_RADIUS = 1e-2
MAX_GUARD_FRACTION = 0.05
CHUNK = 50_000


class WedgeError(ValueError):
    """Raised with ``code`` GUARD_ABORT or NO_INVERSE."""

    def __init__(self, code: str, msg: str):
        super().__init__(f"{code}: {msg}")
        self.code = code


# ---------------------------------------------------------------------------
# chart calculus
# ---------------------------------------------------------------------------

def _homog(z: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ones(z.shape[:-1] + (1,), dtype=complex), z], axis=-1)


def chart_map(f: RationalMap, z: np.ndarray):
    """f in the chart: returns (w, ratio) with ratio = |F_0| / |F| at (1, z).

    A small ratio means the image leaves the chart or z is near I(f).
    """
    X = _homog(np.asarray(z, dtype=complex))
    F = np.stack([c.evaluate(X) for c in f.components], axis=-1)
    nrm = np.linalg.norm(F, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(F[..., 0]) / nrm
        w = F[..., 1:] / F[..., :1]
    return w, np.nan_to_num(ratio, nan=0.0)


def _jacobian_polys(f: RationalMap):
    return [[c.diff(j) for j in range(1, 4)] for c in f.components]


def chart_jacobian(f: RationalMap, z: np.ndarray, _cache: dict = {}) -> np.ndarray:
    """Exact complex Jacobian dw_i/dz_j of the chart map, shape (m, 3, 3)."""
    key = id(f)
    if key not in _cache or _cache[key][0] is not f:
        _cache[key] = (f, _jacobian_polys(f))
    dF = _cache[key][1]
    X = _homog(np.asarray(z, dtype=complex))
    F = [c.evaluate(X) for c in f.components]
    D = [[dF[i][j].evaluate(X) for j in range(3)] for i in range(4)]
    J = np.empty(X.shape[:-1] + (3, 3), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(1, 4):
            for j in range(3):
                J[..., i - 1, j] = (D[i][j] * F[0] - F[i] * D[0][j]) / F[0] ** 2
    return J


# ---------------------------------------------------------------------------
# potentials, forms and test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogAbsPotential:
    """u = sign * log|g| with g a polynomial in the chart coordinates."""

    terms: tuple[tuple[complex, tuple[int, int, int]], ...]
    sign: int = 1

    @classmethod
    def linear(cls, coeffs: Sequence[complex], sign: int = 1) -> "LogAbsPotential":
        """g = a_0 + a_1 z_1 + a_2 z_2 + a_3 z_3."""
        exps = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
        return cls(tuple((complex(a), e) for a, e in zip(coeffs, exps) if a != 0), sign)

    def g(self, z: np.ndarray) -> np.ndarray:
        out = np.zeros(z.shape[:-1], dtype=complex)
        for a, e in self.terms:
            t = np.full(z.shape[:-1], a)
            for k, p in enumerate(e):
                if p:
                    t = t * z[..., k] ** p
            out = out + t
        return out

    def regularized(self, eps: float) -> Callable[[np.ndarray], np.ndarray]:
        e2 = float(eps) ** 2
        return lambda z: self.sign * 0.5 * np.log(np.abs(self.g(z)) ** 2 + e2)

    def exact(self, z):
        return self.sign * np.log(np.abs(self.g(z)))

    def to_json(self):
        return {"kind": "log_abs", "sign": self.sign,
                "terms": [{"coeff": [a.real, a.imag], "exps": list(e)} for a, e in self.terms]}


@dataclass(frozen=True)
class FubiniStudyPotential:
    """u = (sign/2) log(1 + |z|^2); smooth, so eps is ignored."""

    sign: int = 1

    def regularized(self, eps: float):
        return lambda z: self.sign * 0.5 * np.log1p(np.sum(np.abs(z) ** 2, axis=-1))

    def to_json(self):
        return {"kind": "fubini_study", "sign": self.sign}


def eta_matrix(kind: str, z: np.ndarray) -> np.ndarray:
    """Hermitian matrix field of a named (2,2) form at chart points z."""
    m = z.shape[0]
    if kind == "euclidean":
        return np.broadcast_to(np.eye(3, dtype=complex), (m, 3, 3)).copy()
    if kind == "zero":
        return np.zeros((m, 3, 3), dtype=complex)
    if kind == "fubini_study":
        # square of omega_FS: <H, A> must be the cofactor contraction of H with
        # G[j, k] = d_j dbar_k log(1 + |z|^2), so A = conj(det(G) G^{-1})
        r2 = 1.0 + np.sum(np.abs(z) ** 2, axis=-1)
        G = (np.eye(3)[None] * r2[:, None, None] - z[:, :, None].conj() * z[:, None, :]) / r2[:, None, None] ** 2
        return (np.linalg.det(G)[:, None, None] * np.linalg.inv(G)).conj()
    raise ValueError(f"unknown eta {kind!r}")


_POSITIVE_ETA = {"euclidean", "fubini_study", "zero"}


@dataclass(frozen=True)
class Bump:
    """Product of smooth bumps exp(-1/(1-t^2)) in each real coordinate.

    Supported on the box center +- half_width (real and imaginary parts).
    """

    center: tuple[complex, complex, complex]
    half_width: float
    zero: bool = False

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.zero:
            return np.zeros(z.shape[:-1])
        c = np.asarray(self.center, dtype=complex)
        t = np.concatenate([(z - c).real, (z - c).imag], axis=-1) / self.half_width
        inside = np.all(np.abs(t) < 1, axis=-1)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            b = np.exp(-1.0 / (1.0 - np.minimum(t * t, 1.0)))
        return np.where(inside, np.prod(b, axis=-1), 0.0)

    @property
    def box(self):
        c = np.asarray(self.center, dtype=complex)
        lo = np.concatenate([c.real, c.imag]) - self.half_width
        hi = np.concatenate([c.real, c.imag]) + self.half_width
        return lo, hi

    def to_json(self):
        return {"center": [[c.real, c.imag] for c in map(complex, self.center)],
                "half_width": self.half_width, "zero": self.zero}


@dataclass
class WedgeExperiment:
    map: RationalMap
    potential: LogAbsPotential | FubiniStudyPotential
    eta: str = "euclidean"
    test_fn: Bump = field(default_factory=lambda: Bump((0j, 0j, 0j), 0.5))
    eps_schedule: tuple[float, ...] = (1e-1, 3e-2, 1e-2)
    n_samples: int = 100_000
    seed: int = 0
    region: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_schedule)
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_schedule must be positive and strictly decreasing")
        self.eps_schedule = eps
        if self.region is None:
            self.region = self.test_fn.box

    @property
    def volume(self) -> float:
        lo, hi = self.region
        return float(np.prod(hi - lo))

    def samples(self, start: int, stop: int) -> np.ndarray:
        """Uniform chart samples [start, stop) of the fixed-seed stream."""
        key = (self.seed, self.n_samples)
        if getattr(self, "_cache_key", None) != key or stop > len(self._uniform):
            rng = np.random.default_rng(self.seed)
            self._uniform = rng.random((max(stop, self.n_samples), 6))
            self._cache_key = key
        lo, hi = self.region
        x = lo + (hi - lo) * self._uniform[start:stop]
        return x[:, :3] + 1j * x[:, 3:]

    def to_json(self) -> dict:
        lo, hi = self.region
        return {"map": self.map.name, "potential": self.potential.to_json(), "eta": self.eta,
                "test_fn": self.test_fn.to_json(), "eps_schedule": list(self.eps_schedule),
                "n_samples": self.n_samples, "seed": self.seed,
                "region": {"lo": lo.tolist(), "hi": hi.tolist()}}


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_samples: int
    guarded: int
    min_guard_ratio: float

    def to_json(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples,
                "guarded": self.guarded, "min_guard_ratio": self.min_guard_ratio}


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def _trace_density(U: Callable, z: np.ndarray, A: np.ndarray, h: float) -> np.ndarray:
    """(2/pi) <H_U, A> by directional second differences along A's eigenvectors."""
    mu, V = np.linalg.eigh(A)  # columns of V are eigenvectors
    u0 = U(z)
    acc = np.zeros(z.shape[0])
    for k in range(3):
        v = V[:, :, k]
        for d in (v, 1j * v):
            acc = acc + mu[:, k] * (U(z + h * d) - 2.0 * u0 + U(z - h * d)) / (h * h)
    return acc / (2.0 * np.pi)


def pushed_eta(exp: WedgeExperiment, z: np.ndarray):
    """A-matrix of f_* eta = (f^{-1})^* eta at z, plus (g(z), |det Jg|^2, guard ratio)."""
    inv = exp.map.inverse_map
    if inv is None:
        raise WedgeError("NO_INVERSE", f"{exp.map.name} has no declared inverse")
    w, ratio = chart_map(inv, z)
    Jg = chart_jacobian(inv, z)
    good = (ratio >= GUARD_RADIUS) & np.all(np.isfinite(Jg), axis=(-2, -1))
    Jg = np.where(good[:, None, None], Jg, np.eye(3))
    w = np.where(good[:, None], w, z)
    det2 = np.abs(np.linalg.det(Jg)) ** 2
    Aw = eta_matrix(exp.eta, w)
    Jinv = np.linalg.inv(Jg)
    A = det2[:, None, None] * Jinv @ Aw @ Jinv.conj().transpose(0, 2, 1)
    return A, w, det2, good, ratio


def _guard_check(good: np.ndarray, where: str):
    frac = 1.0 - good.mean() if good.size else 0.0
    if frac > MAX_GUARD_FRACTION:
        raise WedgeError("GUARD_ABORT", f"{frac:.1%} of samples inside the indeterminacy guard ({where})")


def _left_chunk(exp: WedgeExperiment, z, eps, h):
    U = exp.potential.regularized(eps)
    A, _, _, good, ratio = pushed_eta(exp, z)
    beta = exp.test_fn(z)
    dens = _trace_density(U, z, A, h)
    vals = np.where(good, beta * dens, 0.0)
    return vals, good, ratio


def _right_chunk(exp: WedgeExperiment, z, eps, h):
    inv = exp.map.inverse_map
    if inv is None:
        raise WedgeError("NO_INVERSE", f"{exp.map.name} has no declared inverse")
    u = exp.potential.regularized(eps)
    f = exp.map
    w, ratio_g = chart_map(inv, z)
    Jg = chart_jacobian(inv, z)
    good = (ratio_g >= GUARD_RADIUS) & np.all(np.isfinite(Jg), axis=(-2, -1))
    w = np.where(good[:, None], w, z)
    det2 = np.where(good, np.abs(np.linalg.det(np.where(good[:, None, None], Jg, np.eye(3)))) ** 2, 0.0)
    fw, ratio_f = chart_map(f, w)
    good &= ratio_f >= GUARD_RADIUS
    fw = np.where(good[:, None], fw, z)

    def U(x):
        y, _ = chart_map(f, x)
        return u(y)

    beta = exp.test_fn(fw)
    A = eta_matrix(exp.eta, w)
    dens = _trace_density(U, w, A, h)
    vals = np.where(good, beta * dens * det2, 0.0)
    return vals, good, np.minimum(ratio_g, ratio_f)


def _integrate(exp: WedgeExperiment, eps: float, chunk_fn, h: float) -> Estimate:
    n = exp.n_samples
    parts, goods, ratios = [], [], []
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        z = exp.samples(start, stop)
        vals, good, ratio = chunk_fn(exp, z, eps, h)
        parts.append(vals)
        goods.append(good)
        ratios.append(ratio)
    vals = np.concatenate(parts)
    good = np.concatenate(goods)
    _guard_check(good, chunk_fn.__name__.strip("_").split("_")[0])
    vol = exp.volume
    mean = float(np.sum(vals) / n)
    std = float(np.std(vals))
    ratio = np.concatenate(ratios)
    return Estimate(vol * mean, vol * std / np.sqrt(n), n, int((~good).sum()), float(np.min(ratio)))


def pair_left(exp: WedgeExperiment, eps: float, h: float = FD_STEP) -> Estimate:
    """Estimate of the integral of beta * dd^c u_eps ^ f_* eta over the region."""
    return _integrate(exp, eps, _left_chunk, h)


def pair_right(exp: WedgeExperiment, eps: float, h: float = FD_STEP) -> Estimate:
    """Estimate of the integral of (beta o f) * dd^c(u_eps o f) ^ eta over f^{-1}(region)."""
    return _integrate(exp, eps, _right_chunk, h)


@dataclass(frozen=True)
class PositivityReport:
    fraction: float
    n_checked: int
    min_density: float
    max_delta: float

    def to_json(self):
        return {"fraction": self.fraction, "n_checked": self.n_checked,
                "min_density": self.min_density, "max_delta": self.max_delta}


def positivity_scan(exp: WedgeExperiment, eps: float, h: float = FD_STEP,
                    n_samples: int | None = None) -> PositivityReport:
    """Fraction of samples in supp(beta) where the density of dd^c u_eps ^ eta
    is >= -delta, delta = Richardson discrepancy between steps h and h/2."""
    n = exp.n_samples if n_samples is None else n_samples
    U = exp.potential.regularized(eps)
    ok = checked = 0
    min_d = np.inf
    max_delta = 0.0
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        z = exp.samples(start, stop)
        live = exp.test_fn(z) > 0
        z = z[live]
        if not len(z):
            continue
        A = eta_matrix(exp.eta, z)
        d1 = _trace_density(U, z, A, h)
        d2 = _trace_density(U, z, A, h / 2)
        # truncation error of the h/2 estimate is ~ (d1 - d2) / 3; pad to 4/3
        delta = 4.0 / 3.0 * np.abs(d1 - d2)
        ok += int(np.sum(d2 >= -delta))
        checked += len(z)
        min_d = min(min_d, float(d2.min()))
        max_delta = max(max_delta, float(delta.max()))
    if checked == 0:
        return PositivityReport(1.0, 0, 0.0, 0.0)
    return PositivityReport(ok / checked, checked, min_d, max_delta)


# ---------------------------------------------------------------------------
# pushforward of measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PushedMeasure:
    points: np.ndarray
    weights: np.ndarray
    lost_mass: float
    total_in: float

    def to_json(self):
        return {"total_in": self.total_in, "total_out": float(np.sum(self.weights)),
                "lost_mass": self.lost_mass, "n_points": int(len(self.weights))}


def push_measure(f: RationalMap, points, weights) -> PushedMeasure:
    """Transport (point, weight) pairs by f; weight on indeterminate points is lost."""
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    w = np.asarray(weights, dtype=float)
    if w.shape != (pts.shape[0],):
        raise ValueError("one weight per point")
    img, mask = evaluate_many(f, pts)
    total = float(np.sum(w))
    lost = float(np.sum(w[mask]))
    return PushedMeasure(img[~mask], w[~mask], lost, total)


# ---------------------------------------------------------------------------
# experiment files
# ---------------------------------------------------------------------------

def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(x)


def experiment_from_json(data: dict) -> WedgeExperiment:
    f = load_map(data["map"])
    p = data.get("potential", {"kind": "fubini_study"})
    kind = p.get("kind")
    if kind == "log_abs":
        if "linear" in p:
            pot = LogAbsPotential.linear([_complex(a) for a in p["linear"]], int(p.get("sign", 1)))
        else:
            pot = LogAbsPotential(tuple((_complex(t["coeff"]), tuple(int(e) for e in t["exps"]))
                                        for t in p["terms"]), int(p.get("sign", 1)))
    elif kind == "fubini_study":
        pot = FubiniStudyPotential(int(p.get("sign", 1)))
    else:
        raise ValueError(f"potential.kind: unknown {kind!r}")
    tf = data.get("test_fn", {})
    if tf == "zero":
        bump = Bump((0j, 0j, 0j), 0.5, zero=True)
    else:
        bump = Bump(tuple(_complex(c) for c in tf.get("center", [0, 0, 0])), float(tf.get("half_width", 0.5)),
                    bool(tf.get("zero", False)))
    eta = data.get("eta", "euclidean")
    if eta not in _POSITIVE_ETA:
        raise ValueError(f"eta: unknown {eta!r}")
    region = None
    if "region" in data:
        region = (np.asarray(data["region"]["lo"], dtype=float), np.asarray(data["region"]["hi"], dtype=float))
    return WedgeExperiment(f, pot, eta, bump, tuple(data.get("eps_schedule", (1e-1, 3e-2, 1e-2))),
                           int(data.get("n_samples", 100_000)), int(data.get("seed", 0)), region)


def load_experiment(path: str | Path) -> WedgeExperiment:
    return experiment_from_json(json.loads(Path(path).read_text()))


def run_experiment(exp: WedgeExperiment) -> dict:
    """pair_left, pair_right and positivity for every eps in the schedule."""
    rows = []
    for eps in exp.eps_schedule:
        left = pair_left(exp, eps)
        right = pair_right(exp, eps)
        pos = positivity_scan(exp, eps, n_samples=min(exp.n_samples, 20_000))
        comb = float(np.hypot(left.stderr, right.stderr))
        diff = abs(left.value - right.value)
        tol = max(0.1 * max(abs(left.value), abs(right.value)), 3 * comb)
        rows.append({"eps": eps, "left": left.to_json(), "right": right.to_json(),
                     "difference": diff, "tolerance": tol, "agree": diff <= tol,
                     "positivity": pos.to_json()})
    return {"experiment": exp.to_json(), "results": rows}
