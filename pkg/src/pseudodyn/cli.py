"""``pseudodyn`` command line front end.

Reports are JSON (sorted keys) or CSV, carry the run config and library
version, and contain no wall-clock fields, so reruns are byte-identical.
Exit codes: 0 success, 2 validation error, 3 numerical guard abort.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cohomology import Class11, Class22, pair
from .degrees import (
    DegreeSequence,
    check_log_concavity,
    degree_sequence,
    dyn_degree_estimate,
    dynamical_degrees,
    sequence_csv,
    spectral_radius,
    stability_report,
)
from .linalg import matmul, matvec
from .maps import MapFormatError, RationalMap, catalog, load_map, map_to_json
from .potentials import PotentialError, green_iterate, invariance_residual, raw_iterate
from .spectral import (
    SpectralError,
    check_pseudo_identities,
    holomorphic_like_check,
    perron_pair,
    self_intersection_zero_solutions,
)
from .wedge import WedgeError, experiment_from_json, run_experiment

COMMANDS = ("catalog", "degrees", "stability", "invariants", "green", "wedge", "report")
NMAX_LIMIT = 8
SAMPLES_LIMIT = 65536
VALIDATION_CODES = {"BAD_LAMBDA", "UNSTABLE_MAP", "NO_INVERSE"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str
    map: str | None = None
    exp: str | None = None
    out: str | None = None
    nmax: int = 6
    N: int = 25
    samples: int = 512
    seed: int = 7
    eps: list[float] = field(default_factory=list)
    threads: int = 1

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        if not 1 <= self.nmax <= NMAX_LIMIT:
            raise ConfigError("nmax", f"must be in [1, {NMAX_LIMIT}]")
        if not 1 <= self.samples <= SAMPLES_LIMIT:
            raise ConfigError("samples", f"must be in [1, {SAMPLES_LIMIT}]")
        if self.N < 2:
            raise ConfigError("N", "must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        if any(e <= 0 for e in self.eps) or any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps", "must be positive and strictly decreasing")
        if self.command in ("degrees", "stability", "invariants", "green", "report") and not self.map:
            raise ConfigError("map", "required for this command")
        if self.command == "wedge" and not self.exp:
            raise ConfigError("exp", "required for wedge")
        if self.exp and not Path(self.exp).exists():
            raise ConfigError("exp", f"{self.exp!r} not found")

    def to_json(self) -> dict:
        return asdict(self)


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (Class11, Class22)):
        return x.to_json()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _dump(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _envelope(cfg: RunConfig, result) -> dict:
    return {"config": cfg.to_json(), "version": __version__, "result": result}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cached_sequence(f: RationalMap, nmax: int):
    """degree_sequence memoized under $PSEUDODYN_CACHE when set."""
    cache = os.environ.get("PSEUDODYN_CACHE")
    if not cache:
        return degree_sequence(f, nmax)
    key = hashlib.sha256(json.dumps(map_to_json(f), sort_keys=True).encode()).hexdigest()[:16]
    path = Path(cache) / f"degrees-{key}-{nmax}.json"
    if path.exists():
        data = json.loads(path.read_text())
        return DegreeSequence(data["map_id"], tuple(tuple(e) for e in data["entries"]), 1, data["truncated"])
    seq = degree_sequence(f, nmax)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"map_id": seq.map_id, "entries": seq.entries, "truncated": seq.truncated}))
    return seq


def cmd_catalog(cfg: RunConfig) -> str:
    rows = []
    for name, f in catalog().items():
        rows.append({"name": name, "degree": f.degree, "flags": f.flags,
                     "has_action": f.action is not None,
                     "has_inverse": f.inverse_map is not None})
    return _dump(_envelope(cfg, rows))


def _lambda1(f: RationalMap, seq) -> tuple[float, str]:
    """lambda_1 from the map's data, else the sequence estimate (uncertified)."""
    try:
        return float(dynamical_degrees(f)[1]), "exact_data"
    except ValueError:
        return float(dyn_degree_estimate(seq).estimate), "sequence_estimate"


def cmd_degrees(cfg: RunConfig) -> str:
    f = load_map(cfg.map)
    seq = _cached_sequence(f, cfg.nmax)
    lam1, _ = _lambda1(f, seq)
    header = "# " + json.dumps({"config": cfg.to_json(), "version": __version__}, sort_keys=True) + "\n"
    return header + sequence_csv(seq, rho=lam1)


def cmd_stability(cfg: RunConfig) -> str:
    f = load_map(cfg.map)
    return _dump(_envelope(cfg, stability_report(f, cfg.nmax).to_json()))


def _invariants(f: RationalMap) -> dict:
    try:
        lams = dynamical_degrees(f)
    except ValueError as exc:
        return {"dynamical_degrees": None, "note": str(exc), "cohomology": None}
    out = {"dynamical_degrees": list(lams),
           "log_concavity": check_log_concavity(lams).to_json()}
    if f.monomial_matrix is not None:
        out["spectral_radius"] = spectral_radius(f.monomial_matrix).to_json()
    act = f.action
    if act is None:
        out["cohomology"] = None
        return out
    ids = check_pseudo_identities(act)
    space = act.space
    out["pseudo_identities"] = ids
    out["M11_squared_is_identity"] = _is_identity(matmul(act.M11, act.M11))
    out["M22_squared_is_identity"] = _is_identity(matmul(act.M22, act.M22))
    out["spectral_radius"] = spectral_radius(act.M11).to_json()
    try:
        pairres = perron_pair(act)
        fallback = False
    except SpectralError as exc:
        if exc.code != "NONSIMPLE_DOMINANT":
            raise
        pairres = perron_pair(act, cesaro_fallback=True)
        fallback = True
    out["invariant_pair"] = pairres.to_json()
    out["invariant_pair"]["cesaro_fallback"] = fallback
    sols = self_intersection_zero_solutions(space)
    out["holomorphic_like"] = holomorphic_like_check(act, sols[0])
    if f.name == "cremona_j" and space.n_points == 4:
        C = space.h() - space.e(3) - space.e(4)
        D = space.h() - space.e(1) - space.e(2)
        pushed = Class22(space, matvec(act.M22, C.coeffs))
        omega = space.H() * 3 - space.E(1) - space.E(2) - space.E(3) - space.E(4)
        val = pair(Class11(space, matvec(act.M11, omega.coeffs)), C)
        out["cremona_checks"] = {
            "M22_C_equals_minus_D": "pass" if pushed == -D else "fail",
            "pullback_ample_dot_C": str(val),
            "negative_pairing": "pass" if val < 0 else "fail",
        }
    return out


def _is_identity(M) -> str:
    n = len(M)
    return "pass" if all(M[i][j] == (1 if i == j else 0) for i in range(n) for j in range(n)) else "fail"


def cmd_invariants(cfg: RunConfig) -> str:
    f = load_map(cfg.map)
    return _dump(_envelope(cfg, _invariants(f)))


def cmd_green(cfg: RunConfig) -> str:
    f = load_map(cfg.map)
    lam, source = _lambda1(f, _cached_sequence(f, cfg.nmax))
    if f.flags.get("holomorphic") or f.flags.get("is_1_stable_downstairs"):
        lam, source = float(f.degree), "degree"
        field_ = green_iterate(f, lam, cfg.N, n_samples=cfg.samples, seed=cfg.seed)
    else:
        field_ = raw_iterate(f, lam, cfg.N, n_samples=cfg.samples, seed=cfg.seed)
    res = field_.to_json()
    res["lambda_source"] = source
    res["monotone"] = field_.monotone()
    res["decay_ratios"] = field_.decay_ratios()
    try:
        res["invariance_residual"] = invariance_residual(field_, f, lam)
    except PotentialError as exc:
        res["invariance_residual"] = None
        res["invariance_note"] = str(exc)
    live = ~field_.mask
    res["final_values"] = [float(v) for v in field_.u[live]]
    return _dump(_envelope(cfg, res))


def cmd_wedge(cfg: RunConfig) -> str:
    try:
        data = json.loads(Path(cfg.exp).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("exp", f"invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("exp", "expected an object")
    if cfg.eps:
        data["eps_schedule"] = cfg.eps
    n = int(data.get("n_samples", cfg.samples))
    if not 1 <= n <= SAMPLES_LIMIT:
        raise ConfigError("n_samples", f"must be in [1, {SAMPLES_LIMIT}]")
    data["n_samples"] = n
    data.setdefault("seed", cfg.seed)
    try:
        exp = experiment_from_json(data)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), "missing") from None
    except ValueError as exc:
        if isinstance(exc, (MapFormatError, WedgeError)):
            raise
        raise ConfigError("exp", str(exc)) from None
    return _dump(_envelope(cfg, run_experiment(exp)))


def cmd_report(cfg: RunConfig) -> str:
    f = load_map(cfg.map)
    seq = _cached_sequence(f, cfg.nmax)
    res = {
        "map": map_to_json(f),
        "degrees": [list(e) for e in seq.entries],
        "submultiplicative": seq.submultiplicative(),
        "estimate": asdict(dyn_degree_estimate(seq)),
        "invariants": _invariants(f),
    }
    if f.action is not None or f.monomial_matrix is not None or f.flags.get("holomorphic"):
        res["stability"] = stability_report(f, cfg.nmax).to_json()
    return _dump(_envelope(cfg, res))


HANDLERS = {
    "catalog": cmd_catalog,
    "degrees": cmd_degrees,
    "stability": cmd_stability,
    "invariants": cmd_invariants,
    "green": cmd_green,
    "wedge": cmd_wedge,
    "report": cmd_report,
}


def _eps_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("comma-separated floats expected") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudodyn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--map", help="catalog name or JSON map file")
    p.add_argument("--exp", help="wedge experiment JSON")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--nmax", type=int, default=6, help="number of iterates for degree sequences (1..8)")
    p.add_argument("--N", type=int, default=25, help="Green recursion depth")
    p.add_argument("--samples", type=int, default=512, help="sample points (1..65536)")
    p.add_argument("--seed", type=int, default=7, help="RNG seed")
    p.add_argument("--eps", type=_eps_list, default=[], help="comma-separated decreasing eps schedule for wedge")
    p.add_argument("--threads", type=int, default=1, help="recorded in the report; execution is single-threaded")
    return p


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
        text = HANDLERS[cfg.command](cfg)
    except (ConfigError, MapFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WedgeError, PotentialError, SpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.code in VALIDATION_CODES else 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(args))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
