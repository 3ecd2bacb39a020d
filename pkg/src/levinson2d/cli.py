"""Command-line front end.

    levinson2d <verb> --config run.cfg [--out DIR] [--workers N] [--seed N]

Verbs: phase-shifts, bound-states, thresholds, levinson, hexagon, sweep.

The configuration is a flat ``key = value`` file with dotted keys, e.g.::

    potential.kind = square_well
    potential.depth = 5.783185962946784
    grid.count = 2048

Exit codes: 0 pass, 1 usage or configuration error, 2 numerical failure,
3 near-threshold (identity not asserted).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .hexagon_symbol import (
    S_SAMPLES,
    InconclusiveWindingError,
    hexagon_winding,
    radial_p_projection,
)
from .levinson import LevinsonConfig, build_ssf, regularized_phase, verify_identity
from .potentials import (
    PotentialFileError,
    RadialPotential,
    gaussian,
    load_tabulated,
    square_well,
    zero_potential,
)
from .radial_engine import (
    TAU_RES,
    build_phase_table,
    channel_bound_count,
    count_bound_states,
)

log = logging.getLogger("levinson2d")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_NEAR = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

DEFAULTS = {
    "potential.kind": "square_well",
    "potential.depth": "1.0",
    "potential.width": "1.0",
    "potential.cutoff_widths": "8.0",
    "potential.file": "",
    "ell_max": "12",
    "grid.lambda_min": "1e-5",
    "grid.lambda_max": "1e4",
    "grid.count": "2048",
    "grid.scale": "depth",
    "tolerance.tau_res": repr(TAU_RES),
    "tolerance.residual": "0.02",
    "hexagon.s_samples": str(S_SAMPLES),
    "oracle.check": "true",
    "sweep.depth_min": "0.1",
    "sweep.depth_max": "20.0",
    "sweep.count": "50",
    "emit.csv": "true",
    "emit.json": "true",
    "emit.plotdata": "true",
}

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    depth: float
    width: float
    cutoff_widths: float
    file: str
    ell_max: int
    lambda_min: float
    lambda_max: float
    count: int
    scale: str
    tau_res: float
    residual_tol: float
    s_samples: int
    check_oracle: bool
    sweep_min: float
    sweep_max: float
    sweep_count: int
    emit_csv: bool
    emit_json: bool
    emit_plotdata: bool
    seed: int = 0

    @classmethod
    def from_mapping(cls, raw: dict, seed: int = 0) -> "RunConfig":
        unknown = sorted(set(raw) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        v = {**DEFAULTS, **raw}

        def num(key, typ=float):
            try:
                return typ(v[key])
            except ValueError:
                raise ConfigError(f"{key}: cannot read {v[key]!r} as {typ.__name__}") from None

        def flag(key):
            try:
                return _BOOL[v[key].strip().lower()]
            except KeyError:
                raise ConfigError(f"{key}: expected true/false, got {v[key]!r}") from None

        cfg = cls(
            kind=v["potential.kind"].strip(), depth=num("potential.depth"),
            width=num("potential.width"), cutoff_widths=num("potential.cutoff_widths"),
            file=v["potential.file"].strip(), ell_max=num("ell_max", int),
            lambda_min=num("grid.lambda_min"), lambda_max=num("grid.lambda_max"),
            count=num("grid.count", int), scale=v["grid.scale"].strip(),
            tau_res=num("tolerance.tau_res"), residual_tol=num("tolerance.residual"),
            s_samples=num("hexagon.s_samples", int), check_oracle=flag("oracle.check"),
            sweep_min=num("sweep.depth_min"), sweep_max=num("sweep.depth_max"),
            sweep_count=num("sweep.count", int), emit_csv=flag("emit.csv"),
            emit_json=flag("emit.json"), emit_plotdata=flag("emit.plotdata"), seed=seed)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.kind not in ("square_well", "gaussian", "zero", "tabulated"):
            raise ConfigError(f"potential.kind: unknown kind {self.kind!r}")
        if self.kind == "tabulated" and not self.file:
            raise ConfigError("potential.file is required for a tabulated potential")
        if not self.lambda_min > 0 or not self.lambda_max > self.lambda_min:
            raise ConfigError("need 0 < grid.lambda_min < grid.lambda_max")
        if self.count < 64:
            raise ConfigError("grid.count must be at least 64")
        if self.scale not in ("depth", "absolute"):
            raise ConfigError("grid.scale must be 'depth' or 'absolute'")
        if self.ell_max < 1:
            raise ConfigError("ell_max must be at least 1")
        if not (self.tau_res > 0 and self.residual_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.width <= 0 or self.cutoff_widths <= 0:
            raise ConfigError("potential.width and potential.cutoff_widths must be positive")
        if self.s_samples < 8:
            raise ConfigError("hexagon.s_samples must be at least 8")
        if self.sweep_count < 2 or not self.sweep_max > self.sweep_min:
            raise ConfigError("sweep needs depth_min < depth_max and count >= 2")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def digest(self) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def potential(self, depth: float | None = None) -> RadialPotential:
        d = self.depth if depth is None else depth
        if self.kind == "zero":
            return zero_potential(self.width)
        if self.kind == "square_well":
            return square_well(d, self.width)
        if self.kind == "gaussian":
            return gaussian(d, self.width, self.cutoff_widths)
        return load_tabulated(self.file)

    def levinson_config(self, workers: int) -> LevinsonConfig:
        return LevinsonConfig(ell_max=self.ell_max, lam_lo=self.lambda_min,
                              lam_hi=self.lambda_max, count=self.count, tau_res=self.tau_res,
                              tolerance=self.residual_tol, workers=workers,
                              check_oracle=self.check_oracle,
                              absolute=self.scale == "absolute")


def parse_config_text(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    return dict(cp["run"])


def load_config(path: str | None, seed: int = 0) -> RunConfig:
    raw = {}
    if path:
        try:
            raw = parse_config_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    return RunConfig.from_mapping(raw, seed)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return [_jsonable(v) for v in o.tolist()]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else repr(x)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_json(path: Path, payload) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def _header(cfg: RunConfig, verb: str) -> str:
    return (f"levinson2d {__version__} verb={verb} config_sha256={cfg.digest} "
            f"kind={cfg.kind} depth={cfg.depth!r} seed={cfg.seed}")


def write_csv(path: Path, cfg: RunConfig, verb: str, columns, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {_header(cfg, verb)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _meta(cfg: RunConfig, verb: str) -> dict:
    return {"verb": verb, "version": __version__, "config_sha256": cfg.digest,
            "config": cfg.as_dict()}


def _grid_for(cfg: RunConfig, pot: RadialPotential):
    return cfg.levinson_config(1).grid(pot)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_phase_shifts(cfg: RunConfig, out: Path, workers: int) -> int:
    pot = cfg.potential()
    table = build_phase_table(pot, cfg.ell_max, _grid_for(cfg, pot), workers=workers)
    lam, delta = table.requested_view()
    cols = ["lambda"] + [f"delta_l{ell}" for ell in range(cfg.ell_max + 1)]
    if cfg.emit_csv:
        write_csv(out / "phase_shifts.csv", cfg, "phase-shifts", cols,
                  (np.concatenate([[x], d]) for x, d in zip(lam, delta.T)))
    print(f"phase shifts: {lam.size} energies x {cfg.ell_max + 1} channels, "
          f"{table.diagnostics['refined_points']} refinement points, "
          f"backend {table.diagnostics['backend']}")
    return EXIT_OK


def cmd_bound_states(cfg: RunConfig, out: Path, workers: int) -> int:
    count = count_bound_states(cfg.potential(), cfg.ell_max, cfg.tau_res,
                               check_oracle=cfg.check_oracle)
    if cfg.emit_json:
        write_json(out / "bound_states.json", {**_meta(cfg, "bound-states"), **count.as_dict()})
    print(f"bound states: {count.total} (negative {count.negative_total}), "
          f"per channel {count.nodes}, p_dim {count.p_dim}")
    return EXIT_OK


def cmd_thresholds(cfg: RunConfig, out: Path, workers: int) -> int:
    count = count_bound_states(cfg.potential(), cfg.ell_max, cfg.tau_res)
    rows = [t.as_dict() for t in count.thresholds]
    if cfg.emit_json:
        write_json(out / "thresholds.json", {**_meta(cfg, "thresholds"), "channels": rows,
                                              "p_dim": count.p_dim})
    if cfg.emit_csv:
        write_csv(out / "thresholds.csv", cfg, "thresholds",
                  ["ell", "class", "c_grow", "c_decay", "confidence", "condition"],
                  ([r["ell"], r["class"], r["c_grow"], r["c_decay"], r["confidence"],
                    r["condition"]] for r in rows))
    special = [f"l={r['ell']}:{r['class']}" for r in rows if r["class"] != "regular"]
    print("thresholds: " + (", ".join(special) if special else "all channels regular"))
    return EXIT_OK


def _status_code(status: str) -> int:
    return {"pass": EXIT_OK, "near_threshold": EXIT_NEAR}.get(status, EXIT_NUMERICAL)


def cmd_levinson(cfg: RunConfig, out: Path, workers: int) -> int:
    pot = cfg.potential()
    lcfg = cfg.levinson_config(workers)
    table = build_phase_table(pot, cfg.ell_max, lcfg.grid(pot), workers=workers)
    rep = verify_identity(pot, lcfg, table=table)
    if cfg.emit_json:
        write_json(out / "levinson.json", {**_meta(cfg, "levinson"), **rep.as_dict()})
    if cfg.emit_plotdata:
        curve = build_ssf(table)
        phase = regularized_phase(table)
        write_csv(out / "ssf.csv", cfg, "levinson", ["lambda", "xi", "arg_det_S_beta"],
                  zip(table.lam, curve.xi, phase))
    print(f"W = {rep.winding_term:+.6f}   M/4pi = {rep.moment_term:+.6f}   "
          f"p_dim = {rep.p_dim}   #sigma_p = {rep.sigma_p}")
    print(f"residual |W + M/4pi + p_dim + #sigma_p| = {rep.residual:.3e}   status: {rep.status}")
    return _status_code(rep.status)


def cmd_hexagon(cfg: RunConfig, out: Path, workers: int) -> int:
    pot = cfg.potential()
    table = build_phase_table(pot, cfg.ell_max, _grid_for(cfg, pot), workers=workers)
    count = count_bound_states(pot, cfg.ell_max, cfg.tau_res)
    pp = radial_p_projection(count.thresholds)
    try:
        trace = hexagon_winding(table, pp, count.thresholds, s_samples=cfg.s_samples)
    except InconclusiveWindingError as exc:
        log.error("%s", exc)
        if cfg.emit_json:
            write_json(out / "hexagon.json", {**_meta(cfg, "hexagon"), "inconclusive": True,
                                               "residual": exc.residual, "budget": exc.budget})
        return EXIT_NUMERICAL
    if cfg.emit_csv or cfg.emit_plotdata:
        trace.write_csv(out / "hexagon.csv", header=_header(cfg, "hexagon"))
    if cfg.emit_json:
        write_json(out / "hexagon.json", {**_meta(cfg, "hexagon"), **trace.as_dict(),
                                           "sigma_p": count.total, "p_dim": pp.dim})
    print(f"hexagon winding (clockwise) = {trace.winding}   off-integer {trace.residual:.2e}   "
          f"Gamma4 edge {trace.gamma4_winding:+.6f}   #sigma_p = {count.total}")
    return EXIT_OK


# -- sweep -----------------------------------------------------------------

def _raw_count(cfg: RunConfig, depth: float, ell: int) -> int:
    # no resonance band here: the count switches exactly where the decaying
    # branch takes over, which is what the bisection should converge to
    return channel_bound_count(cfg.potential(depth), ell, 0.0)[0]


def _channel_counts(cfg: RunConfig, depth: float) -> list:
    return [_raw_count(cfg, depth, ell) for ell in range(cfg.ell_max + 1)]


def _locate(cfg: RunConfig, ell: int, lo: float, hi: float, c_lo: int, c_hi: int) -> list:
    """Critical depths of channel ell in (lo, hi) by bisection on its count."""
    found = []
    while c_lo < c_hi:
        a, b = lo, hi
        while b - a > 1e-12 * b:
            mid = 0.5 * (a + b)
            if _raw_count(cfg, mid, ell) > c_lo:
                b = mid
            else:
                a = mid
        c_b = _raw_count(cfg, b, ell)
        found.append((0.5 * (a + b), c_b - c_lo))
        lo, c_lo = b, c_b
    return found


def crossing_table(cfg: RunConfig, depths, counts, reports) -> list:
    """One entry per critical depth with the per-channel jumps in #sigma_p."""
    raw = []
    for i in range(len(depths) - 1):
        for ell, (a, b) in enumerate(zip(counts[i], counts[i + 1])):
            if b > a:
                for d, jump in _locate(cfg, ell, depths[i], depths[i + 1], a, b):
                    raw.append((d, ell, jump, i))
    raw.sort()
    merged = []
    for d, ell, jump, i in raw:
        if merged and abs(d - merged[-1]["depth"]) <= 1e-8 * d:
            merged[-1]["channel_jumps"][str(ell)] = merged[-1]["channel_jumps"].get(str(ell), 0) + jump
            continue
        merged.append({"depth": d, "channel_jumps": {str(ell): jump}, "interval": i})
    out = []
    for m in merged:
        d, i = m.pop("depth"), m.pop("interval")
        pot = cfg.potential(d)
        kinds = {}
        for ell in sorted(int(k) for k in m["channel_jumps"]):
            kinds[str(ell)] = channel_bound_count(pot, ell, cfg.tau_res)[1].kind
        jumps = {k: (1 if k == "0" else 2) * m["channel_jumps"][k]
                 for k in sorted(m["channel_jumps"], key=int)}
        lo_rep, hi_rep = reports[i], reports[i + 1]
        entry = {
            "critical_depth": d,
            "bracket": [depths[i], depths[i + 1]],
            "sigma_p_jump": int(sum(jumps.values())),
            "channel_jumps": jumps,
            "resonance_type": kinds[min(kinds, key=int)],
            "channel_classes": kinds,
        }
        if "winding_term" in lo_rep and "winding_term" in hi_rep:
            entry["minus_winding_jump"] = -(hi_rep["winding_term"] - lo_rep["winding_term"])
            entry["moment_term_jump"] = hi_rep["moment_term"] - lo_rep["moment_term"]
        out.append(entry)
    return out


def cmd_sweep(cfg: RunConfig, out: Path, workers: int) -> int:
    if cfg.kind not in ("square_well", "gaussian"):
        raise ConfigError("sweep needs potential.kind square_well or gaussian")
    depths = [float(x) for x in np.linspace(cfg.sweep_min, cfg.sweep_max, cfg.sweep_count)]
    lcfg = cfg.levinson_config(1)

    def one(depth):
        try:
            rep = verify_identity(cfg.potential(depth), lcfg)
            return {"depth": depth, **rep.as_dict()}
        except (RuntimeError, ArithmeticError, ValueError) as exc:
            log.warning("depth %.6g failed: %s", depth, exc)
            return {"depth": depth, "status": "error", "error": f"{type(exc).__name__}: {exc}"}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        reports = list(ex.map(one, depths))
        counts = list(ex.map(lambda d: _channel_counts(cfg, d), depths))
    crossings = crossing_table(cfg, depths, counts, reports)
    if cfg.emit_json:
        write_json(out / "sweep.json", reports)
        write_json(out / "crossings.json", {**_meta(cfg, "sweep"), "crossings": crossings})
    if cfg.emit_csv:
        write_csv(out / "crossings.csv", cfg, "sweep",
                  ["critical_depth", "sigma_p_jump", "resonance_type", "channel_jumps"],
                  ([c["critical_depth"], c["sigma_p_jump"], c["resonance_type"],
                    ";".join(f"l{k}:{v}" for k, v in c["channel_jumps"].items())]
                   for c in crossings))
    statuses = [r["status"] for r in reports]
    worst = max((r["residual"] for r in reports if r["status"] == "pass"), default=0.0)
    print(f"sweep: {len(depths)} depths, {statuses.count('pass')} pass, "
          f"{statuses.count('near_threshold')} near threshold, "
          f"{len(depths) - statuses.count('pass') - statuses.count('near_threshold')} failed; "
          f"worst residual {worst:.2e}")
    for c in crossings:
        print(f"  crossing at {c['critical_depth']:.6f}: {c['resonance_type']}, "
              f"#sigma_p jump {c['sigma_p_jump']} {c['channel_jumps']}")
    failed = any(s not in ("pass", "near_threshold") for s in statuses)
    return EXIT_NUMERICAL if failed else EXIT_OK


COMMANDS = {
    "phase-shifts": cmd_phase_shifts,
    "bound-states": cmd_bound_states,
    "thresholds": cmd_thresholds,
    "levinson": cmd_levinson,
    "hexagon": cmd_hexagon,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="levinson2d", description=__doc__.split("\n\n")[0])
    p.add_argument("verb", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in every output header; no verb draws random numbers")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.workers < 1:
        print("levinson2d: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, args.seed)
        if cfg.kind == "tabulated":
            cfg.potential()     # surface file errors as configuration errors
    except (ConfigError, PotentialFileError) as exc:
        print(f"levinson2d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.verb](cfg, out, args.workers)
    except ConfigError as exc:
        print(f"levinson2d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ArithmeticError, ValueError) as exc:
        print(f"levinson2d: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
