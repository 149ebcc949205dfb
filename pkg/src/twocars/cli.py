"""Command-line front end.

Every subcommand writes one CSV table (header always present) or one JSON
object carrying ``"schema_version": 1``.  Reals are printed with 17
significant digits so that output is byte-identical across runs.

Exit codes: 0 success, 2 domain error, 3 audit failure, 64 usage error.
The ``BARRIER_TOL`` environment variable overrides the root tolerance.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from . import barrier as bar
from . import classify as cls
from . import roots, sim
from .errors import BarrierError, NotOnBarrier
from .kinematics import State

SCHEMA_VERSION = 1
EXIT_OK, EXIT_DOMAIN, EXIT_AUDIT, EXIT_USAGE = 0, 2, 3, 64
TOL_ENV = "BARRIER_TOL"

AUDIT_RESIDUAL_LIMIT = 1e-9
AUDIT_PROBE_PAIRS = 10
AUDIT_AGREEMENT = 0.95
AUDIT_DISPLACEMENTS = (0.05, 0.1)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    ell: float
    delta: float = 1e-3
    tol: float = roots.DEFAULT_TOL
    seed: int = 0
    fmt: str = "json"
    out: Optional[str] = None

    def __post_init__(self):
        for name in ("ell", "delta", "tol"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive number, got {val}")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {self.fmt!r}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def fmt_real(v: float) -> str:
    return format(float(v), ".17g")


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_real(v)
    if isinstance(v, (list, tuple, frozenset, set)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def to_json(obj: Any, indent: int = 0) -> str:
    """JSON with fixed key order and 17-digit reals (non-finite become null)."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{end}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + f"\n{end}]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_real(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(str(obj))


def _emit(cfg: RunConfig, payload: dict, rows_key: Optional[str], columns: Sequence[str]) -> None:
    if cfg.fmt == "json":
        text = to_json({"schema_version": SCHEMA_VERSION, **payload}) + "\n"
    else:
        rows = payload[rows_key] if rows_key else [payload]
        text = to_csv(rows, columns)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

CONSTANT_FIELDS = ("ell", "regime", "theta_J", "ell_J", "theta1", "theta2", "theta12", "theta21",
                   "w", "m", "n")
SLICE_FIELDS = ("theta_slice", "piece", "side", "tau", "vartheta", "x", "y", "nu_x", "nu_y", "nu_theta")
CLASSIFY_FIELDS = ("matched", "family", "side", "ell_recovered", "layer_excess", "u_set", "v_set")
TRAJ_FIELDS = ("t", "x", "y", "theta", "termination")
AUDIT_FIELDS = ("table", "label", "samples", "decided", "agree", "value")


def cmd_constants(args, cfg: RunConfig) -> int:
    m = bar.build_model(cfg.ell)
    payload = {
        "ell": m.ell, "regime": m.regime.value, "theta_J": m.theta_J, "ell_J": m.ell_J,
        "theta1": m.theta1, "theta2": m.theta2, "theta12": m.theta12, "theta21": m.theta21,
        "w": m.w, "m": m.m, "n": m.n,
    }
    _emit(cfg, payload, None, CONSTANT_FIELDS)
    return EXIT_OK


def _slice_row(theta: float, p: bar.SlicePoint) -> dict:
    nu = p.normal
    return {
        "theta_slice": theta, "piece": p.piece.family.value, "side": p.piece.side or 0,
        "tau": p.params.tau, "vartheta": p.params.vartheta, "x": p.z.x, "y": p.z.y,
        "nu_x": None if nu is None else nu.nu_x,
        "nu_y": None if nu is None else nu.nu_y,
        "nu_theta": None if nu is None else nu.nu_theta,
    }


def cmd_slice(args, cfg: RunConfig) -> int:
    m = bar.build_model(cfg.ell)
    theta = _required(args, "theta")
    rows = [_slice_row(theta, p) for p in bar.sample_slice(m, theta, args.n)]
    _emit(cfg, {"ell": cfg.ell, "theta": theta, "rows": rows}, "rows", SLICE_FIELDS)
    return EXIT_OK


def _state(args) -> State:
    return State(_required(args, "x"), _required(args, "y"), _required(args, "theta"))


def _match_payload(match: Optional[cls.PieceMatch]) -> dict:
    if match is None:
        return {"matched": False, "family": None, "side": None, "ell_recovered": None,
                "layer_excess": None, "u_set": [], "v_set": []}
    return {
        "matched": True, "family": match.piece.family.value, "side": match.piece.side or 0,
        "ell_recovered": match.ell_recovered, "layer_excess": match.layer_excess,
        "u_set": sorted(match.u_set), "v_set": sorted(match.v_set),
    }


def cmd_classify(args, cfg: RunConfig) -> int:
    m = bar.build_model(cfg.ell)
    match = cls.classify(m, _state(args), cls.LayerConfig(delta=cfg.delta))
    _emit(cfg, _match_payload(match), None, CLASSIFY_FIELDS)
    return EXIT_OK


def cmd_controls(args, cfg: RunConfig) -> int:
    m = bar.build_model(cfg.ell)
    z = _state(args)
    match = cls.classify(m, z, cls.LayerConfig(delta=cfg.delta))
    if match is None:
        raise NotOnBarrier(f"state {z} is not within the barrier layer (delta={cfg.delta})")
    _emit(cfg, _match_payload(match), None, CLASSIFY_FIELDS)
    return EXIT_OK


def parse_policy(text: str) -> Optional[tuple[float, float]]:
    """``barrier`` gives None, ``fixed:u,v`` gives the pair."""
    if text == "barrier":
        return None
    if text.startswith("fixed:"):
        parts = text[len("fixed:"):].split(",")
        if len(parts) == 2:
            try:
                return float(parts[0]), float(parts[1])
            except ValueError:
                pass
    raise argparse.ArgumentTypeError(f"policy must be 'barrier' or 'fixed:<u>,<v>', got {text!r}")


def cmd_simulate(args, cfg: RunConfig) -> int:
    m = bar.build_model(cfg.ell)
    z0 = _state(args)
    if args.policy is None:
        layer = cls.LayerConfig(delta=cfg.delta)
        if cls.classify(m, z0, layer) is None:
            raise NotOnBarrier(f"barrier policy needs a start on the barrier layer, got {z0}")
        player = sim.BarrierPlayer(m, layer)
        traj = sim.integrate(z0, player.u, player.v, args.dt, args.tmax, cfg.ell, monitor=player.on_layer)
    else:
        u, v = args.policy
        traj = sim.integrate(z0, sim.constant(u), sim.constant(v), args.dt, args.tmax, cfg.ell)
    rows = [{"t": t, "x": z.x, "y": z.y, "theta": z.theta} for t, z in traj.samples]
    rows[-1]["termination"] = traj.termination.value
    payload = {"ell": cfg.ell, "termination": traj.termination.value, "t_end": traj.t_end, "rows": rows}
    _emit(cfg, payload, "rows", TRAJ_FIELDS)
    return EXIT_OK


def run_audit(ell: float, n: int, seed: int) -> dict:
    """Residual audit over all pieces plus the oracle agreement table."""
    m = bar.build_model(ell)
    rng = np.random.default_rng(seed)
    residuals = [
        {"table": "residual", "label": label, "samples": count, "value": worst}
        for label, (worst, count) in sim.residual_audit(m, n, n, rng).items()
    ]
    oracle = []
    for d in AUDIT_DISPLACEMENTS:
        probes = sim.probe_set(m, AUDIT_PROBE_PAIRS, d, rng)
        verdicts = [sim.game_oracle(p.state, ell).outcome for p in probes]
        decided = [(p, v) for p, v in zip(probes, verdicts) if v is not sim.Outcome.UNDECIDED]
        agree = sum(p.expected is v for p, v in decided)
        rate = agree / len(decided) if decided else float("nan")
        oracle.append({"table": "oracle", "label": f"displacement={d:g}", "samples": len(probes),
                       "decided": len(decided), "agree": agree, "value": rate})
    ok_res = all(r["value"] < AUDIT_RESIDUAL_LIMIT for r in residuals)
    near, far = oracle
    ok_oracle = (near["decided"] > 0 and near["value"] >= AUDIT_AGREEMENT
                 and far["agree"] == far["decided"])
    return {"ell": ell, "seed": seed, "passed": ok_res and ok_oracle,
            "residuals": residuals, "oracle": oracle}


def cmd_audit(args, cfg: RunConfig) -> int:
    report = run_audit(cfg.ell, args.n, cfg.seed)
    if cfg.fmt == "json":
        _emit(cfg, report, None, ())
    else:
        _emit(cfg, {"rows": report["residuals"] + report["oracle"]}, "rows", AUDIT_FIELDS)
    return EXIT_OK if report["passed"] else EXIT_AUDIT


# ---------------------------------------------------------------------------
# Parsing and dispatch
# ---------------------------------------------------------------------------

def _required(args, name: str) -> float:
    val = getattr(args, name)
    if val is None:
        raise UsageError(f"--{name} is required for {args.command}")
    return val


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--ell", type=float, required=True)
    common.add_argument("--delta", type=float, default=1e-3)
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--out")
    common.add_argument("--seed", type=int, default=0)
    state = _Parser(add_help=False)
    state.add_argument("--x", type=float)
    state.add_argument("--y", type=float)
    state.add_argument("--theta", type=float)

    parser = _Parser(prog="twocars", description="Barrier of the game of two identical cars.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common])
    p = sub.add_parser("slice", parents=[common])
    p.add_argument("--theta", type=float)
    p.add_argument("--n", type=int, default=50)
    sub.add_parser("classify", parents=[common, state])
    sub.add_parser("controls", parents=[common, state])
    p = sub.add_parser("simulate", parents=[common, state])
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=1.0)
    p.add_argument("--policy", type=parse_policy, default=None)
    p = sub.add_parser("audit", parents=[common])
    p.add_argument("--n", type=int, default=100)
    return parser


COMMANDS = {
    "constants": cmd_constants, "slice": cmd_slice, "classify": cmd_classify,
    "controls": cmd_controls, "simulate": cmd_simulate, "audit": cmd_audit,
}


def _tol_from_env() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return roots.DEFAULT_TOL
    return float(raw)


REAL_FLAGS = ("--ell", "--delta", "--x", "--y", "--theta", "--dt", "--tmax")


def _glue_negative_reals(argv: Sequence[str]) -> list[str]:
    """Write ``--x -4e-05`` as ``--x=-4e-05``.

    argparse only recognizes plain negative decimals as values, so a
    negative number in exponent notation would otherwise be read as a flag.
    """
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in REAL_FLAGS:
            val = next(it, None)
            if val is not None and val.startswith("-"):
                out.append(f"{tok}={val}")
                continue
            out.append(tok)
            if val is not None:
                out.append(val)
            continue
        out.append(tok)
    return out


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = build_parser().parse_args(_glue_negative_reals(argv))
        if getattr(args, "n", 1) < 1:
            raise UsageError("--n must be at least 1")
    except UsageError:
        return EXIT_USAGE
    try:
        tol = _tol_from_env()
        cfg = RunConfig(args.ell, args.delta, tol, args.seed, args.format, args.out)
        if tol != roots.DEFAULT_TOL:
            roots.set_default_tol(tol)
            bar.clear_caches()
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        sys.stderr.write(f"twocars: error: {exc}\n")
        return EXIT_USAGE
    except (BarrierError, ValueError) as exc:
        sys.stderr.write(f"twocars: {type(exc).__name__}: {exc}\n")
        return EXIT_DOMAIN


def main(argv: Optional[Sequence[str]] = None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
