"""Command-line front end: ``darkgate {gate,sweep,leakage,blockade}``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_BTAU_GRID,
    adiabatic_phase,
    blockade_eigenvalues,
    blockade_error_budget,
    blockade_propagation,
    blockade_square_solution,
    leakage_case_from_params,
    leakage_cases,
    leakage_study,
    magic_rabi,
    split_pulse_phase,
    square_residual_average,
    sweep_btau,
)
from .config import ConfigError, GateConfig, dump_config, load_config
from .hamiltonians import build_h2_blockade
from .propagator import PropagationError, propagate
from .protocol import GateRunError, INPUT_LABELS, apply_phase_correction, run_gate
from .pulses import KappaConvergenceError, PulseShape, make_pulse
from .quantum_core import H2_BASIS, StateVector

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
CSV_COLUMNS = ("btau", "shape", "E_sim", "E_analytic_solid", "E_analytic_dashed", "F", "residual_rydberg")
CSV_VERSION = 1

_NUMERICAL_ERRORS = (PropagationError, GateRunError, KappaConvergenceError, FloatingPointError,
                     np.linalg.LinAlgError)


class UsageError(Exception):
    pass


def sci(x: float) -> str:
    """Scientific notation with 9 significant digits."""
    return f"{x:.8e}"


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str = __version__
    wall_time_s: float = 0.0
    outputs: list[str] = field(default_factory=list)
    argv: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "config": self.config,
            "tool_version": self.tool_version,
            "csv_version": CSV_VERSION,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
            "argv": self.argv,
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        return json.dumps(payload, indent=2, sort_keys=True, default=str)


class _Writer:
    """Collects output files under ``--out`` and writes one manifest per file."""

    def __init__(self, out: str | None, command: str, argv: list[str]):
        self.dir = Path(out) if out else None
        self.command = command
        self.argv = argv
        self.start = time.perf_counter()
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def flush(self, config: dict) -> list[Path]:
        if self.dir is None:
            return []
        self.dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files.items():
            path = self.dir / name
            path.write_text(text, encoding="utf-8")
            manifest = RunManifest(self.command, config, wall_time_s=time.perf_counter() - self.start,
                                   outputs=[name], argv=self.argv)
            (self.dir / f"{name}.manifest.json").write_text(manifest.to_json(), encoding="utf-8")
            written.append(path)
        return written


def _load(args) -> GateConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else GateConfig()
    if getattr(args, "tol", None) is not None:
        cfg = cfg.replace(tol=args.tol)
    return cfg


# --- gate --------------------------------------------------------------------

def _format_matrix(U: np.ndarray, part: str) -> list[str]:
    vals = U.real if part == "real" else U.imag
    return ["  " + " ".join(f"{v:+.9f}" for v in row) for row in vals]


def gate_report(cfg: GateConfig, res) -> str:
    lines = [
        f"F = {res.F:.9f}",
        f"E = {res.E:.6e}",
        f"analytic E (eta/Btau) = {cfg.eta / cfg.btau:.6e}" if cfg.btau else "analytic E (eta/Btau) = 0 (no decay)",
        "Re U:", *_format_matrix(res.U, "real"),
        "Im U:", *_format_matrix(res.U, "imag"),
        "input  final_norm      residual_rydberg  phase_error  steps(acc/rej)",
    ]
    for d in res.diagnostics:
        lines.append(f"|{d.label}>  {d.final_norm:.9f}  {d.residual_rydberg:.6e}      {d.phase:+.3e}"
                     f"   {d.accepted_steps}/{d.rejected_steps}")
    return "\n".join(lines) + "\n"


def cmd_gate(args, writer: _Writer) -> tuple[int, dict]:
    cfg = _load(args)
    res = run_gate(cfg, jobs=args.jobs)
    if cfg.interaction == "blockade" and cfg.split_target:
        phi = cfg.split_phase if cfg.split_phase is not None else split_pulse_phase(cfg)
        res = apply_phase_correction(res, -phi)
    text = gate_report(cfg, res)
    print(text, end="")
    writer.add("gate_report.txt", text)
    return EXIT_OK, cfg.to_dict()


# --- sweep -------------------------------------------------------------------

def _parse_shapes(raw: str) -> tuple[str, ...]:
    shapes = tuple(s.strip() for s in raw.split(",") if s.strip())
    if not shapes:
        raise UsageError("--shapes: no shape given")
    for s in shapes:
        try:
            PulseShape(s)
        except ValueError:
            raise UsageError(f"--shapes: unknown pulse shape {s!r}") from None
    return shapes


def _parse_grid(raw: str | None) -> tuple[float, ...]:
    if raw is None:
        return DEFAULT_BTAU_GRID
    try:
        grid = tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--grid: cannot parse {raw!r}") from None
    if any(not g > 0 for g in grid):
        raise UsageError("--grid: values must be positive")
    if list(grid) != sorted(grid):
        raise UsageError("--grid: values must be ascending")
    return grid


def sweep_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([sci(r.btau), r.pulse_shape, sci(r.E_simulated), sci(r.E_analytic),
                    sci(r.E_analytic_dashed), sci(r.F), sci(r.residual_rydberg)])
    return buf.getvalue()


def cmd_sweep(args, writer: _Writer) -> tuple[int, dict]:
    shapes = _parse_shapes(args.shapes)
    grid = _parse_grid(args.grid)
    cfg = _load(args)
    records = sweep_btau(cfg, grid, shapes, jobs=args.jobs)
    text = sweep_csv(records)
    print(text, end="")
    writer.add("sweep.csv", text)
    failed = [r for r in records if r.notes]
    for r in failed:
        print(f"row btau={r.btau:g} shape={r.pulse_shape}: {r.notes}", file=sys.stderr)
    return (EXIT_NUMERICAL if failed else EXIT_OK), cfg.to_dict()


# --- leakage -----------------------------------------------------------------

def cmd_leakage(args, writer: _Writer) -> tuple[int, dict]:
    if args.params:
        path = Path(args.params)
        if not path.is_file():
            raise ConfigError("params", f"file {str(path)!r} not found")
        try:
            selected = [leakage_case_from_params(path)]
        except (KeyError, ValueError) as exc:
            raise ConfigError("params", f"invalid case parameters: {exc}") from None
    else:
        if args.data and not Path(args.data).is_file():
            raise ConfigError("data", f"file {args.data!r} not found")
        cases = leakage_cases(args.data)
        if args.all:
            selected = [cases[k] for k in sorted(cases)]
        elif args.case is None:
            raise UsageError("leakage: give --case N, --all or --params FILE")
        elif args.case not in cases:
            raise UsageError(f"--case: unknown case {args.case}; known cases {sorted(cases)}")
        else:
            selected = [cases[args.case]]
    tol = args.tol if args.tol is not None else 1e-11
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("case", "b_rr_ratio", "delta_rr_mhz", "b_ab_ratio", "delta_ab_mhz", "missing_population",
                "published"))
    print(f"{'case':>4} {'B_rr/B':>7} {'drr/MHz':>8} {'B_ab/B':>7} {'dab/MHz':>8} {'missing':>12} {'published':>10}")
    for c in selected:
        p = leakage_study(c, tol=tol)
        pub = "" if c.expected is None else sci(c.expected)
        w.writerow((c.case, sci(c.b_rr_ratio), sci(c.delta_rr_mhz), sci(c.b_ab_ratio), sci(c.delta_ab_mhz),
                    sci(p), pub))
        print(f"{c.case:>4} {c.b_rr_ratio:>7.2f} {c.delta_rr_mhz:>8.1f} {c.b_ab_ratio:>7.2f} "
              f"{c.delta_ab_mhz:>8.1f} {p:>12.3e} {(c.expected or math.nan):>10.2e}")
    writer.add("leakage.csv", buf.getvalue())
    return EXIT_OK, {"cases": [c.case for c in selected], "tol": tol}


# --- blockade ----------------------------------------------------------------

def blockade_report(cfg: GateConfig, mode: str, jobs: int = 1) -> str:
    B_sh = cfg.couplings().B_sh
    lines = [f"mode = {mode}", f"B_sh/2pi = {B_sh / (2 * math.pi):.6g} MHz"]
    if mode == "magic":
        om = magic_rabi(B_sh, 1)
        T = 2 * math.pi / om
        res = blockade_propagation(om, B_sh, T, tol=min(cfg.tol, 1e-12))
        c1, cr = res.final_state.amplitudes
        c1_cf, cr_cf = blockade_square_solution(om, B_sh, T)
        phase = (-np.angle(c1)) % (2 * math.pi)
        target = (math.sqrt(3) * math.pi) % (2 * math.pi)
        lines += [
            f"Omega_t = B_sh/sqrt(3); T = {T:.6e} us",
            f"eigenvalues lambda-/+ = {blockade_eigenvalues(om, B_sh)}",
            f"|c_r(T)| propagated = {abs(cr):.3e}, closed form = {abs(cr_cf):.3e}",
            f"acquired phase = {phase:.9f} (sqrt(3) pi mod 2pi = {target:.9f})",
        ]
    elif mode == "square":
        om = cfg.omega_t0
        T = 2 * math.pi / om
        c1, cr = blockade_square_solution(om, B_sh, T)
        avg = square_residual_average(om, B_sh, T)
        lines += [
            f"Omega_t = alpha B_sh; T = {T:.6e} us",
            f"eigenvalues lambda-/+ = {blockade_eigenvalues(om, B_sh)}",
            f"|c_r(T)|^2 = {abs(cr) ** 2:.6e}",
            f"averaged residual Rydberg population = {avg:.6e} (Omega^2/(2 B_sh^2) = {om**2 / (2 * B_sh**2):.6e})",
        ]
    else:
        T = cfg.target_duration
        pulse = make_pulse(cfg.target_shape, T, 2 * math.pi, cfg.sigma_ratio)
        phi = adiabatic_phase(pulse, B_sh)
        drive = build_h2_blockade(1.0, 0.0).entries
        static = build_h2_blockade(0.0, B_sh).entries
        res = propagate(lambda t: static + pulse(t) * drive, StateVector.basis_state(H2_BASIS, ("r", "1")),
                        0.0, T, tol=min(cfg.tol, 1e-12), max_step=pulse.sigma or T / 20)
        c1 = res.final_state.amplitudes[0]
        phi_num = -float(np.angle(c1))
        lines += [
            f"pulse = {cfg.target_shape}, T = {T:.6e} us, peak/B_sh = {pulse.peak / B_sh:.4f}",
            f"adiabatic phase (quadrature) = {phi:.9f}",
            f"propagated phase of |r_c 1_t> = {phi_num:.9f} (relative difference {abs(phi_num / phi - 1):.2e})",
            f"residual |c_r(T)|^2 = {abs(res.final_state.amplitudes[1]) ** 2:.3e}",
        ]
        gcfg = cfg.replace(interaction="blockade", split_target=True)
        gate = run_gate(gcfg, jobs=jobs)
        split = split_pulse_phase(gcfg)
        lines.append(f"gate with split pulse: E = {gate.E:.6e}; after Z_t correction: "
                     f"E = {apply_phase_correction(gate, -split).E:.6e}")
    budget = blockade_error_budget(cfg.gamma, B_sh, cfg.omega_t0, square=(mode == "square"))
    lines.append("error budget (step ii): input  decay  rotation  phase")
    for key in (*INPUT_LABELS, "average"):
        b = budget[key]
        lines.append(f"  {key:>7}  {b.decay_control + b.decay_target + b.decay_ryry:.3e}  "
                     f"{b.rotation:.3e}  {b.phase:.3e}")
    return "\n".join(lines) + "\n"


def cmd_blockade(args, writer: _Writer) -> tuple[int, dict]:
    cfg = _load(args).replace(interaction="blockade")
    text = blockade_report(cfg, args.mode, jobs=args.jobs)
    print(text, end="")
    writer.add(f"blockade_{args.mode}.txt", text)
    return EXIT_OK, cfg.to_dict()


# --- entry point -------------------------------------------------------------

def _positive_int(raw: str) -> int:
    try:
        v = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {raw!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="integrator relative tolerance")
    common.add_argument("--jobs", type=_positive_int, default=1, help="parallel worker processes")
    common.add_argument("--out", default=None, help="directory for output files and manifests")

    p = argparse.ArgumentParser(prog="darkgate", description="Rydberg dark-state gate simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gate", parents=[common], help="run the gate for all four inputs")
    g.add_argument("config", nargs="?", help="INI configuration file")

    s = sub.add_parser("sweep", parents=[common], help="gate error versus B tau, CSV output")
    s.add_argument("config", nargs="?")
    s.add_argument("--shapes", default="gaussian,square", help="comma-separated target pulse shapes")
    s.add_argument("--grid", default=None, help="comma-separated ascending B tau values")

    lk = sub.add_parser("leakage", parents=[common], help="five-state leakage study")
    grp = lk.add_mutually_exclusive_group()
    grp.add_argument("--case", type=int)
    grp.add_argument("--all", action="store_true")
    grp.add_argument("--params", help="JSON file with one case")
    lk.add_argument("--data", default=None, help="alternative case data file")

    b = sub.add_parser("blockade", parents=[common], help="blockade gate diagnostics")
    b.add_argument("config", nargs="?")
    b.add_argument("--mode", choices=("adiabatic", "square", "magic"), default="adiabatic")

    sub.add_parser("example-config", help="print a commented default configuration")
    return p


_COMMANDS = {"gate": cmd_gate, "sweep": cmd_sweep, "leakage": cmd_leakage, "blockade": cmd_blockade}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "example-config":
        print(dump_config(GateConfig()), end="")
        return EXIT_OK
    writer = _Writer(args.out, args.command, argv)
    try:
        code, snapshot = _COMMANDS[args.command](args, writer)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    writer.flush(snapshot)
    return code


if __name__ == "__main__":
    sys.exit(main())
