"""Command-line driver: ground-state runs, sweeps, scaling fits, fidelity.

Subcommands: ``exact``, ``groundstate``, ``sweep``, ``scaling``,
``fidelity``.  Options resolve with precedence CLI > config file >
defaults; the config file is flat ``key = value`` text.  Exit codes:
0 success, 1 usage or I/O errors, 2 non-physical region / diverged run,
3 non-convergence within the step budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    InsufficientDataError,
    ScalingDataset,
    central_charge_convergence,
    fit_scaling,
)
from .basis import BasisOperators, build_local_hamiltonian
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import BracketError, NonPhysicalRegionError
from .evolve import EvolutionConfig, run_ground_state
from .fidelity import local_fidelity_detail, relative_gauge_phase
from .imps import entropies, init_product_state
from .observables import (
    correlation_length,
    exact_energy_density,
    residual_density_detail,
)

ENV_OUTPUT_DIR = "FMPS_OUTPUT_DIR"
DEFAULT_TAU_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NON_PHYSICAL = 2
EXIT_NOT_CONVERGED = 3


@dataclass
class RunConfig:
    """One ground-state run, fully determined (deterministic, seed-free)."""

    gamma: float = 0.0
    gamma3: float = 0.0
    dim_d: int = 16
    chi_max: int = 16
    cell_k: int | None = None
    tau_schedule: tuple[float, ...] = DEFAULT_TAU_SCHEDULE
    convergence_tol: float = 1e-8
    max_steps_per_tau: int = 20000
    svd_floor: float = 1e-12
    deterministic_init: bool = True
    output_dir: str = ""
    checkpoint_every: int = 0
    log_every: int = 25
    workers: int = 1
    skip_residual: bool = False

    def resolved_cell_k(self) -> int:
        if self.cell_k is not None:
            return self.cell_k
        return 6 if self.gamma3 != 0.0 else 2

    def validate(self) -> None:
        k = self.resolved_cell_k()
        if k not in (2, 3, 4, 6):
            raise ValueError(f"cell_k must be one of 2, 3, 4, 6 (got {k})")
        if not self.deterministic_init:
            raise ValueError("only the deterministic vacuum init is supported")
        if self.gamma3 != 0.0 and k != 6 and self.cell_k is not None:
            print(
                f"warning: cell_k={k} with three-body coupling breaks the "
                "cell/coupling consistency; results compare a frustrated ansatz",
                file=sys.stderr,
            )


def _evolution_config(cfg: RunConfig) -> EvolutionConfig:
    return EvolutionConfig(
        chi_max=cfg.chi_max,
        tau_schedule=tuple(cfg.tau_schedule),
        max_steps_per_tau=cfg.max_steps_per_tau,
        convergence_tol=cfg.convergence_tol,
        svd_floor=cfg.svd_floor,
        log_every=cfg.log_every,
    )


def run_one(cfg: RunConfig, checkpoint_path=None):
    """Execute one ground-state run; returns (summary dict, GroundStateResult)."""
    cfg.validate()
    cell_k = cfg.resolved_cell_k()
    ops = BasisOperators.build(cfg.dim_d)
    arity = 3 if cfg.gamma3 != 0.0 else 2
    h = build_local_hamiltonian(
        ops, arity, cfg.gamma, cfg.gamma3 if arity == 3 else 0.0
    )
    init = init_product_state(cell_k, cfg.dim_d)
    evo = _evolution_config(cfg)
    on_checkpoint = None
    if checkpoint_path is not None and cfg.checkpoint_every > 0:
        def on_checkpoint(psi, step):
            save_checkpoint(checkpoint_path, psi, gamma=cfg.gamma,
                            gamma3=cfg.gamma3, meta={"step": step, "partial": True})
    t0 = time.perf_counter()
    result = run_ground_state(
        h, evo, init,
        on_checkpoint=on_checkpoint, checkpoint_every=cfg.checkpoint_every,
    )
    wall = time.perf_counter() - t0
    psi = result.psi
    if cfg.skip_residual or (result.diverged and not np.isfinite(result.energy_density)):
        residual, residual_flag = float("nan"), False
    else:
        try:
            residual, residual_flag = residual_density_detail(psi, h)
        except (np.linalg.LinAlgError, ValueError):
            residual, residual_flag = float("nan"), False
    try:
        exact = exact_energy_density(cfg.gamma) if cfg.gamma3 == 0.0 else None
    except NonPhysicalRegionError:
        exact = None
    ent = entropies(psi)
    xi = correlation_length(psi)
    summary = {
        "gamma": cfg.gamma,
        "gamma3": cfg.gamma3,
        "dim_d": cfg.dim_d,
        "chi_max": cfg.chi_max,
        "cell_k": cell_k,
        "tau_schedule": list(cfg.tau_schedule),
        "convergence_tol": cfg.convergence_tol,
        "energy_density": result.energy_density,
        "exact_energy": exact,
        "error_abs": abs(result.energy_density - exact) if exact is not None else None,
        "entropy_per_bond": [float(s) for s in ent],
        "entropy_mean": float(np.mean(ent)),
        "xi": xi,
        "residual_l": residual,
        "residual_lower_bound_only": residual_flag,
        "converged": result.converged,
        "diverged": result.diverged,
        "steps_taken": result.steps_taken,
        "final_spectrum_delta": result.final_spectrum_delta,
        "final_tau": result.final_tau,
        "wall_time_s": wall,
    }
    return summary, result


def _write_summary(path: Path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_run_csv(path: Path, result, cell_k: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "tau", "energy", "spectrum_delta", "discarded_weight"]
            + [f"entropy_{b}" for b in range(cell_k)]
        )
        for row in result.history:
            writer.writerow(
                [row.step, f"{row.tau:.17g}", f"{row.energy:.17g}",
                 f"{row.spectrum_delta:.17g}", f"{row.discarded_weight:.17g}"]
                + [f"{s:.17g}" for s in row.entropies]
            )


def cmd_exact(args) -> int:
    try:
        value = exact_energy_density(args.gamma)
    except NonPhysicalRegionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NON_PHYSICAL
    print(json.dumps({"gamma": args.gamma, "energy_density": value}, sort_keys=True))
    return EXIT_OK


def cmd_groundstate(args) -> int:
    cfg = _config_from_args(args)
    out_dir = Path(cfg.output_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    summary, result = run_one(cfg, checkpoint_path=out_dir / "state.ckpt")
    save_checkpoint(
        out_dir / "state.ckpt",
        result.psi,
        gamma=cfg.gamma,
        gamma3=cfg.gamma3,
        meta={
            "chi_max": cfg.chi_max,
            "tau_schedule": list(cfg.tau_schedule),
            "steps_taken": result.steps_taken,
            "converged": result.converged,
            "diverged": result.diverged,
        },
    )
    _write_run_csv(out_dir / "run.csv", result, cfg.resolved_cell_k())
    _write_summary(out_dir / "summary.json", summary)
    if result.diverged:
        return EXIT_NON_PHYSICAL
    if not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _grid(text: str | None, fallback: float | int, cast) -> list:
    if text is None:
        return [fallback]
    text = text.strip()
    if not text:
        return []
    return [cast(tok) for tok in text.split(",")]


def _sweep_row(cfg: RunConfig) -> dict:
    try:
        summary, _ = run_one(cfg)
        return {
            "gamma": cfg.gamma,
            "gamma3": cfg.gamma3,
            "dim_d": cfg.dim_d,
            "chi": cfg.chi_max,
            "cell_k": summary["cell_k"],
            "energy": summary["energy_density"],
            "exact_energy": summary["exact_energy"],
            "error": summary["error_abs"],
            "entropy": summary["entropy_mean"],
            "xi": summary["xi"],
            "residual": summary["residual_l"],
            "converged": summary["converged"],
            "diverged": summary["diverged"],
            "status": "ok",
        }
    except Exception as exc:  # failures recorded per-row, never abort the sweep
        return {
            "gamma": cfg.gamma,
            "gamma3": cfg.gamma3,
            "dim_d": cfg.dim_d,
            "chi": cfg.chi_max,
            "cell_k": cfg.cell_k,
            "energy": None,
            "exact_energy": None,
            "error": None,
            "entropy": None,
            "xi": None,
            "residual": None,
            "converged": None,
            "diverged": None,
            "status": f"failed: {exc}",
        }


SWEEP_COLUMNS = [
    "gamma", "gamma3", "dim_d", "chi", "cell_k", "energy", "exact_energy",
    "error", "entropy", "xi", "residual", "converged", "diverged", "status",
]


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cmd_sweep(args) -> int:
    base = _config_from_args(args)
    gammas = _grid(args.gamma_grid, base.gamma, float)
    gamma3s = _grid(args.gamma3_grid, base.gamma3, float)
    chis = _grid(args.chi_grid, base.chi_max, int)
    dims = _grid(args.dim_d_grid, base.dim_d, int)
    configs = []
    for g in gammas:
        for g3 in gamma3s:
            for d in dims:
                for chi in chis:
                    cfg = RunConfig(**{**asdict(base), "gamma": g, "gamma3": g3,
                                       "dim_d": d, "chi_max": chi})
                    configs.append(cfg)
    out_path = Path(args.out or base.output_dir or ".")
    if out_path.is_dir() or not out_path.suffix:
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / "sweep.csv"
    rows = []
    if configs:
        if base.workers > 1:
            with ProcessPoolExecutor(max_workers=base.workers) as pool:
                rows = list(pool.map(_sweep_row, configs))
        else:
            rows = [_sweep_row(cfg) for cfg in configs]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt_cell(row[c]) for c in SWEEP_COLUMNS])
    print(f"wrote {len(rows)} rows to {out_path}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    rows = []
    with open(args.input, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("status", "ok") != "ok":
                continue
            if args.gamma is not None and abs(float(row["gamma"]) - args.gamma) > 1e-12:
                continue
            if args.gamma3 is not None and abs(float(row["gamma3"]) - args.gamma3) > 1e-12:
                continue
            rows.append(
                (int(row["chi"]), float(row["entropy"]), float(row["xi"]))
            )
    rows.sort()
    try:
        dataset = ScalingDataset(
            records=rows,
            gamma=args.gamma if args.gamma is not None else float("nan"),
            gamma3=args.gamma3 if args.gamma3 is not None else 0.0,
        )
        fit = fit_scaling(dataset, chi_min=args.chi_min)
        convergence = central_charge_convergence(dataset, chi_min=args.chi_min)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {
        "kappa": fit.kappa,
        "kappa_stderr": fit.kappa_stderr,
        "eta": fit.eta,
        "eta_stderr": fit.eta_stderr,
        "central_charge": fit.central_charge,
        "chi_max_used": fit.chi_max_used,
        "r_squared_xi": fit.r_squared_xi,
        "r_squared_entropy": fit.r_squared_entropy,
        "c_vs_chi_max": [[c, v] for c, v in convergence],
        "n_points": len(rows),
        "chi_min": args.chi_min,
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    psi_a, _ = load_checkpoint(args.ckpt_a)
    psi_b, _ = load_checkpoint(args.ckpt_b)
    f, tm, offset = local_fidelity_detail(psi_a, psi_b)
    print(
        json.dumps(
            {
                "fidelity": f,
                "span_sites": tm.span_sites,
                "alignment": offset,
                "gauge_phase": relative_gauge_phase(tm),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _parse_tau_schedule(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _read_config_file(path: str) -> dict:
    values: dict = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    return values

_CONFIG_CASTS = {
    "gamma": float, "gamma3": float, "dim_d": int, "chi": int, "cell_k": int,
    "tau_schedule": _parse_tau_schedule, "tol": float, "max_steps_per_tau": int,
    "svd_floor": float, "out": str, "checkpoint_every": int, "log_every": int,
    "workers": int,
}


def _config_from_args(args) -> RunConfig:
    file_vals: dict = {}
    if getattr(args, "config", None):
        raw = _read_config_file(args.config)
        for key, text in raw.items():
            if key not in _CONFIG_CASTS:
                raise ValueError(f"unknown config key {key!r}")
            file_vals[key] = _CONFIG_CASTS[key](text)

    def pick(flag, key, default):
        val = getattr(args, flag, None)
        if val is not None:
            return val
        if key in file_vals:
            return file_vals[key]
        return default

    out_default = os.environ.get(ENV_OUTPUT_DIR, "")
    cfg = RunConfig(
        gamma=pick("gamma", "gamma", 0.0),
        gamma3=pick("gamma3", "gamma3", 0.0),
        dim_d=pick("dim_d", "dim_d", 16),
        chi_max=pick("chi", "chi", 16),
        cell_k=pick("cell_k", "cell_k", None),
        tau_schedule=tuple(pick("tau_schedule", "tau_schedule", DEFAULT_TAU_SCHEDULE)),
        convergence_tol=pick("tol", "tol", 1e-8),
        max_steps_per_tau=pick("max_steps_per_tau", "max_steps_per_tau", 20000),
        svd_floor=pick("svd_floor", "svd_floor", 1e-12),
        output_dir=pick("out", "out", out_default),
        checkpoint_every=pick("checkpoint_every", "checkpoint_every", 0),
        log_every=pick("log_every", "log_every", 25),
        workers=pick("workers", "workers", 1),
        skip_residual=bool(getattr(args, "skip_residual", False)),
    )
    return cfg


def _add_run_flags(sub) -> None:
    sub.add_argument("--gamma", type=float, default=None, help="two-body coupling")
    sub.add_argument("--gamma3", type=float, default=None, help="three-body coupling")
    sub.add_argument("--dim-d", dest="dim_d", type=int, default=None,
                     help="expansion order / physical dimension")
    sub.add_argument("--chi", type=int, default=None, help="max virtual bond dimension")
    sub.add_argument("--cell-k", dest="cell_k", type=int, default=None,
                     help="tensors per unit cell (default 2, or 6 with gamma3)")
    sub.add_argument("--tau-schedule", dest="tau_schedule",
                     type=_parse_tau_schedule, default=None,
                     help="comma-separated descending Trotter steps")
    sub.add_argument("--tol", type=float, default=None,
                     help="spectrum-change convergence tolerance")
    sub.add_argument("--max-steps-per-tau", dest="max_steps_per_tau", type=int,
                     default=None)
    sub.add_argument("--svd-floor", dest="svd_floor", type=float, default=None)
    sub.add_argument("--checkpoint-every", dest="checkpoint_every", type=int,
                     default=None)
    sub.add_argument("--log-every", dest="log_every", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--out", type=str, default=None, help="output directory")
    sub.add_argument("--config", type=str, default=None, help="key=value config file")
    sub.add_argument("--skip-residual", dest="skip_residual", action="store_true")


def main(argv=None) -> int:
    parser = _Parser(prog="fmps", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_exact = subs.add_parser("exact", help="analytic two-body energy density")
    p_exact.add_argument("--gamma", type=float, required=True)
    p_exact.set_defaults(func=cmd_exact)

    p_gs = subs.add_parser("groundstate", help="one iTEBD ground-state run")
    _add_run_flags(p_gs)
    p_gs.set_defaults(func=cmd_groundstate)

    p_sweep = subs.add_parser("sweep", help="grid of independent runs -> CSV")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--gamma-grid", dest="gamma_grid", type=str, default=None)
    p_sweep.add_argument("--gamma3-grid", dest="gamma3_grid", type=str, default=None)
    p_sweep.add_argument("--chi-grid", dest="chi_grid", type=str, default=None)
    p_sweep.add_argument("--dim-d-grid", dest="dim_d_grid", type=str, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_scale = subs.add_parser("scaling", help="fit scaling laws from a sweep CSV")
    p_scale.add_argument("--input", type=str, required=True)
    p_scale.add_argument("--gamma", type=float, default=None)
    p_scale.add_argument("--gamma3", type=float, default=None)
    p_scale.add_argument("--chi-min", dest="chi_min", type=int, default=4)
    p_scale.add_argument("--out", type=str, default=None)
    p_scale.set_defaults(func=cmd_scaling)

    p_fid = subs.add_parser("fidelity", help="local fidelity of two checkpoints")
    p_fid.add_argument("ckpt_a", type=str)
    p_fid.add_argument("ckpt_b", type=str)
    p_fid.set_defaults(func=cmd_fidelity)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonPhysicalRegionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NON_PHYSICAL
    except (BracketError, InsufficientDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
