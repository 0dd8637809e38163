"""Command-line entry point: ``dampedwave {simulate,sweep,check,constants,basis}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .functionals import Trajectory
from .integrator import ConfigurationError, LifespanEstimate, integrate
from .model import AdmissibilityError, ProfileFileError, scale_initial_state
from .oracle import StabilityError
from .spectral import DomainError
from .sweep import SimulationSetup, SweepError, amplitude_sweep, write_svg
from .theory import check_chain, estimate_constants


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def _constants(cfg: RunConfig):
    return estimate_constants(
        cfg.basis,
        cfg.coeffs.p,
        budget=cfg.const_budget,
        seed=cfg.seed,
        starts=cfg.const_starts,
        n_modes=cfg.const_modes,
    )


def _setup(cfg: RunConfig) -> SimulationSetup:
    return SimulationSetup(
        basis=cfg.basis,
        coeffs=cfg.coeffs,
        profiles=cfg.make_profiles(),
        control=cfg.control,
        thresholds=cfg.thresholds,
        stride=cfg.stride,
        mode=cfg.mode,
    )


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    if cfg.rho is None:
        raise ConfigError("simulate needs [amplitude] rho")
    profiles = cfg.make_profiles()
    state0 = scale_initial_state(profiles, cfg.rho)
    traj, est = integrate(
        state0,
        cfg.coeffs,
        cfg.basis,
        cfg.control,
        stride=cfg.stride,
        thresholds=cfg.thresholds,
        mode=cfg.mode,
        metadata={"rho": cfg.rho, "seed": cfg.seed},
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.out_dir / "trajectory.csv"
    rep_path = cfg.out_dir / "lifespan.json"
    traj.to_csv(csv_path)
    report = est.to_dict()
    report.update(rho=cfg.rho, metadata=traj.metadata)
    write_json(rep_path, report)
    return [csv_path, rep_path]


def cmd_sweep(cfg: RunConfig) -> list[Path]:
    grid = cfg.rho_grid or ([cfg.rho] if cfg.rho is not None else None)
    if not grid:
        raise ConfigError("sweep needs [amplitude] rho_min, factor, count")
    constants = _constants(cfg)
    result = amplitude_sweep(_setup(cfg), grid, constants, jobs=cfg.jobs)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.out_dir / "sweep.csv"
    rep_path = cfg.out_dir / "fit.json"
    result.to_csv(csv_path)
    report = result.report(upper_half=cfg.fit_upper_half)
    report["constants"] = constants.to_dict()
    write_json(rep_path, report)
    paths = [csv_path, rep_path]
    if cfg.svg:
        svg_path = cfg.out_dir / "sweep.svg"
        write_svg(result, svg_path, cfg.coeffs.p)
        paths.append(svg_path)
    return paths


def cmd_check(cfg: RunConfig, trajectory: Path, lifespan: Path | None = None) -> list[Path]:
    traj = Trajectory.from_csv(trajectory)
    traj.metadata.setdefault("mode", cfg.mode)
    if lifespan is None and (Path(trajectory).parent / "lifespan.json").exists():
        lifespan = Path(trajectory).parent / "lifespan.json"
    est = None
    if lifespan is not None:
        data = json.loads(Path(lifespan).read_text())
        est = LifespanEstimate(status=data["status"], t_star_est=data.get("t_star_est"))
    constants = _constants(cfg)
    report = check_chain(traj, constants, cfg.coeffs.p, est).to_dict()
    report["constants"] = constants.to_dict()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "inequality.json"
    write_json(path, report)
    return [path]


def cmd_constants(cfg: RunConfig) -> list[Path]:
    constants = _constants(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "constants.json"
    write_json(path, constants.to_dict())
    return [path]


def cmd_basis(cfg: RunConfig, out=None, count: int = 10) -> None:
    out = out or sys.stdout
    basis = cfg.basis
    print(f"lambda_1 = {basis.lambda_1:.17g}", file=out)
    print("mode\tlambda", file=out)
    for k, lam in basis.mode_table(count):
        print(f"{','.join(map(str, k))}\t{lam:.17g}", file=out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="run configuration file")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="seed override (u64)")
    common.add_argument("--jobs", type=int, default=None, help="parallel sweep workers")

    parser = argparse.ArgumentParser(prog="dampedwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="single run: trajectory CSV + lifespan report")
    sub.add_parser("sweep", parents=[common], help="amplitude sweep + scaling fit")
    chk = sub.add_parser("check", parents=[common], help="inequality-chain report for a trajectory CSV")
    chk.add_argument("trajectory", type=Path)
    chk.add_argument("--lifespan", type=Path, default=None)
    sub.add_parser("constants", parents=[common], help="embedding/chain constant estimates")
    sub.add_parser("basis", parents=[common], help="print lambda_1 and the lowest modes")
    return parser


_VALIDATION = (AdmissibilityError, ConfigError, ConfigurationError, DomainError, StabilityError, ProfileFileError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, jobs=args.jobs, out_dir=args.out)
        if args.command == "simulate":
            paths = cmd_simulate(cfg)
        elif args.command == "sweep":
            paths = cmd_sweep(cfg)
        elif args.command == "check":
            paths = cmd_check(cfg, args.trajectory, args.lifespan)
        elif args.command == "constants":
            paths = cmd_constants(cfg)
        else:
            cmd_basis(cfg)
            paths = []
    except _VALIDATION as exc:
        print(f"error: validation: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except SweepError as exc:
        print(f"error: sweep: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: io: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
