"""Amplitude sweeps and log-log fits of the lifespan against the amplitude."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate as sp_integrate
from scipy import stats

from .functionals import z0_prediction
from .integrator import BLOWUP, StepControl, Thresholds, integrate
from .model import Coefficients, ProfilePair, scale_initial_state
from .spectral import SpectralBasis
from .theory import ConstantEstimates

SWEEP_COLUMNS = ("rho", "status", "t_star_est", "y0", "z0", "t_lower_bound")


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationSetup:
    """Everything except the amplitude."""

    basis: SpectralBasis
    coeffs: Coefficients
    profiles: ProfilePair
    control: StepControl
    thresholds: Thresholds = field(default_factory=Thresholds)
    stride: int = 1
    mode: str = "full"


@dataclass(frozen=True)
class SweepRow:
    rho: float
    status: str
    t_star_est: float
    y0: float
    z0: float
    t_lower_bound: float
    t_last_threshold: float = math.nan


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    n: int
    target: float
    slope_error: float
    c0: float
    lower_bound_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepResult:
    p: float
    rows: list[SweepRow]
    fit: ScalingFit | None = None
    floor_ratio_min: float | None = None

    def blowup_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.status == BLOWUP]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r.rho), r.status, _fmt(r.t_star_est), _fmt(r.y0), _fmt(r.z0), _fmt(r.t_lower_bound)])

    def report(self, upper_half: bool = False) -> dict:
        out = {
            "p": self.p,
            "target_slope": -(self.p - 2),
            "rows": [asdict(r) for r in self.rows],
            "floor_ratio_min": self.floor_ratio_min,
            "fit_all": None if self.fit is None else self.fit.to_dict(),
            "floor_satisfied": all(r.t_star_est >= r.t_lower_bound for r in self.blowup_rows()),
        }
        if upper_half:
            try:
                out["fit_upper_half"] = fit_scaling(self, self.p, upper_half=True).to_dict()
            except ValueError:
                out["fit_upper_half"] = None
        return out


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def geometric_grid(rho_min: float, factor: float, count: int) -> list[float]:
    if not (rho_min > 0 and factor > 0 and count >= 1):
        raise ValueError("geometric grid needs rho_min > 0, factor > 0, count >= 1")
    return [float(rho_min) * float(factor) ** k for k in range(int(count))]


def run_amplitude(setup: SimulationSetup, rho: float, constants: ConstantEstimates | None = None) -> SweepRow:
    basis = setup.basis
    p = setup.coeffs.p
    state0 = scale_initial_state(setup.profiles, rho)
    _, est = integrate(
        state0,
        setup.coeffs,
        basis,
        setup.control,
        stride=setup.stride,
        thresholds=setup.thresholds,
        mode=setup.mode,
    )
    y0 = rho * rho * setup.profiles.data_norm_sq(basis)
    z0 = z0_prediction(setup.profiles, rho, p, basis)
    floor = z0 / constants.C_final if constants is not None else math.nan
    t_star = est.t_star_est if est.t_star_est is not None else math.nan
    t_last = est.thresholds_hit[-1][1] if est.thresholds_hit else math.nan
    return SweepRow(float(rho), est.status, float(t_star), y0, z0, floor, t_last)


def _run_checked(args):
    setup, rho, constants = args
    try:
        return run_amplitude(setup, rho, constants)
    except Exception as exc:  # named per amplitude so the sweep can report it
        raise SweepError(f"rho={rho!r}: {exc}") from exc


def amplitude_sweep(
    setup: SimulationSetup,
    rhos,
    constants: ConstantEstimates | None = None,
    jobs: int = 1,
) -> SweepResult:
    """One independent run per amplitude; rows are returned in ascending rho."""
    rhos = sorted(float(r) for r in rhos)
    if not rhos:
        raise SweepError("empty amplitude grid")
    tasks = [(setup, r, constants) for r in rhos]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_checked, tasks))
    else:
        rows = [_run_checked(t) for t in tasks]
    rows.sort(key=lambda r: r.rho)
    result = SweepResult(p=setup.coeffs.p, rows=rows)
    blow = result.blowup_rows()
    if len(blow) >= 3:
        result.fit = fit_scaling(result, setup.coeffs.p)
    if blow:
        p = setup.coeffs.p
        scaled = [r.t_star_est * r.rho ** (p - 2) for r in blow]
        result.floor_ratio_min = min(scaled) / scaled[-1]
    return result


def fit_scaling(result: SweepResult, p: float, upper_half: bool = False) -> ScalingFit:
    """Least squares of ``log t*`` on ``log rho`` over blow-up rows.

    With ``upper_half`` only rows with rho in the upper half of the sweep grid
    are used.
    """
    rows = result.blowup_rows()
    if upper_half:
        grid = sorted(r.rho for r in result.rows)
        cut = grid[len(grid) // 2]
        rows = [r for r in rows if r.rho >= cut]
    if len(rows) < 3:
        raise ValueError(f"need at least 3 blow-up rows to fit, got {len(rows)}")
    x = np.log([r.rho for r in rows])
    y = np.log([r.t_star_est for r in rows])
    reg = stats.linregress(x, y)
    target = -(p - 2)
    scaled = [r.t_star_est * r.rho ** (p - 2) for r in rows]
    c0 = float(min(scaled))
    return ScalingFit(
        slope=float(reg.slope),
        intercept=float(reg.intercept),
        r2=float(reg.rvalue**2),
        n=len(rows),
        target=target,
        slope_error=float(abs(reg.slope - target)),
        c0=c0,
        lower_bound_ok=bool(c0 > 0 and math.isfinite(c0)),
    )


def comparison_blowup_time(y0: float, C: float, p: float) -> float:
    """Exact blow-up time of ``y' = C y**(p/2)``, ``y(0) = y0``."""
    return 2.0 / ((p - 2) * C * y0 ** ((p - 2) / 2))


def comparison_blowup_time_numeric(y0: float, C: float, p: float) -> float:
    """Blow-up time of ``y' = C y**(p/2)`` by quadrature, independent of the closed form.

    With ``s = log(y/y0)`` the time to reach ``y`` is
    ``int_0^s ds' / (C (y0 e^s')**((p-2)/2))``; the blow-up time is the
    integral over ``[0, inf)``.
    """
    k = (p - 2) / 2

    def dt_ds(s):
        return math.exp(-k * s) / (C * y0**k)

    value, _ = sp_integrate.quad(dt_ds, 0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return float(value)


def write_svg(result: SweepResult, path, p: float) -> None:
    """Static log-log chart of t* against rho with a reference slope -(p-2)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "dampedwave"
    rows = result.blowup_rows()
    fig, ax = plt.subplots(figsize=(5, 4))
    if rows:
        rho = np.array([r.rho for r in rows])
        t = np.array([r.t_star_est for r in rows])
        ax.loglog(rho, t, "o-", label="estimated T*")
        floor = np.array([r.t_lower_bound for r in rows])
        if np.all(np.isfinite(floor)):
            ax.loglog(rho, floor, "s--", label="guaranteed floor")
        ref = t[-1] * (rho / rho[-1]) ** (-(p - 2))
        ax.loglog(rho, ref, "k:", label=f"slope {-(p - 2):g}")
    ax.set_xlabel("rho")
    ax.set_ylabel("T*")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
