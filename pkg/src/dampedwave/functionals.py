"""Scalar functionals of a state: Y, Z, Lebesgue norms, dissipation, source pairing."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import Coefficients, ProfilePair, State, check_nontrivial
from .spectral import SpectralBasis

# Trajectory CSV column order. The trailing ``abs_source_pairing`` column holds
# the integral of |psi|^(p-1)|psi_t| needed by the Hoelder check.
CSV_COLUMNS = (
    "t",
    "dt",
    "Y",
    "Z",
    "lp_norm",
    "l2p2_norm",
    "dissipation",
    "dissipation_floor",
    "source_pairing",
    "grad_norm",
    "vel_norm",
    "abs_source_pairing",
)


@dataclass(frozen=True)
class FunctionalSample:
    t: float
    Y: float
    Z: float
    lp_norm: float
    l2p2_norm: float
    dissipation: float
    dissipation_floor: float
    source_pairing: float
    grad_norm: float
    vel_norm: float
    abs_source_pairing: float


def source_term(psi: np.ndarray, p: float) -> np.ndarray:
    """``|psi|**(p-2) * psi``, continuous at ``psi = 0``."""
    return np.abs(psi) ** (p - 2) * psi


def z_of_y(Y: float, p: float) -> float:
    if not Y > 0:
        raise ValueError(f"Y must be positive, got {Y!r}")
    if not p > 2:
        raise ValueError(f"p must exceed 2, got {p!r}")
    return float(Y) ** (-(p - 2) / 2)


def _z_or_inf(Y: float, p: float) -> float:
    return z_of_y(Y, p) if Y > 0 else math.inf


def sample_spectral(
    t: float,
    c: np.ndarray,
    v: np.ndarray,
    psi: np.ndarray,
    psi_t: np.ndarray,
    coeffs: Coefficients,
    basis: SpectralBasis,
) -> FunctionalSample:
    """Sample from grid fields together with their sine coefficients."""
    p = coeffs.p
    grad_sq = basis.grad_sq_norm_coeffs(c)
    vel_sq = basis.sq_norm_coeffs(v)
    Y = grad_sq + vel_sq
    diss = basis.parseval * float(np.sum(coeffs.damping(basis.eigenvalues) * v * v))
    floor = (coeffs.a * basis.lambda_1 + coeffs.b) * vel_sq
    abs_psi = np.abs(psi)
    pm2 = abs_psi ** (p - 2)
    pairing = basis.weight * float(np.sum(pm2 * psi * psi_t))
    abs_pairing = basis.weight * float(np.sum(pm2 * abs_psi * np.abs(psi_t)))
    return FunctionalSample(
        t=float(t),
        Y=Y,
        Z=_z_or_inf(Y, p),
        lp_norm=basis.lq_norm(psi, p),
        l2p2_norm=basis.lq_norm(psi, 2 * p - 2),
        dissipation=diss,
        dissipation_floor=floor,
        source_pairing=pairing,
        grad_norm=math.sqrt(grad_sq),
        vel_norm=math.sqrt(vel_sq),
        abs_source_pairing=abs_pairing,
    )


def sample(state: State, coeffs: Coefficients, basis: SpectralBasis) -> FunctionalSample:
    c = basis.forward(state.psi)
    v = basis.forward(state.psi_t)
    return sample_spectral(state.t, c, v, state.psi, state.psi_t, coeffs, basis)


def phase_norm_sq(state: State, basis: SpectralBasis) -> float:
    """Y = ||grad psi||^2 + ||psi_t||^2."""
    return basis.grad_sq_norm(state.psi) + basis.inner(state.psi_t, state.psi_t)


def z0_prediction(profiles: ProfilePair, rho: float, p: float, basis: SpectralBasis) -> float:
    """Closed-form ``Z(0) = rho**-(p-2) * (||grad phi||^2 + ||h||^2)**(-(p-2)/2)``."""
    check_nontrivial(profiles, basis)
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho!r}")
    norm = profiles.data_norm_sq(basis)
    return float(rho) ** (-(p - 2)) * norm ** (-(p - 2) / 2)


@dataclass
class Trajectory:
    samples: list[FunctionalSample] = field(default_factory=list)
    dts: list[float] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, s: FunctionalSample, dt: float) -> None:
        if self.samples and not s.t > self.samples[-1].t:
            raise ValueError(f"sample time {s.t} not after {self.samples[-1].t}")
        self.samples.append(s)
        self.dts.append(float(dt))

    def __len__(self):
        return len(self.samples)

    def column(self, name: str) -> np.ndarray:
        if name == "dt":
            return np.asarray(self.dts, dtype=float)
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    def to_csv(self, path) -> None:
        names = [f.name for f in fields(FunctionalSample)]
        order = [names.index(c) if c != "dt" else None for c in CSV_COLUMNS]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for s, dt in zip(self.samples, self.dts):
                vals = astuple(s)
                w.writerow([_fmt(dt if i is None else vals[i]) for i in order])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty trajectory file")
        header = rows[0]
        required = CSV_COLUMNS[:-1]
        if tuple(header[: len(required)]) != required:
            raise ValueError(f"{path}: header {header} does not start with {list(required)}")
        has_abs = len(header) > len(required) and header[len(required)] == CSV_COLUMNS[-1]
        traj = cls(metadata={"source": str(path)})
        for row in rows[1:]:
            vals = {name: float(x) for name, x in zip(header, row)}
            if not has_abs:
                vals["abs_source_pairing"] = abs(vals["source_pairing"])
            dt = vals.pop("dt")
            traj.append(FunctionalSample(**{f.name: vals[f.name] for f in fields(FunctionalSample)}), dt)
        if not traj.samples:
            raise ValueError(f"{path}: no samples")
        return traj


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"

