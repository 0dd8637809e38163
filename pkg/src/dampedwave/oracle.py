"""Independent finite-difference solver used to cross-check the spectral one.

Second-order central differences in space, explicit velocity-Verlet in time
with a corrector on the velocity-dependent damping, so the scheme stays
second order. Everything, including ``a*lap(psi_t)``, is explicit, so the step
is bounded by ``h**2 / (2*a*dim)`` (when ``a > 0``) and by the wave CFL limit.
Shares nothing with the spectral path beyond the grid layout.
"""

from __future__ import annotations

import math

import numpy as np

from .model import Coefficients, State
from .spectral import DomainSpec


class StabilityError(ValueError):
    def __init__(self, dt, dt_max):
        super().__init__(f"dt={dt!r} exceeds explicit stability limit; use dt <= {dt_max!r}")
        self.dt = dt
        self.suggested_dt = dt_max


def fd_laplacian(field: np.ndarray, spacing) -> np.ndarray:
    """3-point (5-point in 2D) Laplacian with zero Dirichlet ghost values."""
    f = np.pad(np.asarray(field, dtype=float), 1)
    out = np.zeros(field.shape)
    inner = (slice(1, -1),) * field.ndim
    for ax, h in enumerate(spacing):
        lo = list(inner)
        hi = list(inner)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out += (f[tuple(lo)] - 2 * f[inner] + f[tuple(hi)]) / h**2
    return out


def stability_limit(coeffs: Coefficients, domain: DomainSpec) -> float:
    h = min(domain.spacing)
    dim = domain.dim
    limit = 0.9 * h / math.sqrt(dim)
    if coeffs.a > 0:
        limit = min(limit, h * h / (2 * coeffs.a * dim))
    if coeffs.b != 0:
        limit = min(limit, 1.0 / abs(coeffs.b))
    return limit


def _accel(psi, v, coeffs, spacing, source):
    out = fd_laplacian(psi, spacing) - coeffs.b * v
    if source:
        out += np.abs(psi) ** (coeffs.p - 2) * psi
    if coeffs.a:
        out += coeffs.a * fd_laplacian(v, spacing)
    return out


def fd_oracle_step(state: State, coeffs: Coefficients, dt: float, domain: DomainSpec, mode: str = "full") -> State:
    limit = stability_limit(coeffs, domain)
    if not 0 < dt <= limit:
        raise StabilityError(dt, limit)
    return _verlet(state.psi, state.psi_t, state.t, coeffs, dt, domain.spacing, mode != "linear-only")


def _verlet(psi, v, t, coeffs, dt, spacing, source=True) -> State:
    half = 0.5 * dt
    v_half = v + half * _accel(psi, v, coeffs, spacing, source)
    psi_new = psi + dt * v_half
    v_pred = v_half + half * _accel(psi_new, v_half, coeffs, spacing, source)
    v_new = v_half + half * _accel(psi_new, v_pred, coeffs, spacing, source)
    return State(psi=psi_new, psi_t=v_new, t=t + dt)


def fd_phase_norm_sq(state: State, domain: DomainSpec) -> float:
    """Discrete Y: ``-<lap_h psi, psi>_h + ||psi_t||_h**2``."""
    w = float(np.prod(domain.spacing))
    grad_sq = -w * float(np.sum(fd_laplacian(state.psi, domain.spacing) * state.psi))
    return grad_sq + w * float(np.sum(state.psi_t**2))


def fd_run(
    state0: State,
    coeffs: Coefficients,
    domain: DomainSpec,
    dt: float,
    t_end: float,
    every: int = 1,
    y_stop: float = math.inf,
    mode: str = "full",
):
    """Fixed-step run; returns ``(times, Y, final_state)``.

    Stops early once Y exceeds ``y_stop`` (the offending step is included).
    """
    limit = stability_limit(coeffs, domain)
    if not 0 < dt <= limit:
        raise StabilityError(dt, limit)
    source = mode != "linear-only"
    n_steps = int(round(t_end / dt))
    state = state0
    times = [state.t]
    ys = [fd_phase_norm_sq(state, domain)]
    for i in range(1, n_steps + 1):
        state = _verlet(state.psi, state.psi_t, state0.t + (i - 1) * dt, coeffs, dt, domain.spacing, source)
        y = fd_phase_norm_sq(state, domain)
        if not math.isfinite(y):
            break
        if i % every == 0 or y > y_stop:
            times.append(state.t)
            ys.append(y)
        if y > y_stop:
            break
    return np.array(times), np.array(ys), state


def fd_crossings(state0, coeffs, domain, dt, levels, t_end):
    """Times at which the finite-difference Y first crosses each level."""
    times, ys, _ = fd_run(state0, coeffs, domain, dt, t_end, every=1, y_stop=levels[-1])
    out = []
    for level in levels:
        idx = np.flatnonzero(ys >= level)
        if idx.size == 0:
            break
        i = int(idx[0])
        if i == 0:
            out.append((level, float(times[0])))
            continue
        y0, y1 = ys[i - 1], ys[i]
        frac = (math.log(level) - math.log(y0)) / (math.log(y1) - math.log(y0))
        out.append((level, float(times[i - 1] + frac * (times[i] - times[i - 1]))))
    return out
