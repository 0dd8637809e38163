"""Spectral IMEX time stepping with blow-up detection.

Each sine mode obeys ``c'' + (a*lambda_k + b) c' + lambda_k c = f_k`` with
``f_k`` the sine coefficient of ``|psi|**(p-2)*psi``. A step is the Strang
composition

    exact linear flow (dt/2) -> source kick v += dt*f(psi) -> exact linear flow (dt/2)

which is second order in ``dt`` and unconditionally stable for the stiff
``a*lambda_k`` damping of high modes. Without the source the update is the
exact solution of the semi-discrete linear system.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .functionals import Trajectory, sample_spectral, source_term
from .model import Coefficients, State
from .spectral import SpectralBasis

BLOWUP = "blow-up-detected"
SURVIVED = "survived-to-horizon"
STALLED = "stalled"

MODES = ("full", "linear-only")


class BlowupOverflow(ArithmeticError):
    """A step produced non-finite values."""


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class StepControl:
    """Adaptive step parameters.

    ``safety`` is the largest accepted relative increase of Y in one step;
    a step exceeding it is retried with half the step size.
    """

    dt0: float
    dt_min: float
    t_max: float
    safety: float = 0.1

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt0):
            raise ConfigurationError(f"need 0 < dt_min <= dt0, got dt_min={self.dt_min}, dt0={self.dt0}")
        if not self.t_max > 0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")
        if not self.safety > 0:
            raise ConfigurationError(f"safety must be positive, got {self.safety}")

    @property
    def halvings(self) -> int:
        """Number of times dt0 may be halved before reaching dt_min."""
        return int(math.floor(math.log2(self.dt0 / self.dt_min) + 1e-9))


@dataclass(frozen=True)
class Thresholds:
    """Geometric levels ``base_factor * Y(0) * factor**j``, ``j < count``.

    ``fit_window`` is the number of trailing crossings used to extrapolate T*;
    early crossings of large-amplitude runs lie before the asymptotic regime.
    """

    base_factor: float = 100.0
    count: int = 5
    factor: float = 4.0
    fit_window: int = 5

    def __post_init__(self):
        if not self.base_factor > 1 or not self.factor > 1:
            raise ConfigurationError("threshold base_factor and factor must exceed 1")
        if int(self.count) != self.count or self.count < 3:
            raise ConfigurationError(f"need at least 3 threshold levels, got {self.count}")
        if int(self.fit_window) != self.fit_window or self.fit_window < 3:
            raise ConfigurationError(f"fit_window must be >= 3, got {self.fit_window}")

    def levels(self, y0: float) -> list[float]:
        if not y0 > 0:
            return []
        return [self.base_factor * y0 * self.factor**j for j in range(int(self.count))]


@dataclass
class LifespanEstimate:
    status: str
    thresholds_hit: list[tuple[float, float]] = field(default_factory=list)
    t_star_est: float | None = None
    extrapolation_residual: float | None = None
    method: str | None = None
    last_Y: float = 0.0
    last_t: float = 0.0
    lp_crossings: list[tuple[float, float]] = field(default_factory=list)
    steps: int = 0
    dt_final: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds_hit"] = [[m, t] for m, t in self.thresholds_hit]
        d["lp_crossings"] = [[m, t] for m, t in self.lp_crossings]
        return d


def linear_propagator(lam, damping, dt):
    """Exact flow matrix of ``c'' + damping*c' + lam*c = 0`` over ``dt``.

    Returns ``(m11, m12, m21, m22)`` arrays so that
    ``c(dt) = m11*c + m12*v`` and ``v(dt) = m21*c + m22*v``.
    """
    lam = np.asarray(lam, dtype=float)
    mu = 0.5 * np.broadcast_to(np.asarray(damping, dtype=float), lam.shape)
    w2 = lam - mu * mu
    ec = np.empty(lam.shape)  # exp(-mu t) * C(t)
    es = np.empty(lam.shape)  # exp(-mu t) * S(t), S(t) = sin(w t)/w or sinh(s t)/s
    m11 = np.empty(lam.shape)
    m22 = np.empty(lam.shape)

    under = w2 > 0
    if under.any():
        w = np.sqrt(w2[under])
        e = np.exp(-mu[under] * dt)
        ec[under] = e * np.cos(w * dt)
        es[under] = e * np.sin(w * dt) / w

    crit = w2 == 0
    if crit.any():
        e = np.exp(-mu[crit] * dt)
        ec[crit] = e
        es[crit] = dt * e

    over = w2 < 0
    s = np.sqrt(-w2, where=over, out=np.zeros(lam.shape))
    small = over & (s * dt < 1.0)
    if small.any():
        e = np.exp(-mu[small] * dt)
        x = s[small] * dt
        ec[small] = e * np.cosh(x)
        es[small] = e * np.sinh(x) / s[small]

    under_or_small = ~over | small
    m11[under_or_small] = ec[under_or_small] + mu[under_or_small] * es[under_or_small]
    m22[under_or_small] = ec[under_or_small] - mu[under_or_small] * es[under_or_small]

    big = over & ~small
    if big.any():
        # roots r+ = s - mu = -lam/(mu + s) (stable form) and r- = -(mu + s)
        sb, mb, lb = s[big], mu[big], lam[big]
        r_plus = -lb / (mb + sb)
        ep = np.exp(r_plus * dt)
        em = np.exp(-(mb + sb) * dt)
        es[big] = (ep - em) / (2 * sb)
        m11[big] = ((sb + mb) * ep + r_plus * em) / (2 * sb)
        m22[big] = (r_plus * ep + (sb + mb) * em) / (2 * sb)

    return m11, es, -lam * es, m22


class SpectralStepper:
    """Strang-split stepper working on sine coefficients ``(c, v)``."""

    def __init__(self, basis: SpectralBasis, coeffs: Coefficients, mode: str = "full"):
        if mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
        self.basis = basis
        self.coeffs = coeffs
        self.mode = mode
        self._damping = coeffs.damping(basis.eigenvalues)
        self._cache: dict[float, tuple] = {}

    def _prop(self, dt: float):
        prop = self._cache.get(dt)
        if prop is None:
            prop = linear_propagator(self.basis.eigenvalues, self._damping, dt)
            self._cache[dt] = prop
        return prop

    def linear_flow(self, c, v, dt):
        m11, m12, m21, m22 = self._prop(dt)
        return m11 * c + m12 * v, m21 * c + m22 * v

    def advance(self, c, v, dt):
        if self.mode == "linear-only":
            c, v = self.linear_flow(c, v, dt)
        else:
            c, v = self.linear_flow(c, v, 0.5 * dt)
            psi = self.basis.inverse(c)
            v = v + dt * self.basis.forward(source_term(psi, self.coeffs.p))
            c, v = self.linear_flow(c, v, 0.5 * dt)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(v))):
            raise BlowupOverflow("non-finite mode coefficients")
        return c, v


def step(state: State, coeffs: Coefficients, basis: SpectralBasis, dt: float, mode: str = "full") -> State:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    stepper = SpectralStepper(basis, coeffs, mode)
    c, v = stepper.advance(basis.forward(state.psi), basis.forward(state.psi_t), dt)
    return State(psi=basis.inverse(c), psi_t=basis.inverse(v), t=state.t + dt)


def _log_crossing(t0, y0, t1, y1, level):
    if y0 > 0 and y1 > y0:
        frac = (math.log(level) - math.log(y0)) / (math.log(y1) - math.log(y0))
        return t0 + min(max(frac, 0.0), 1.0) * (t1 - t0)
    return t1


def integrate(
    state0: State,
    coeffs: Coefficients,
    basis: SpectralBasis,
    control: StepControl,
    stride: int = 1,
    thresholds: Thresholds | None = None,
    mode: str = "full",
    metadata: dict | None = None,
) -> tuple[Trajectory, LifespanEstimate]:
    """Advance until the horizon, a stall at ``dt_min``, or the top Y threshold.

    Samples are stored every ``stride`` base steps (multiples of ``dt0``), so the
    stored trajectory is uniformly spaced even after dt has been halved.
    """
    if int(stride) != stride or stride < 1:
        raise ConfigurationError(f"stride must be a positive integer, got {stride}")
    thresholds = thresholds or Thresholds()
    stepper = SpectralStepper(basis, coeffs, mode)
    K = control.halvings
    unit = control.dt0 / 2**K
    stride_ticks = int(stride) * 2**K
    p = coeffs.p

    c = basis.forward(state0.psi)
    v = basis.forward(state0.psi_t)
    psi = np.asarray(state0.psi, dtype=float)
    y = basis.grad_sq_norm_coeffs(c) + basis.sq_norm_coeffs(v)
    lp = basis.lq_norm(psi, p)
    levels = thresholds.levels(y)
    # L^p grows more slowly than Y near blow-up; fourth-root levels keep the
    # L^p crossings observable before the top Y level ends the run
    lp_levels = [lp * (L / y) ** 0.25 for L in levels] if lp > 0 else []

    traj = Trajectory(metadata=dict(metadata or {}))
    t0 = float(state0.t)
    traj.append(sample_spectral(t0, c, v, psi, state0.psi_t, coeffs, basis), control.dt0)

    hits: list[tuple[float, float]] = []
    lp_hits: list[tuple[float, float]] = []
    ticks = 0
    m = 0
    steps = 0
    status = None
    while status is None:
        t = t0 + ticks * unit
        if t >= t0 + control.t_max:
            status = SURVIVED
            break
        dt = control.dt0 / 2**m
        try:
            c1, v1 = stepper.advance(c, v, dt)
            y1 = basis.grad_sq_norm_coeffs(c1) + basis.sq_norm_coeffs(v1)
            if not math.isfinite(y1):
                raise BlowupOverflow("non-finite Y")
            ok = y <= 0 or y1 <= y * (1.0 + control.safety)
        except BlowupOverflow:
            ok = False
        if not ok:
            if m < K:
                m += 1
                continue
            status = STALLED
            break

        ticks += 2 ** (K - m)
        steps += 1
        t1 = t0 + ticks * unit
        psi = basis.inverse(c1)
        while len(hits) < len(levels) and y1 >= levels[len(hits)]:
            hits.append((levels[len(hits)], _log_crossing(t, y, t1, y1, levels[len(hits)])))
        if lp_levels:
            lp1 = basis.lq_norm(psi, p)
            while len(lp_hits) < len(lp_levels) and lp1 >= lp_levels[len(lp_hits)]:
                level = lp_levels[len(lp_hits)]
                lp_hits.append((level, _log_crossing(t, lp, t1, lp1, level)))
            lp = lp1
        c, v, y = c1, v1, y1
        if ticks % stride_ticks == 0:
            traj.append(sample_spectral(t1, c, v, psi, basis.inverse(v), coeffs, basis), dt)
        if levels and len(hits) == len(levels):
            status = BLOWUP

    est = LifespanEstimate(
        status=status,
        thresholds_hit=hits,
        last_Y=y,
        last_t=t0 + ticks * unit,
        lp_crossings=lp_hits,
        steps=steps,
        dt_final=control.dt0 / 2**m,
    )
    if status == BLOWUP:
        est.t_star_est, est.extrapolation_residual, est.method = estimate_lifespan(
            hits, window=thresholds.fit_window
        )
    traj.metadata.update(
        a=coeffs.a, b=coeffs.b, p=coeffs.p, mode=mode, domain=basis.domain.ident(), status=status
    )
    return traj, est


def _aitken(t):
    d1 = t[-2] - t[-3]
    d2 = t[-1] - t[-2]
    if not (d1 > d2 > 0):
        return None
    return t[-1] + d2 * d2 / (d1 - d2)


def estimate_lifespan(thresholds_hit, window: int | None = None) -> tuple[float, float, str]:
    """Extrapolate the blow-up time from threshold crossings ``(M_j, t_j)``.

    Fits ``t_j = T - c * (M_j/M_0)**(-gamma)`` with ``gamma > 0`` by nonlinear
    least squares over the last ``window`` crossings (all when None). On
    failure falls back to Aitken/Richardson extrapolation of the last three
    crossings, which is exact for geometric levels and a pure power law.

    Returns ``(T, residual, method)`` where residual is the RMS misfit relative
    to the span of crossing times.
    """
    if len(thresholds_hit) < 3:
        raise ValueError(f"need at least 3 threshold crossings, got {len(thresholds_hit)}")
    if window is not None:
        thresholds_hit = list(thresholds_hit)[-max(int(window), 3):]
    M = np.array([m for m, _ in thresholds_hit], dtype=float)
    t = np.array([tt for _, tt in thresholds_hit], dtype=float)
    if np.any(np.diff(M) <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("threshold levels and crossing times must be strictly increasing")
    x = M / M[0]
    span = t[-1] - t[0]

    T_guess = _aitken(t)
    if T_guess is None:
        T_guess = t[-1] + (t[-1] - t[-2])
    d1, d2 = t[-2] - t[-3], t[-1] - t[-2]
    ratio = x[-1] / x[-2]
    g_guess = -math.log(d2 / d1) / math.log(ratio) if d1 > 0 and 0 < d2 < d1 else 1.0
    c_guess = max((T_guess - t[0]), span)

    def resid(theta):
        T, cc, g = theta
        return (T - cc * x ** (-g) - t) / span

    fit_T = None
    try:
        sol = optimize.least_squares(
            resid,
            [T_guess, c_guess, g_guess],
            bounds=([-np.inf, 0.0, 1e-8], [np.inf, np.inf, np.inf]),
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
        if sol.success and np.all(np.isfinite(sol.x)) and sol.x[0] > t[-1]:
            fit_T = float(sol.x[0])
            fit_res = float(np.sqrt(np.mean(sol.fun**2)))
    except (ValueError, np.linalg.LinAlgError):
        pass
    if fit_T is not None:
        return fit_T, fit_res, "power-fit"

    T = _aitken(t)
    if T is None:
        raise ValueError("crossing times not geometrically converging; cannot extrapolate")
    return float(T), float("nan"), "richardson"
