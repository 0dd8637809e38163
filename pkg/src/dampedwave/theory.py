"""Checks of the energy-inequality chain along computed trajectories.

The chain, for ``Y = ||grad psi||^2 + ||psi_t||^2``::

    Y' = -2 (a||grad psi_t||^2 + b||psi_t||^2) + 2 int |psi|^(p-2) psi psi_t
    a||grad psi_t||^2 + b||psi_t||^2 >= (a lambda_1 + b)||psi_t||^2 >= 0
    int |psi|^(p-1)|psi_t| <= ||psi||_{2p-2}^(p-1) ||psi_t||_2
    ||psi||_{2p-2} <= C_2p2 ||grad psi||_2
    Y' <= C_chain Y^(p/2),                C_chain = 2 C_2p2^(p-1)
    Z = Y^(-(p-2)/2) >= Z(0) - (p-2)/2 C_chain t
    T* >= Z(0) / C_final,                 C_final = (p-2)/2 C_chain

Embedding constants are estimated numerically and are therefore lower bounds
on the true suprema; they are inflated by a safety factor and, where a
trajectory ensemble is available, combined with the measured growth constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .functionals import Trajectory, z0_prediction
from .integrator import BLOWUP, LifespanEstimate
from .model import ProfilePair
from .spectral import SpectralBasis

SAFETY_FACTOR = 1.05


@dataclass(frozen=True)
class ConstantEstimates:
    p: float
    C_p: float
    C_2p2: float
    C_chain: float
    C_meas: float = 0.0
    raw_C_p: float = 0.0
    raw_C_2p2: float = 0.0
    safety: float = SAFETY_FACTOR
    starts: int = 0
    iterations: int = 0
    seed: int = 0

    @property
    def working_chain(self) -> float:
        """Constant used in the scalar inequality: analysis vs measured, whichever is larger."""
        return max(self.C_chain, self.C_meas)

    @property
    def C_final(self) -> float:
        return 0.5 * (self.p - 2) * self.working_chain

    def with_measured(self, c_meas: float) -> "ConstantEstimates":
        d = asdict(self)
        d["C_meas"] = float(c_meas)
        return ConstantEstimates(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(working_chain=self.working_chain, C_final=self.C_final)
        return d


@dataclass
class InequalityReport:
    identity_residual: float
    dissipation_min: float
    hoelder_margin: float
    hoelder_rel_margin: float
    components_ok: bool
    scalar_sup: float
    z_margin: float
    t_lower_bound: float
    t_bound_satisfied: bool
    t_star_est: float | None = None
    samples: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _random_start(rng, mask, scale):
    d = rng.standard_normal(mask.shape) * mask
    # bias towards low modes so starts are smooth
    d = d * np.where(mask > 0, 1.0 / np.maximum(scale, 1e-300) ** 0.5, 0.0)
    return d / np.linalg.norm(d)


def estimate_embedding_constant(
    basis: SpectralBasis,
    q: float,
    budget: int = 200,
    seed: int = 0,
    starts: int = 8,
    n_modes: int | None = None,
) -> float:
    """Best ratio ``||u||_q / ||grad u||_2`` found over band-limited fields.

    Projected gradient ascent on the unit sphere of the energy norm, from
    ``starts`` seeded random starts, ``budget`` iterations each. Each iterate
    takes the full normalised gradient step, which increases the convex
    objective ``||u||_q^q`` monotonically. The value returned is a lower bound
    on the true embedding constant (no safety factor applied).
    """
    q = float(q)
    if not (2 <= q < math.inf):
        raise ValueError(f"embedding exponent q={q!r} not supported (need 2 <= q < inf)")
    if budget < 1 or starts < 1:
        raise ValueError("budget and starts must be positive")
    if n_modes is None:
        n_modes = 32 if basis.dim == 1 else 16
    n_modes = min(int(n_modes), basis.domain.n_grid)
    mask = np.zeros(basis.shape)
    mask[(slice(0, n_modes),) * basis.dim] = 1.0
    # d = scale * c gives ||grad u||^2 = |d|^2
    scale = np.sqrt(basis.parseval * basis.eigenvalues) * mask

    def objective_and_grad(d):
        c = np.divide(d, scale, out=np.zeros_like(d), where=mask > 0)
        u = basis.inverse(c)
        au = np.abs(u)
        F = basis.weight * float(np.sum(au**q))
        g_c = q * basis.parseval * basis.forward(au ** (q - 2) * u)
        g = np.divide(g_c, scale, out=np.zeros_like(g_c), where=mask > 0)
        return F, g

    best = -math.inf
    for child in np.random.SeedSequence(seed).spawn(starts):
        rng = np.random.default_rng(child)
        d = _random_start(rng, mask, scale)
        F, g = objective_and_grad(d)
        for _ in range(budget):
            norm_g = np.linalg.norm(g)
            if norm_g == 0:
                break
            d_new = g / norm_g
            F_new, g_new = objective_and_grad(d_new)
            if not F_new > F * (1 + 1e-15):
                if F_new >= F:
                    d, F, g = d_new, F_new, g_new
                break
            d, F, g = d_new, F_new, g_new
        ratio = F ** (1.0 / q)
        if ratio > best:
            best = ratio
    return best


def estimate_constants(
    basis: SpectralBasis,
    p: float,
    budget: int = 200,
    seed: int = 0,
    starts: int = 8,
    n_modes: int | None = None,
    safety: float = SAFETY_FACTOR,
) -> ConstantEstimates:
    raw_p = estimate_embedding_constant(basis, p, budget, seed, starts, n_modes)
    raw_2p2 = estimate_embedding_constant(basis, 2 * p - 2, budget, seed, starts, n_modes)
    C_2p2 = safety * raw_2p2
    return ConstantEstimates(
        p=float(p),
        C_p=safety * raw_p,
        C_2p2=C_2p2,
        C_chain=2 * C_2p2 ** (p - 1),
        raw_C_p=raw_p,
        raw_C_2p2=raw_2p2,
        safety=safety,
        starts=starts,
        iterations=budget,
        seed=seed,
    )


def _uniform_step(t: np.ndarray) -> float:
    dt = np.diff(t)
    if dt.size == 0 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("trajectory sampling is not uniform")
    return float(dt[0])


def _has_source(traj: Trajectory) -> bool:
    return traj.metadata.get("mode", "full") != "linear-only"


def identity_defects(traj: Trajectory) -> np.ndarray:
    """Per interior sample: ``|Y' + 2*dissipation - 2*source_pairing| / max(1, |Y'|)``.

    ``Y'`` is the centred difference over the stored sampling grid. The source
    pairing is dropped for trajectories whose metadata mode is ``linear-only``.
    """
    if len(traj) < 3:
        raise ValueError(f"need at least 3 samples, got {len(traj)}")
    t = traj.column("t")
    h = _uniform_step(t)
    Y = traj.column("Y")
    dY = (Y[2:] - Y[:-2]) / (2 * h)
    rhs = -2 * traj.column("dissipation")[1:-1]
    if _has_source(traj):
        rhs = rhs + 2 * traj.column("source_pairing")[1:-1]
    return np.abs(dY - rhs) / np.maximum(1.0, np.abs(dY))


def energy_identity_residual(traj: Trajectory, coeffs=None) -> float:
    return float(np.max(identity_defects(traj)))


def growth_rates(traj: Trajectory, p: float) -> np.ndarray:
    """Pointwise ``Y'/Y^(p/2)`` using the identity for ``Y'``."""
    Y = traj.column("Y")
    if np.any(Y <= 0):
        raise ValueError("degenerate trajectory: Y vanishes")
    dY = -2 * traj.column("dissipation")
    if _has_source(traj):
        dY = dY + 2 * traj.column("source_pairing")
    return dY / Y ** (p / 2)


def measured_chain_constant(trajectories, p: float) -> float:
    """Empirical ``C`` with ``Y' <= C Y^(p/2)`` on the given trajectories.

    Takes the larger of the pointwise rates and the secant rates
    ``2/(p-2) * (Z_i - Z_{i+1}) / (t_{i+1} - t_i)``; the secant is a mean value
    of ``Y'/Y^(p/2)`` over each interval, so telescoping makes the integrated
    bound hold exactly at every stored sample.
    """
    best = 0.0
    for traj in trajectories:
        rates = growth_rates(traj, p)
        t = traj.column("t")
        Z = traj.column("Y") ** (-(p - 2) / 2)
        secant = 2.0 / (p - 2) * (Z[:-1] - Z[1:]) / np.diff(t)
        cand = [best, float(np.max(rates))]
        if secant.size:
            cand.append(float(np.max(secant)))
        best = max(cand)
    return best


def z_lower_envelope(traj: Trajectory, p: float, chain_constant: float) -> np.ndarray:
    """``Z(t) - (Z(t0) - (p-2)/2 * C * (t - t0))`` at every sample."""
    t = traj.column("t")
    Z = traj.column("Y") ** (-(p - 2) / 2)
    return Z - (Z[0] - 0.5 * (p - 2) * chain_constant * (t - t[0]))


def check_chain(
    traj: Trajectory,
    constants: ConstantEstimates,
    p: float,
    lifespan: LifespanEstimate | None = None,
) -> InequalityReport:
    Y = traj.column("Y")
    if np.any(Y <= 0):
        raise ValueError("degenerate trajectory: Y vanishes")
    diss = traj.column("dissipation")
    floor = traj.column("dissipation_floor")
    rhs = traj.column("l2p2_norm") ** (p - 1) * traj.column("vel_norm")
    lhs = traj.column("abs_source_pairing")
    margin = rhs - lhs
    rel = margin / np.maximum(rhs, np.finfo(float).tiny)
    root = np.sqrt(Y) * (1 + 1e-12)
    components_ok = bool(np.all(traj.column("grad_norm") <= root) and np.all(traj.column("vel_norm") <= root))
    try:
        residual = energy_identity_residual(traj)
    except ValueError:
        residual = math.nan
    z0 = Y[0] ** (-(p - 2) / 2)
    t_lb = z0 / constants.C_final
    t_star = None if lifespan is None else lifespan.t_star_est
    satisfied = lifespan is None or lifespan.status != BLOWUP or t_star >= t_lb
    return InequalityReport(
        identity_residual=residual,
        dissipation_min=float(min(np.min(diss - floor), np.min(floor))),
        hoelder_margin=float(np.min(margin)),
        hoelder_rel_margin=float(np.min(rel)),
        components_ok=components_ok,
        scalar_sup=float(np.max(growth_rates(traj, p))),
        z_margin=float(np.min(z_lower_envelope(traj, p, constants.working_chain))),
        t_lower_bound=t_lb,
        t_bound_satisfied=bool(satisfied),
        t_star_est=t_star,
        samples=len(traj),
    )


def predicted_lifespan_floor(
    profiles: ProfilePair, rho: float, p: float, constants: ConstantEstimates, basis: SpectralBasis
) -> float:
    """Guaranteed existence time ``Z(0)/C_final``; scales as ``rho**-(p-2)``."""
    return z0_prediction(profiles, rho, p, basis) / constants.C_final
