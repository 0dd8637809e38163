"""Coefficients, initial profiles and amplitude-scaled states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import DomainSpec, SpectralBasis


class AdmissibilityError(ValueError):
    """Input rejected by one of the admissibility conditions.

    ``condition`` is a stable machine-readable tag used in CLI error lines.
    """

    condition = "admissibility"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return f"{self.condition}: {self.message}"


class NonnegativityViolated(AdmissibilityError):
    condition = "strong-damping-sign"


class DampingThreshold(AdmissibilityError):
    condition = "damping-threshold"


class ExponentRange(AdmissibilityError):
    condition = "exponent-range"


class NontrivialityViolated(AdmissibilityError):
    condition = "nontrivial-data"


class AmplitudeError(AdmissibilityError):
    condition = "amplitude"


class ProfileFileError(ValueError):
    """Malformed or mismatched profile file."""


@dataclass(frozen=True)
class Coefficients:
    a: float
    b: float
    p: float
    n: int

    def damping(self, eigenvalues):
        """Per-mode damping rate ``a*lambda_k + b``."""
        return self.a * eigenvalues + self.b


def exponent_upper_bound(n: int) -> float:
    """Largest admissible source exponent in dimension ``n`` (inf for n <= 2)."""
    if n <= 2:
        return math.inf
    return (2 * n - 2) / (n - 2)


def validate_coefficients(a, b, p, n, lambda_1) -> Coefficients:
    a, b, p, lambda_1 = float(a), float(b), float(p), float(lambda_1)
    n = int(n)
    if n < 1:
        raise ExponentRange(f"dimension must be >= 1, got n={n}")
    if not lambda_1 > 0:
        raise ValueError(f"lambda_1 must be positive, got {lambda_1}")
    if not a >= 0:
        raise NonnegativityViolated(f"a < 0 (a={a!r}); strong damping needs a >= 0")
    if not b > -a * lambda_1:
        raise DampingThreshold(
            f"b <= -a*lambda1 (b={b!r}, -a*lambda1={-a * lambda_1!r}); need b > -a*lambda1"
        )
    cap = exponent_upper_bound(n)
    if not (2 < p and (p < cap if math.isinf(cap) else p <= cap)):
        bound = "p < inf" if math.isinf(cap) else f"p <= (2n-2)/(n-2) = {cap!r}"
        raise ExponentRange(f"p={p!r} outside 2 < {bound} for n={n}")
    return Coefficients(a=a, b=b, p=p, n=n)


@dataclass(frozen=True, eq=False)
class ProfilePair:
    phi: np.ndarray
    h: np.ndarray
    provenance: str = ""

    def data_norm_sq(self, basis: SpectralBasis) -> float:
        """``||grad phi||^2 + ||h||^2``."""
        return basis.grad_sq_norm(self.phi) + basis.inner(self.h, self.h)


@dataclass(frozen=True, eq=False)
class State:
    psi: np.ndarray
    psi_t: np.ndarray
    t: float = 0.0


def check_nontrivial(profiles: ProfilePair, basis: SpectralBasis) -> ProfilePair:
    norm = profiles.data_norm_sq(basis)
    if not (np.isfinite(norm) and norm > 0):
        raise NontrivialityViolated(
            f"||grad phi||^2 + ||h||^2 = {norm!r}; profiles must be nontrivial"
        )
    return profiles


def _gaussian_bump(basis: SpectralBasis, center=None, width=None) -> np.ndarray:
    lengths = basis.domain.lengths
    center = [L / 2 for L in lengths] if center is None else [float(c) for c in np.atleast_1d(center)]
    if len(center) != basis.dim or not all(0 < c < L for c, L in zip(center, lengths)):
        raise ValueError(f"gaussian center {center} must lie inside the domain")
    width = min(lengths) / 8 if width is None else float(width)
    r2 = sum((X - c) ** 2 for X, c in zip(basis.mesh, center))
    # the boundary maximum sits at the nearest wall; subtracting it and
    # clipping makes the bump vanish on the whole boundary
    wall = min(min(c, L - c) for c, L in zip(center, lengths))
    edge = math.exp(-(wall**2) / (2 * width**2))
    return np.maximum(np.exp(-r2 / (2 * width**2)) - edge, 0.0)


def make_profile(kind: str, basis: SpectralBasis, **params) -> ProfilePair:
    """Build a named initial profile pair and check it is nontrivial.

    Kinds
    -----
    ``first-mode``
        ``phi`` is the lowest sine mode, ``h = 0``.
    ``mode``
        ``phi`` is the sine mode ``k`` (int, or tuple in 2D), ``h = 0``.
    ``gaussian``
        Gaussian bump (``center``, ``width``) clipped to zero at the boundary.
    ``random``
        Band-limited random pair from ``seed`` over the lowest ``modes`` modes.
    ``from-file``
        Nodal values read by :func:`load_profile`; needs ``path``.

    ``amplitude`` (default 1) multiplies ``phi``; ``velocity`` multiplies a copy
    of the displacement shape used as ``h`` (default 0) for analytic kinds.
    """
    amp = float(params.pop("amplitude", 1.0))
    vel = float(params.pop("velocity", 0.0))
    if kind == "first-mode":
        shape = basis.mode(*(1,) * basis.dim)
    elif kind == "mode":
        k = params.pop("k", 1)
        k = (int(k),) * basis.dim if np.isscalar(k) else tuple(int(i) for i in k)
        shape = basis.mode(*k)
    elif kind == "gaussian":
        shape = _gaussian_bump(basis, params.pop("center", None), params.pop("width", None))
    elif kind == "random":
        return check_nontrivial(_random_profile(basis, amp, **params), basis)
    elif kind == "from-file":
        return check_nontrivial(load_profile(params.pop("path"), basis.domain), basis)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    if params:
        raise ValueError(f"unused profile parameters {sorted(params)}")
    prof = ProfilePair(phi=amp * shape, h=vel * shape, provenance=kind)
    return check_nontrivial(prof, basis)


def _random_profile(basis, amp=1.0, seed=0, modes=8, decay=1.0) -> ProfilePair:
    rng = np.random.default_rng(seed)
    mask = np.zeros(basis.shape)
    mask[(slice(0, modes),) * basis.dim] = 1.0
    decay_w = (basis.lambda_1 / basis.eigenvalues) ** decay
    c_phi = rng.standard_normal(basis.shape) * mask * decay_w
    c_h = rng.standard_normal(basis.shape) * mask * decay_w
    return ProfilePair(
        phi=amp * basis.inverse(c_phi),
        h=amp * basis.inverse(c_h),
        provenance=f"random(seed={seed},modes={modes})",
    )


def scale_initial_state(profiles: ProfilePair, rho: float) -> State:
    """Initial state ``(rho*phi, rho*h)`` at ``t = 0``."""
    rho = float(rho)
    if not (np.isfinite(rho) and rho > 0):
        raise AmplitudeError(f"rho must be > 0, got {rho!r}")
    return State(psi=rho * profiles.phi, psi_t=rho * profiles.h, t=0.0)


# Profile files: one header line "# dim n_grid L_x [L_y]" followed by one row
# "phi h" per interior node in C order.


def save_profile(path, profiles: ProfilePair, domain: DomainSpec) -> None:
    header = " ".join([str(domain.dim), str(domain.n_grid)] + [f"{L:.17g}" for L in domain.lengths])
    data = np.column_stack([profiles.phi.ravel(), profiles.h.ravel()])
    np.savetxt(path, data, fmt="%.17g", header=header, comments="# ")


def load_profile(path, domain: DomainSpec) -> ProfilePair:
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline()
            if not header.startswith("#"):
                raise ProfileFileError(f"{path}: missing '# dim n_grid lengths' header")
            fields = header[1:].split()
            dim, n_grid = int(fields[0]), int(fields[1])
            lengths = tuple(float(x) for x in fields[2:])
            data = np.loadtxt(fh, ndmin=2)
    except (OSError, ValueError, IndexError) as exc:
        if isinstance(exc, ProfileFileError):
            raise
        raise ProfileFileError(f"{path}: {exc}") from exc
    if dim != domain.dim or n_grid != domain.n_grid or len(lengths) != dim or not np.allclose(
        lengths, domain.lengths, rtol=1e-12, atol=0
    ):
        raise ProfileFileError(
            f"{path}: header (dim={dim}, n_grid={n_grid}, lengths={lengths}) "
            f"does not match domain {domain}"
        )
    expected = int(np.prod(domain.shape))
    if data.shape != (expected, 2):
        raise ProfileFileError(f"{path}: expected {expected} rows of 'phi h', got {data.shape}")
    return ProfilePair(
        phi=data[:, 0].reshape(domain.shape),
        h=data[:, 1].reshape(domain.shape),
        provenance=f"file:{path.name}",
    )
