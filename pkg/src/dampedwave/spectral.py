"""Dirichlet sine basis on intervals and rectangles.

Fields live on the interior nodes ``x_j = j*h, j = 1..N`` of each axis, so the
homogeneous Dirichlet condition holds by construction. The discrete sine
transform (DST-I) diagonalises the Laplacian; eigenvalues are the continuous
ones, ``(k*pi/L)**2`` per axis.

Quadrature uses equal weights ``h`` (``h_x*h_y`` in 2D) on interior nodes,
which is the trapezoidal rule for fields vanishing on the boundary. With this
rule the transform satisfies an exact Parseval identity::

    integrate(f**2) == prod(L/2) * sum(coeffs**2)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft, sparse
from scipy.sparse import linalg as spla


class DomainError(ValueError):
    """Invalid domain geometry or grid."""


@dataclass(frozen=True)
class DomainSpec:
    """Interval (dim=1) or rectangle (dim=2) with ``n_grid`` interior nodes per axis."""

    dim: int
    lengths: tuple[float, ...]
    n_grid: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")
        lengths = tuple(float(L) for L in np.atleast_1d(self.lengths))
        if len(lengths) != self.dim:
            raise DomainError(f"expected {self.dim} length(s), got {len(lengths)}")
        if not all(np.isfinite(L) and L > 0 for L in lengths):
            raise DomainError(f"lengths must be positive, got {lengths}")
        if int(self.n_grid) != self.n_grid or self.n_grid < 8:
            raise DomainError(f"n_grid must be an integer >= 8, got {self.n_grid}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n_grid", int(self.n_grid))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_grid,) * self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (self.n_grid + 1) for L in self.lengths)

    def ident(self) -> str:
        dims = "x".join(f"{L:.17g}" for L in self.lengths)
        return f"{self.dim}d-{dims}-n{self.n_grid}"


class SpectralBasis:
    """Sine eigenbasis of the Dirichlet Laplacian on a :class:`DomainSpec`.

    Attributes
    ----------
    eigenvalues : ndarray
        ``lambda_k`` arranged on the mode grid (same shape as a field).
    lambda_1 : float
        Smallest eigenvalue.
    weight : float
        Quadrature weight of each interior node.
    parseval : float
        ``prod(L_i / 2)``; ``integrate(f*g) == parseval * sum(F*G)``.
    """

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        self.shape = domain.shape
        self.dim = domain.dim
        self.spacing = domain.spacing
        n = domain.n_grid
        self.coords = tuple(np.arange(1, n + 1) * h for h in self.spacing)
        k = np.arange(1, n + 1)
        axis_eigs = [(k * np.pi / L) ** 2 for L in domain.lengths]
        if self.dim == 1:
            self.eigenvalues = axis_eigs[0]
        else:
            self.eigenvalues = axis_eigs[0][:, None] + axis_eigs[1][None, :]
        self.eigenvalues.setflags(write=False)
        self.lambda_1 = float(self.eigenvalues.min())
        self.weight = float(np.prod(self.spacing))
        self.parseval = float(np.prod([L / 2 for L in domain.lengths]))
        self._fwd_scale = 1.0 / (n + 1) ** self.dim
        self._inv_scale = 1.0 / 2**self.dim

    def __repr__(self):
        return f"SpectralBasis({self.domain!r}, lambda_1={self.lambda_1:.6g})"

    def __getstate__(self):
        return {"domain": self.domain}

    def __setstate__(self, state):
        self.__init__(state["domain"])

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Node coordinates broadcast to the field shape."""
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    def _check(self, arr) -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if arr.shape != self.shape:
            raise DomainError(f"field shape {arr.shape} does not match basis {self.shape}")
        return arr

    def forward(self, field) -> np.ndarray:
        """Grid values -> sine coefficients."""
        return fft.dstn(self._check(field), type=1) * self._fwd_scale

    def inverse(self, coeffs) -> np.ndarray:
        """Sine coefficients -> grid values."""
        return fft.dstn(self._check(coeffs), type=1) * self._inv_scale

    def apply_laplacian(self, field) -> np.ndarray:
        return self.inverse(-self.eigenvalues * self.forward(field))

    def integrate(self, field) -> float:
        return self.weight * float(np.sum(self._check(field)))

    def inner(self, f, g) -> float:
        return self.weight * float(np.sum(self._check(f) * self._check(g)))

    def lq_norm(self, field, q: float) -> float:
        f = np.abs(self._check(field))
        if q == 2:
            return float(np.sqrt(self.weight * np.sum(f * f)))
        return float((self.weight * np.sum(f**q)) ** (1.0 / q))

    def grad_sq_norm(self, field) -> float:
        """``||grad f||_2**2`` evaluated spectrally (equals ``-<lap f, f>``)."""
        return self.grad_sq_norm_coeffs(self.forward(field))

    def grad_sq_norm_coeffs(self, coeffs) -> float:
        return self.parseval * float(np.sum(self.eigenvalues * coeffs * coeffs))

    def sq_norm_coeffs(self, coeffs) -> float:
        return self.parseval * float(np.sum(coeffs * coeffs))

    def mode(self, *k: int) -> np.ndarray:
        """Grid samples of the sine mode with (1-based) indices ``k``."""
        if len(k) != self.dim or any(int(i) < 1 or int(i) > self.domain.n_grid for i in k):
            raise DomainError(f"mode index {k} out of range for {self.domain}")
        out = np.ones(self.shape)
        for ki, L, X in zip(k, self.domain.lengths, self.mesh):
            out = out * np.sin(ki * np.pi * X / L)
        return out

    def mode_table(self, count: int = 10) -> list[tuple[tuple[int, ...], float]]:
        """The ``count`` smallest eigenvalues with their mode indices."""
        flat = np.argsort(self.eigenvalues, axis=None, kind="stable")[:count]
        table = []
        for idx in flat:
            multi = np.unravel_index(idx, self.shape)
            table.append((tuple(int(i) + 1 for i in multi), float(self.eigenvalues[multi])))
        return table


def build_basis(domain: DomainSpec) -> SpectralBasis:
    if not isinstance(domain, DomainSpec):
        raise DomainError(f"expected DomainSpec, got {type(domain).__name__}")
    return SpectralBasis(domain)


def fd_laplacian_matrix(domain: DomainSpec) -> sparse.csr_matrix:
    """Second-order Dirichlet Laplacian (3- or 5-point) on interior nodes."""
    n = domain.n_grid
    mats = []
    for h in domain.spacing:
        mats.append(sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)) / h**2)
    if domain.dim == 1:
        return mats[0].tocsr()
    eye = sparse.identity(n)
    return (sparse.kron(mats[0], eye) + sparse.kron(eye, mats[1])).tocsr()


def fd_lambda_1(domain: DomainSpec) -> float:
    """Smallest eigenvalue of the finite-difference Dirichlet Laplacian."""
    A = -fd_laplacian_matrix(domain)
    vals = spla.eigsh(A, k=1, sigma=0, which="LM", return_eigenvectors=False)
    return float(vals[0])
