"""Uniform node-centred grid on (0, L) and the Neumann Laplacian."""

from dataclasses import dataclass, field
import numbers

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .exceptions import ConfigurationError, ShapeError


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` nodes on ``[0, length]``, endpoints included."""

    length: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.linspace(0.0, self.length, self.n)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def spacing(self):
        return self.length / (self.n - 1)


def build_grid(length, n):
    if isinstance(length, bool) or not isinstance(length, numbers.Real):
        raise ConfigurationError(f"must be a real number, got {length!r}", "length")
    if not np.isfinite(length) or length <= 0:
        raise ConfigurationError(f"must be positive, got {length!r}", "length")
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 3:
        raise ConfigurationError(f"need at least 3 nodes, got {n!r}", "n")
    return Grid1D(float(length), int(n))


def laplacian_bands(grid):
    """Sub-, main and super-diagonal of the Neumann Laplacian.

    Boundary rows use the ghost-point reflection ``v[-1] = v[1]``, which
    doubles the inward coupling coefficient.
    """
    n = grid.n
    inv_h2 = 1.0 / grid.spacing**2
    lower = np.full(n - 1, inv_h2)
    upper = np.full(n - 1, inv_h2)
    main = np.full(n, -2.0 * inv_h2)
    upper[0] = 2.0 * inv_h2
    lower[-1] = 2.0 * inv_h2
    return lower, main, upper


def laplacian_matrix(grid):
    lower, main, upper = laplacian_bands(grid)
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def apply_neumann_laplacian(grid, v):
    v = np.asarray(v, dtype=float)
    if v.shape[:1] != (grid.n,):
        raise ShapeError(f"expected {grid.n} nodal values, got shape {v.shape}")
    inv_h2 = 1.0 / grid.spacing**2
    out = np.empty_like(v)
    out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) * inv_h2
    out[0] = 2.0 * (v[1] - v[0]) * inv_h2
    out[-1] = 2.0 * (v[-2] - v[-1]) * inv_h2
    return out


def solve_diffusion_system(grid, diffusion, diag_shift, rhs, dt):
    """Solve ``(diag(1 + dt*diag_shift) - dt*diffusion*Lap) x = rhs``.

    ``diag_shift`` must be nonnegative; the matrix is then a strictly
    diagonally dominant M-matrix, so nonnegative ``rhs`` gives nonnegative
    ``x``. ``rhs`` may carry extra trailing columns.
    """
    lower, main, upper = laplacian_bands(grid)
    k = dt * diffusion
    dl = -k * lower
    du = -k * upper
    d = 1.0 + dt * np.asarray(diag_shift, dtype=float) - k * main
    if d.ndim == 0:
        d = np.full(grid.n, float(d))
    b = np.array(rhs, dtype=float, order="F", copy=True)
    _, _, _, x, info = lapack.dgtsv(dl, d, du, b, overwrite_b=True)
    if info != 0:
        raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
    return x
