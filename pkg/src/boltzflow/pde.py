"""Finite-difference solver for the pure Neumann Poisson problem

    -lap u = f  in the box,   grad u . n = 0  on its boundary,

on a uniform cell-vertex grid in one or two dimensions (any dimension works).

Boundary rows use mirrored ghost nodes (``u[-1] = u[1]``). The resulting
operator ``A`` is not symmetric, but ``W A`` is, where ``W`` holds the trapezoid
weights; hence the discrete solvability condition is that the trapezoid
quadrature of ``f`` vanishes, and conjugate gradients are run on
``-W A u = W f`` restricted to mean-zero vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError
from .grid import Grid


@dataclass
class NeumannProblem:
    grid: Grid
    rhs: np.ndarray
    compatibility_tol: float = 1e-8

    @classmethod
    def from_densities(cls, rho0, rho1, compatibility_tol: float = 1e-8) -> "NeumannProblem":
        """Right-hand side ``rho1 - rho0`` for two :class:`GridDensity` objects."""
        if not rho0.grid.same_as(rho1.grid):
            raise InvalidArgumentError("endpoint densities live on different grids")
        return cls(rho0.grid, rho1.values - rho0.values, compatibility_tol)

    def mismatch(self) -> float:
        return self.grid.integrate(self.rhs)


@dataclass
class PotentialField:
    """Mean-zero solution ``u`` with its node gradient ``grad_u`` (``(*shape, d)``)."""

    grid: Grid
    u: np.ndarray
    grad_u: np.ndarray
    residual_norm: float
    iterations: int = 0


def laplacian(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Second-order Laplacian with mirrored ghost nodes on every face."""
    out = np.zeros_like(u)
    padded = np.pad(u, 1, mode="reflect")
    core = tuple(slice(1, -1) for _ in range(u.ndim))
    for k, h in enumerate(grid.spacing):
        fwd = list(core)
        bwd = list(core)
        fwd[k] = slice(2, None)
        bwd[k] = slice(None, -2)
        out += (padded[tuple(fwd)] - 2.0 * u + padded[tuple(bwd)]) / (h * h)
    return out


def node_gradient(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Central differences; the mirror closure makes the normal component
    exactly zero on boundary faces."""
    padded = np.pad(u, 1, mode="reflect")
    core = [slice(1, -1)] * u.ndim
    comps = []
    for k, h in enumerate(grid.spacing):
        fwd = list(core)
        bwd = list(core)
        fwd[k] = slice(2, None)
        bwd[k] = slice(None, -2)
        comps.append((padded[tuple(fwd)] - padded[tuple(bwd)]) / (2.0 * h))
    return np.stack(comps, axis=-1)


def solve_neumann(
    problem: NeumannProblem,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    jacobi: bool = False,
) -> PotentialField:
    """Solve the Neumann problem by projected conjugate gradients.

    Raises
    ------
    InvalidArgumentError
        If ``|integral of rhs| > compatibility_tol``.
    ConvergenceError
        If the relative residual does not reach ``tol`` within ``max_iter``.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    grid = problem.grid
    f = np.asarray(problem.rhs, dtype=float)
    if f.shape != grid.shape:
        raise InvalidArgumentError(f"rhs shape {f.shape} does not match grid {grid.shape}")
    total = problem.mismatch()
    if abs(total) > problem.compatibility_tol:
        raise InvalidArgumentError(f"incompatible Neumann data: integral of rhs = {total:.3e}")
    w = grid.weights()
    # remove the roundoff-level mismatch so the system is exactly consistent
    f = f - np.sum(w * f) / np.sum(w)
    b = w * f
    b = b - b.mean()

    def apply(v):
        return -w * laplacian(v, grid)

    diag = w * sum(2.0 / h**2 for h in grid.spacing)
    u = np.zeros_like(f)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return PotentialField(grid, u, np.zeros(grid.shape + (grid.ndim,)), 0.0, 0)

    total_it = 0
    res = 1.0
    # restart from the true residual when recursive updates drift below tol
    for _restart in range(50):
        r = b - apply(u)
        r -= r.mean()
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        z = r / diag if jacobi else r.copy()
        z -= z.mean()
        p = z.copy()
        rz = np.vdot(r, z)
        while total_it < max_iter:
            total_it += 1
            ap = apply(p)
            alpha = rz / np.vdot(p, ap)
            u += alpha * p
            r -= alpha * ap
            r -= r.mean()
            res = np.linalg.norm(r) / bnorm
            if res <= tol:
                break
            z = r / diag if jacobi else r.copy()
            z -= z.mean()
            rz_new = np.vdot(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        if total_it >= max_iter:
            break
    u -= u.mean()
    true_res = np.linalg.norm(b - apply(u)) / bnorm
    if true_res > tol:
        raise ConvergenceError(
            f"CG stalled at relative residual {true_res:.3e} after {total_it} iterations", residual=true_res
        )
    return PotentialField(grid, u, node_gradient(u, grid), float(true_res), total_it)


def sample_gradient(field: PotentialField, x) -> np.ndarray:
    """Multilinear interpolation of ``grad_u`` at ``x`` (one point or a batch)."""
    return field.grid.interpolate(field.grad_u, x)
