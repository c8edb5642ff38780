"""Uniform cell-vertex grids on axis-aligned boxes.

Nodes include the box faces. Quadrature uses the trapezoid rule, which is also
the inner product under which the ghost-node Neumann Laplacian in
:mod:`boltzflow.pde` is symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid with ``shape[k]`` nodes spanning ``[lower[k], upper[k]]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.shape)):
            raise InvalidArgumentError("lower, upper and shape must have equal length")
        for lo, hi, n in zip(self.lower, self.upper, self.shape):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InvalidArgumentError(f"invalid axis bounds [{lo}, {hi}]")
            if n < 2:
                raise InvalidArgumentError("each axis needs at least 2 nodes")

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], shape: Sequence[int] | int) -> "Grid":
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        if isinstance(shape, (int, np.integer)):
            shape = (int(shape),) * len(lower)
        return cls(lower, upper, tuple(int(n) for n in shape))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.shape) - 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.shape)]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.array(self.upper) - np.array(self.lower)))

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``(*shape, ndim)``, row-major."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (without the cell volume factor)."""
        w = np.ones(self.shape)
        for k, n in enumerate(self.shape):
            w1 = np.ones(n)
            w1[0] = w1[-1] = 0.5
            w = w * w1.reshape([-1 if j == k else 1 for j in range(self.ndim)])
        return w

    def integrate(self, values: np.ndarray) -> float:
        # fixed summation order, independent of any threading
        return float(np.sum(self.weights() * values) * self.cell_volume)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        slack = tol * (np.array(self.upper) - np.array(self.lower))
        lo = np.array(self.lower) - slack
        hi = np.array(self.upper) + slack
        return np.all((x >= lo) & (x <= hi), axis=-1)

    def interpolate(self, values: np.ndarray, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Multilinear interpolation of node data at points ``x``.

        ``values`` has shape ``shape`` or ``(*shape, m)``; ``x`` has shape ``(n, ndim)``
        or ``(ndim,)``. Points outside the box by more than ``tol`` (relative to the
        box width) raise :class:`OutOfDomainError`.
        """
        single = np.ndim(x) == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.ndim:
            raise InvalidArgumentError(f"expected points of dimension {self.ndim}, got {x.shape[-1]}")
        inside = self.contains(x, tol)
        if not np.all(inside):
            bad = x[~inside][0]
            raise OutOfDomainError(f"point {bad.tolist()} outside grid box", point=bad)
        h = self.spacing
        lower = np.array(self.lower)
        shape = np.array(self.shape)
        pos = (x - lower) / h
        idx = np.clip(np.floor(pos).astype(int), 0, shape - 2)
        frac = pos - idx
        trailing = values.shape[self.ndim:]
        out = np.zeros((x.shape[0],) + trailing)
        # accumulate the 2**ndim corner contributions
        for corner in range(2 ** self.ndim):
            bits = [(corner >> k) & 1 for k in range(self.ndim)]
            wgt = np.ones(x.shape[0])
            index = []
            for k, b in enumerate(bits):
                wgt = wgt * (frac[:, k] if b else 1.0 - frac[:, k])
                index.append(idx[:, k] + b)
            out += wgt.reshape((-1,) + (1,) * len(trailing)) * values[tuple(index)]
        return out[0] if single else out

    def same_as(self, other: "Grid", rtol: float = 1e-12) -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.lower, other.lower, rtol=rtol, atol=0)
            and np.allclose(self.upper, other.upper, rtol=rtol, atol=0)
        )
