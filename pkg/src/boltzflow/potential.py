"""Closed-form potential energies, high-energy regularization and gridded
Boltzmann densities.

Three kinds of :class:`PotentialSpec` are supported:

``double_well``
    ``U(x1, x2) = (x1**2 - 1)**2 / 4 + x2**2 / 2``.
``diatomic``
    Two particles reduced to their relative coordinate ``r`` in the plane,
    ``U(r) = q1*q2/|r| + A/|r|**12 - B/|r|**6``.
``composite``
    ``N`` atoms in ``atom_dim`` dimensions with harmonic bonds and angles,
    cosine torsions and all-pairs Coulomb and Lennard-Jones terms.

Energies are ``+inf`` exactly on the collision set of a singular pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .errors import InvalidArgumentError, OverflowDomainError, SingularityError
from .grid import Grid

KINDS = ("double_well", "diatomic", "composite")


@dataclass(frozen=True)
class PotentialSpec:
    """Declarative description of a potential energy and its domain box.

    For ``diatomic`` the pair parameters are ``charges=(q1, q2)``, ``lj_a=A``
    and ``lj_b=B`` (scalars). For ``composite``, ``lj_a``/``lj_b`` are symmetric
    ``(N, N)`` matrices and ``bonds``, ``angles``, ``torsions`` are tuples of

    * ``(i, j, b, rest_length)``
    * ``(i, j, k, a, rest_angle)`` with ``j`` the vertex
    * ``(i, j, k, l, ((n, kappa, phase), ...))``
    """

    kind: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    charges: tuple[float, ...] = ()
    lj_a: object = 0.0
    lj_b: object = 0.0
    bonds: tuple = ()
    angles: tuple = ()
    torsions: tuple = ()
    atom_dim: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown potential kind {self.kind!r}")
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper) or not all(
            np.isfinite(lo) and np.isfinite(hi) and lo < hi for lo, hi in zip(lower, upper)
        ):
            raise InvalidArgumentError("domain box needs finite bounds with lower < upper")
        if len(lower) != self.dim:
            raise InvalidArgumentError(f"domain box has {len(lower)} axes, potential needs {self.dim}")
        if self.kind == "diatomic":
            q = tuple(float(v) for v in (self.charges or (0.0, 0.0)))
            if len(q) != 2:
                raise InvalidArgumentError("diatomic needs exactly two charges")
            object.__setattr__(self, "charges", q)
            a, b = float(self.lj_a), float(self.lj_b)
            object.__setattr__(self, "lj_a", a)
            object.__setattr__(self, "lj_b", b)
            _check_pair(q[0] * q[1], a, b, "pair (0, 1)")
        elif self.kind == "composite":
            n = self.n_atoms
            a = np.broadcast_to(np.asarray(self.lj_a, dtype=float), (n, n)).copy()
            b = np.broadcast_to(np.asarray(self.lj_b, dtype=float), (n, n)).copy()
            if not (np.allclose(a, a.T) and np.allclose(b, b.T)):
                raise InvalidArgumentError("LJ coefficient matrices must be symmetric")
            a.setflags(write=False)
            b.setflags(write=False)
            object.__setattr__(self, "lj_a", a)
            object.__setattr__(self, "lj_b", b)
            q = self.charges
            for i in range(n):
                for j in range(i + 1, n):
                    _check_pair(q[i] * q[j], a[i, j], b[i, j], f"pair ({i}, {j})")
            for bond in self.bonds:
                if bond[2] <= 0:
                    raise InvalidArgumentError(f"bond constant must be positive: {bond}")
            for ang in self.angles:
                if ang[3] <= 0:
                    raise InvalidArgumentError(f"angle constant must be positive: {ang}")
            for tors in self.torsions:
                if tors[4] and any(term[1] < 0 for term in tors[4]):
                    raise InvalidArgumentError(f"torsion amplitudes must be nonnegative: {tors}")
            if self.torsions and self.atom_dim != 3:
                raise InvalidArgumentError("torsions need atom_dim = 3")

    @property
    def n_atoms(self) -> int:
        if self.kind == "composite":
            return len(self.charges)
        return 2

    @property
    def dim(self) -> int:
        if self.kind == "composite":
            return len(self.charges) * self.atom_dim
        return 2

    @property
    def grid_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return self.lower, self.upper

    def energy(self, x):
        return eval_energy(self, x)

    def gradient(self, x):
        return eval_gradient(self, x)


def _check_pair(qq, a, b, label):
    if a < 0 or b < 0:
        raise InvalidArgumentError(f"{label}: LJ coefficients must be nonnegative")
    if (qq < 0 or b > 0) and not a > 0:
        raise InvalidArgumentError(f"{label}: A must be positive when q_i q_j < 0 or B > 0")


def double_well(lower=(-4.0, -4.0), upper=(4.0, 4.0)) -> PotentialSpec:
    return PotentialSpec("double_well", lower, upper)


def diatomic(a=1.0, b=1.0, charges=(0.0, 0.0), lower=(-2.5, -2.5), upper=(2.5, 2.5)) -> PotentialSpec:
    return PotentialSpec("diatomic", lower, upper, charges=tuple(charges), lj_a=a, lj_b=b)


def _as_batch(spec: PotentialSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != spec.dim:
        raise InvalidArgumentError(f"{spec.kind} expects points of dimension {spec.dim}, got {x.shape[-1]}")
    return x, single


def _pair_energy(r, qq, a, b):
    """Coulomb + LJ energy of a pair at distance ``r`` (``+inf`` at ``r == 0``)."""
    singular = qq != 0 or a != 0 or b != 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        inv = 1.0 / r
        inv6 = inv**6
        e = qq * inv + a * inv6 * inv6 - b * inv6
    if singular:
        e = np.where(r == 0, np.inf, e)
        # A > 0 dominates, so huge-but-finite r**-12 overflow is +inf as well
        e = np.where(np.isnan(e), np.inf, e)
    else:
        e = np.zeros_like(r)
    return e


def _pair_dedr(r, qq, a, b):
    inv = 1.0 / r
    inv6 = inv**6
    return -qq * inv * inv - 12.0 * a * inv6 * inv6 * inv + 6.0 * b * inv6 * inv


def _pairs(spec: PotentialSpec):
    n = spec.n_atoms
    q = spec.charges
    for i in range(n):
        for j in range(i + 1, n):
            qq, a, b = q[i] * q[j], spec.lj_a[i, j], spec.lj_b[i, j]
            if qq != 0 or a != 0 or b != 0:
                yield i, j, qq, a, b


def _angle_terms(u, v):
    """Angle between bond vectors ``u`` and ``v`` plus d(angle)/du, d(angle)/dv."""
    nu = np.linalg.norm(u, axis=-1, keepdims=True)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    dot = np.sum(u * v, axis=-1, keepdims=True)
    cross2 = np.maximum((nu * nv) ** 2 - dot**2, 0.0)
    sin = np.sqrt(cross2)
    angle = np.arctan2(sin, dot)[:, 0]
    cos = dot / (nu * nv)
    with np.errstate(divide="ignore", invalid="ignore"):
        dcos_du = (v / (nu * nv)) - cos * u / nu**2
        dcos_dv = (u / (nu * nv)) - cos * v / nv**2
        factor = -nu * nv / sin
    return angle, factor * dcos_du, factor * dcos_dv


def _dihedral_terms(xi, xj, xk, xl):
    """Dihedral angle and its gradient with respect to the four atoms."""
    b1 = xj - xi
    b2 = xk - xj
    b3 = xl - xk
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    nb2 = np.linalg.norm(b2, axis=-1, keepdims=True)
    y = nb2[:, 0] * np.sum(b1 * n2, axis=-1)
    xx = np.sum(n1 * n2, axis=-1)
    phi = np.arctan2(y, xx)
    n1sq = np.sum(n1 * n1, axis=-1, keepdims=True)
    n2sq = np.sum(n2 * n2, axis=-1, keepdims=True)
    gi = -nb2 / n1sq * n1
    gl = nb2 / n2sq * n2
    p = np.sum(b1 * b2, axis=-1, keepdims=True) / nb2**2
    r = np.sum(b3 * b2, axis=-1, keepdims=True) / nb2**2
    gj = -(1.0 + p) * gi + r * gl
    gk = p * gi - (1.0 + r) * gl
    return phi, gi, gj, gk, gl


def _composite_energy(spec, x):
    n, m = spec.n_atoms, spec.atom_dim
    pos = x.reshape(x.shape[0], n, m)
    e = np.zeros(x.shape[0])
    for i, j, bconst, rest in spec.bonds:
        length = np.linalg.norm(pos[:, i] - pos[:, j], axis=-1)
        e += bconst * (length - rest) ** 2
    for i, j, k, aconst, rest in spec.angles:
        ang, _, _ = _angle_terms(pos[:, i] - pos[:, j], pos[:, k] - pos[:, j])
        e += aconst * (ang - rest) ** 2
    for i, j, k, l, terms in spec.torsions:
        phi = _dihedral_terms(pos[:, i], pos[:, j], pos[:, k], pos[:, l])[0]
        for order, kappa, phase in terms:
            e += kappa * (1.0 + np.cos(order * phi - phase))
    for i, j, qq, a, b in _pairs(spec):
        e = e + _pair_energy(np.linalg.norm(pos[:, i] - pos[:, j], axis=-1), qq, a, b)
    return e


def _composite_gradient(spec, x):
    n, m = spec.n_atoms, spec.atom_dim
    pos = x.reshape(x.shape[0], n, m)
    g = np.zeros_like(pos)
    for i, j, bconst, rest in spec.bonds:
        diff = pos[:, i] - pos[:, j]
        length = np.linalg.norm(diff, axis=-1, keepdims=True)
        gi = 2.0 * bconst * (length - rest) * diff / length
        g[:, i] += gi
        g[:, j] -= gi
    for i, j, k, aconst, rest in spec.angles:
        ang, du, dv = _angle_terms(pos[:, i] - pos[:, j], pos[:, k] - pos[:, j])
        coef = (2.0 * aconst * (ang - rest))[:, None]
        g[:, i] += coef * du
        g[:, k] += coef * dv
        g[:, j] -= coef * (du + dv)
    for i, j, k, l, terms in spec.torsions:
        phi, gi, gj, gk, gl = _dihedral_terms(pos[:, i], pos[:, j], pos[:, k], pos[:, l])
        coef = np.zeros_like(phi)
        for order, kappa, phase in terms:
            coef -= kappa * order * np.sin(order * phi - phase)
        coef = coef[:, None]
        g[:, i] += coef * gi
        g[:, j] += coef * gj
        g[:, k] += coef * gk
        g[:, l] += coef * gl
    for i, j, qq, a, b in _pairs(spec):
        diff = pos[:, i] - pos[:, j]
        r = np.linalg.norm(diff, axis=-1, keepdims=True)
        if np.any(r == 0):
            raise SingularityError(f"atoms {i} and {j} coincide")
        gi = _pair_dedr(r, qq, a, b) * diff / r
        g[:, i] += gi
        g[:, j] -= gi
    return g.reshape(x.shape)


def eval_energy(spec: PotentialSpec, x):
    """Potential energy at one point ``(d,)`` or a batch ``(n, d)``."""
    xb, single = _as_batch(spec, x)
    if spec.kind == "double_well":
        e = 0.25 * (xb[:, 0] ** 2 - 1.0) ** 2 + 0.5 * xb[:, 1] ** 2
    elif spec.kind == "diatomic":
        r = np.linalg.norm(xb, axis=-1)
        e = _pair_energy(r, spec.charges[0] * spec.charges[1], spec.lj_a, spec.lj_b)
    else:
        e = _composite_energy(spec, xb)
    return float(e[0]) if single else e


def eval_gradient(spec: PotentialSpec, x):
    """Analytic gradient of :func:`eval_energy`.

    Raises
    ------
    SingularityError
        If a point lies on the collision set.
    """
    xb, single = _as_batch(spec, x)
    if spec.kind == "double_well":
        g = xb.copy()
        g[:, 0] *= xb[:, 0] ** 2 - 1.0
    elif spec.kind == "diatomic":
        r = np.linalg.norm(xb, axis=-1, keepdims=True)
        qq = spec.charges[0] * spec.charges[1]
        if (qq != 0 or spec.lj_a != 0 or spec.lj_b != 0) and np.any(r == 0):
            raise SingularityError("diatomic separation is zero")
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, _pair_dedr(r, qq, spec.lj_a, spec.lj_b) * xb / r, 0.0)
    else:
        g = _composite_gradient(spec, xb)
    return g[0] if single else g


def _pair_minimum(qq, a, b):
    """Global minimum over r > 0 of ``qq/r + a/r**12 - b/r**6`` (requires ``a > 0``)."""
    if a == 0:
        return 0.0
    if qq == 0:
        return -b * b / (4.0 * a)
    if qq > 0:
        # repulsive Coulomb only raises the LJ well
        return -b * b / (4.0 * a) if b > 0 else 0.0
    f = lambda s: float(_pair_energy(np.exp(s), qq, a, b))
    res = minimize_scalar(f, bounds=(-10.0, 10.0), method="bounded", options={"xatol": 1e-12})
    # the bounded search can stop at a shoulder; polish from a dense scan
    scan = np.linspace(-10.0, 10.0, 20001)
    best = scan[np.argmin(_pair_energy(np.exp(scan), qq, a, b))]
    res2 = minimize_scalar(f, bracket=(best - 1e-3, best, best + 1e-3))
    return min(res.fun, res2.fun)


def lower_bound(spec: PotentialSpec) -> float:
    """A constant ``U0`` with ``U >= U0`` everywhere."""
    if spec.kind == "double_well":
        return 0.0
    if spec.kind == "diatomic":
        return _pair_minimum(spec.charges[0] * spec.charges[1], spec.lj_a, spec.lj_b)
    # bonded terms are nonnegative; pairs are bounded one at a time
    return float(sum(_pair_minimum(qq, a, b) for _, _, qq, a, b in _pairs(spec)))


def smoothstep_cutoff(u):
    """C1 monotone transition, 0 for ``u <= 1`` and 1 for ``u >= 2``."""
    t = np.clip(np.asarray(u, dtype=float) - 1.0, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_derivative(u):
    t = np.clip(np.asarray(u, dtype=float) - 1.0, 0.0, 1.0)
    return 6.0 * t * (1.0 - t)


@dataclass(frozen=True)
class RegularizedPotential:
    """``U_eps = (1 - zeta) U + zeta * 2/eps`` with ``zeta = chi(eps * U)``.

    Equal to the base energy wherever it is at most ``1/eps``, capped at
    ``2/eps``, finite and C1 everywhere.
    """

    base: PotentialSpec
    epsilon: float
    cutoff_profile: Callable = field(default=smoothstep_cutoff, repr=False)

    @property
    def lower(self):
        return self.base.lower

    @property
    def upper(self):
        return self.base.upper

    @property
    def dim(self):
        return self.base.dim

    @property
    def lower_bound(self) -> float:
        return min(lower_bound(self.base), 2.0 / self.epsilon)

    def energy(self, x):
        return regularized_value(eval_energy(self.base, x), self.epsilon, self.cutoff_profile)

    def gradient(self, x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.atleast_1d(eval_energy(self.base, xb))
        eps = self.epsilon
        out = np.zeros_like(xb)
        active = u < 2.0 / eps
        if np.any(active):
            ua = u[active]
            zeta = smoothstep_cutoff(eps * ua)
            coef = (1.0 - zeta) + _smoothstep_derivative(eps * ua) * (2.0 - eps * ua)
            out[active] = coef[:, None] * eval_gradient(self.base, xb[active])
        return out[0] if np.ndim(x) == 1 else out


def regularized_value(u, epsilon: float, chi: Callable = smoothstep_cutoff):
    """Apply the high-energy cutoff to energy values ``u`` (``+inf`` allowed)."""
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    cap = 2.0 / epsilon
    with np.errstate(invalid="ignore", over="ignore"):
        zeta = chi(epsilon * u)
        mixed = (1.0 - zeta) * u + zeta * cap
    out = np.where(u <= 1.0 / epsilon, u, np.where(u >= cap, cap, mixed))
    return float(out[0]) if scalar else out


def regularize(spec: PotentialSpec, epsilon: float) -> RegularizedPotential:
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    return RegularizedPotential(spec, float(epsilon))


@dataclass
class GridDensity:
    """Probability density tabulated on the nodes of a :class:`Grid`.

    ``log_z`` is the log partition function when the density came from a
    Boltzmann factor, else 0.
    """

    grid: Grid
    values: np.ndarray
    beta: float | None = None
    log_z: float = 0.0

    @property
    def axes(self):
        return self.grid.axes

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    @property
    def Z(self) -> float:
        return float(np.exp(self.log_z))

    def total_mass(self) -> float:
        return self.grid.integrate(self.values)

    def __call__(self, x):
        return self.grid.interpolate(self.values, x)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "GridDensity":
        """Tabulate a nonnegative function at the nodes and normalize it."""
        nodes = grid.nodes().reshape(-1, grid.ndim)
        values = np.asarray(fn(nodes), dtype=float).reshape(grid.shape)
        return cls.from_values(grid, values)

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> "GridDensity":
        values = np.asarray(values, dtype=float)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidArgumentError("density values must be finite and nonnegative")
        mass = grid.integrate(values)
        if not mass > 0:
            raise InvalidArgumentError("density has zero mass")
        return cls(grid, values / mass)

    def min_value(self) -> float:
        return float(self.values.min())


def _energy_fn(energy):
    if hasattr(energy, "energy"):
        return energy.energy
    return energy


def boltzmann_grid(energy, beta: float, grid: Grid) -> GridDensity:
    """Normalized Boltzmann density ``exp(-beta U) / Z`` at the grid nodes.

    ``Z`` is the trapezoid quadrature of the Boltzmann factor, computed in
    log-sum-exp form. Nodes where ``U = +inf`` get density 0.
    """
    if not beta > 0:
        raise InvalidArgumentError(f"beta must be positive, got {beta}")
    nodes = grid.nodes().reshape(-1, grid.ndim)
    u = np.asarray(_energy_fn(energy)(nodes), dtype=float).reshape(grid.shape)
    log_f = -beta * u
    log_w = np.log(grid.weights()) + np.log(grid.cell_volume)
    log_z = float(logsumexp(log_f + log_w))
    z = np.exp(log_z)
    if not (np.isfinite(log_z) and 0.0 < z < np.inf):
        raise OverflowDomainError(f"partition function out of float range (log Z = {log_z})")
    values = np.exp(log_f - log_z)
    return GridDensity(grid, values, beta=float(beta), log_z=log_z)


def l1_distance(a: GridDensity, b: GridDensity) -> float:
    if not a.grid.same_as(b.grid):
        raise InvalidArgumentError("densities live on different grids")
    return a.grid.integrate(np.abs(a.values - b.values))
