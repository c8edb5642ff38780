"""Discrete Moser transport between two positive grid densities.

The velocity field is ``v_t = grad u / ((1 - t) rho0 + t rho1)`` with ``u`` the
Neumann potential of ``rho1 - rho0``; its time-one flow map pushes ``rho0`` to
``rho1``. All point-wise operations accept a single point ``(d,)`` or a batch
``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DensityFloorError, InvalidArgumentError, OutOfDomainError
from .grid import Grid
from .pde import NeumannProblem, PotentialField, solve_neumann
from .potential import GridDensity
from .samples import SampleSet

INTEGRATORS = ("rk4", "euler_composition")

# relative slack for roundoff-level excursions past the box faces
_DOMAIN_TOL = 1e-9


@dataclass
class MoserMap:
    field: PotentialField
    rho0: GridDensity
    rho1: GridDensity
    ell: int = 256
    integrator: str = "rk4"
    floor_delta: float = 1e-8
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.ell < 1:
            raise InvalidArgumentError("ell must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise InvalidArgumentError(f"unknown integrator {self.integrator!r}")
        if not (self.rho0.grid.same_as(self.field.grid) and self.rho1.grid.same_as(self.field.grid)):
            raise InvalidArgumentError("densities and potential field must share one grid")
        low = min(self.rho0.min_value(), self.rho1.min_value())
        if low < self.floor_delta or low <= 0:
            raise DensityFloorError(f"endpoint density minimum {low:.3e} is below the floor {self.floor_delta:.3e}")
        self._stack = np.concatenate(
            [self.rho0.values[..., None], self.rho1.values[..., None], self.field.grad_u], axis=-1
        )

    @property
    def grid(self) -> Grid:
        return self.field.grid


def build_moser_map(
    rho0: GridDensity,
    rho1: GridDensity,
    ell: int = 256,
    integrator: str = "rk4",
    floor_delta: float = 1e-8,
    tol: float = 1e-9,
    max_iter: int = 200_000,
) -> MoserMap:
    problem = NeumannProblem.from_densities(rho0, rho1)
    fld = solve_neumann(problem, tol=tol, max_iter=max_iter)
    return MoserMap(fld, rho0, rho1, ell=ell, integrator=integrator, floor_delta=floor_delta)


def _evaluate(m: MoserMap, x: np.ndarray, t: float):
    """Velocity at the rows of ``x``; returns ``(v, status)`` with status 0 ok,
    1 out of domain, 2 below the density floor."""
    n, d = x.shape
    v = np.zeros((n, d))
    status = np.zeros(n, dtype=np.int8)
    inside = m.grid.contains(x, _DOMAIN_TOL)
    status[~inside] = 1
    if np.any(inside):
        vals = m.grid.interpolate(m._stack, x[inside], tol=_DOMAIN_TOL)
        rho_t = (1.0 - t) * vals[:, 0] + t * vals[:, 1]
        low = rho_t < m.floor_delta
        vi = np.zeros((vals.shape[0], d))
        ok = ~low
        vi[ok] = vals[ok, 2:] / rho_t[ok, None]
        v[inside] = vi
        sub = status[inside]
        sub[low] = 2
        status[inside] = sub
    return v, status


def _raise_for(status, x, t):
    i = int(np.flatnonzero(status)[0])
    if status[i] == 1:
        raise OutOfDomainError(f"trajectory left the domain at t={t:.6g} (point {x[i].tolist()})", point=x[i], time=t)
    raise DensityFloorError(f"interpolated density below floor at t={t:.6g}, point {x[i].tolist()}")


def velocity(m: MoserMap, x, t: float):
    """``grad u(x) / ((1 - t) rho0(x) + t rho1(x))`` with multilinear interpolation."""
    single = np.ndim(x) == 1
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    v, status = _evaluate(m, xb, float(t))
    if np.any(status):
        _raise_for(status, xb, t)
    return v[0] if single else v


def _flow(m: MoserMap, x: np.ndarray, direction: str, scheme: str, keep_path: bool = False):
    """Integrate all rows; failed rows freeze at their last good state.

    Returns ``(x_final, failed, fail_time, path)``.
    """
    if direction not in ("forward", "backward"):
        raise InvalidArgumentError("direction must be 'forward' or 'backward'")
    x = np.array(x, dtype=float)
    n = x.shape[0]
    ell = m.ell
    sign = 1.0 if direction == "forward" else -1.0
    h = sign / ell
    failed = np.zeros(n, dtype=bool)
    fail_time = np.full(n, np.nan)
    path = []
    start = x[:, :]
    if np.any(~m.grid.contains(start, _DOMAIN_TOL)):
        bad = ~m.grid.contains(start, _DOMAIN_TOL)
        failed |= bad
        fail_time[bad] = 0.0 if sign > 0 else 1.0

    for k in range(ell):
        t0 = k / ell if sign > 0 else 1.0 - k / ell
        act = ~failed
        if not np.any(act):
            break
        xa = x[act]
        if scheme == "euler_composition":
            # x + (1/ell) v_{t_k}(x), velocity frozen at the step's end time
            t1 = (k + 1) / ell if sign > 0 else 1.0 - (k + 1) / ell
            v, st = _evaluate(m, xa, t1)
            new = xa + h * v
            bad = st != 0
        else:
            k1, s1 = _evaluate(m, xa, t0)
            k2, s2 = _evaluate(m, xa + 0.5 * h * k1, t0 + 0.5 * h)
            k3, s3 = _evaluate(m, xa + 0.5 * h * k2, t0 + 0.5 * h)
            k4, s4 = _evaluate(m, xa + h * k3, t0 + h)
            new = xa + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = (s1 != 0) | (s2 != 0) | (s3 != 0) | (s4 != 0)
        bad |= ~m.grid.contains(new, _DOMAIN_TOL)
        idx = np.flatnonzero(act)
        x[idx[~bad]] = new[~bad]
        failed[idx[bad]] = True
        fail_time[idx[bad]] = t0
        if keep_path:
            path.append(x.copy())
    return x, failed, fail_time, path


def integrate(m: MoserMap, x0, direction: str = "forward"):
    """Time-one flow map (``forward``) or its inverse (``backward``).

    Uses ``ell`` RK4 steps of size ``1/ell`` (or the Euler composition when
    ``m.integrator == 'euler_composition'``).

    Raises
    ------
    OutOfDomainError
        If a trajectory leaves the box; carries the exit time.
    DensityFloorError
        If the interpolated density drops below ``floor_delta``.
    """
    single = np.ndim(x0) == 1
    xb = np.atleast_2d(np.asarray(x0, dtype=float))
    out, failed, fail_time, _ = _flow(m, xb, direction, m.integrator)
    if np.any(failed):
        i = int(np.flatnonzero(failed)[0])
        # replay the failing point to surface the precise error
        _, st = _evaluate(m, out[i : i + 1], fail_time[i])
        if st[0] == 2:
            raise DensityFloorError(f"density floor violated at t={fail_time[i]:.6g}")
        raise OutOfDomainError(
            f"trajectory from {xb[i].tolist()} left the domain near t={fail_time[i]:.6g}",
            point=out[i],
            time=float(fail_time[i]),
        )
    return out[0] if single else out


def compose_steps(m: MoserMap, x0):
    """Explicit Euler composition ``G_ell o ... o G_1`` with
    ``G_k(x) = x + v_{k/ell}(x) / ell``; returns all ``ell`` intermediate states."""
    single = np.ndim(x0) == 1
    xb = np.atleast_2d(np.asarray(x0, dtype=float))
    _, failed, fail_time, path = _flow(m, xb, "forward", "euler_composition", keep_path=True)
    if np.any(failed):
        i = int(np.flatnonzero(failed)[0])
        raise OutOfDomainError(f"Euler composition failed near t={fail_time[i]:.6g}", time=float(fail_time[i]))
    if single:
        return [state[0] for state in path]
    return path


def pushforward(m: MoserMap, samples: SampleSet, max_fail_fraction: float = 1e-3) -> SampleSet:
    """Map every sample through the forward flow.

    Points whose trajectory fails are dropped and counted in ``meta``; more than
    ``max_fail_fraction`` failures raise the first failure's error class.
    """
    out, failed, fail_time, _ = _flow(m, samples.points, "forward", m.integrator)
    n_failed = int(failed.sum())
    if n_failed > max_fail_fraction * len(samples):
        raise OutOfDomainError(
            f"{n_failed} of {len(samples)} pushforward trajectories failed (first near t={np.nanmin(fail_time):.4g})"
        )
    meta = dict(samples.meta)
    meta.update({"n_failed": n_failed, "ell": m.ell, "integrator": m.integrator})
    return SampleSet(out[~failed], "moser_pushforward", samples.seed, meta)


def lipschitz_estimate(
    fn: Callable[[np.ndarray], np.ndarray],
    lower,
    upper,
    n_pairs: int,
    seed: int = 0,
    min_scale: float = 1e-4,
) -> float:
    """Largest observed ``|T(x) - T(y)| / |x - y|`` over random pairs in a box.

    Pair distances are log-stratified from the box diameter down to
    ``min_scale`` times it; the partner point is mirrored into the box when it
    falls outside. ``fn`` maps an ``(n, d)`` array to an ``(n, d)`` array.
    """
    if n_pairs < 1:
        raise InvalidArgumentError("n_pairs must be >= 1")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    rng = np.random.default_rng(seed)
    diam = float(np.linalg.norm(upper - lower))
    strata = (np.arange(n_pairs) + rng.random(n_pairs)) / n_pairs
    r = diam * min_scale**strata
    direc = rng.standard_normal((n_pairs, d))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    x = lower + (upper - lower) * rng.random((n_pairs, d))
    y = x + r[:, None] * direc
    width = upper - lower
    y = np.mod(y - lower, 2.0 * width)
    y = lower + np.where(y > width, 2.0 * width - y, y)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 0
    tx = np.asarray(fn(x[keep]), dtype=float).reshape(-1, d)
    ty = np.asarray(fn(y[keep]), dtype=float).reshape(-1, d)
    return float(np.max(np.linalg.norm(tx - ty, axis=1) / dist[keep]))


def continuity_residual(m: MoserMap, t: float) -> np.ndarray:
    """``div(rho_t v_t) + (rho1 - rho0)`` at interior nodes via central differences."""
    rho_t = (1.0 - t) * m.rho0.values + t * m.rho1.values
    flux = rho_t[..., None] * (m.field.grad_u / rho_t[..., None])
    div = np.zeros(m.grid.shape)
    for k, h in enumerate(m.grid.spacing):
        div += np.gradient(flux[..., k], h, axis=k)
    interior = tuple(slice(2, -2) for _ in range(m.grid.ndim))
    return (div + (m.rho1.values - m.rho0.values))[interior]
