"""Time integration: Duhamel terms, Picard iteration, and an
integrating-factor RK4 marcher.

Two independent routes to the solution are provided on purpose:

* :func:`picard_solve` iterates the Duhamel fixed-point map on a uniform
  time lattice, with composite-trapezoid quadrature of the oscillatory
  integral; it converges geometrically for small data / short times and its
  successive-iterate distances give an empirical contraction diagnostic.
* :func:`evolve` marches with classical RK4 applied to the integrating-
  factor transform of the equation; the stiff linear phase ``exp(i t omega)``
  is applied exactly (unitarily), so only the nonlinearity is integrated
  approximately and the scheme is globally fourth order.

Both treat the nonlinearity through the same dealiased product rules in
:mod:`semzk.dynamics`, so their agreement is a genuine cross-check of the
time discretizations, not of shared stepping code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from semzk.dynamics import (
    EquationKind,
    SolitonParams,
    _check_domain,
    _quadratic_hat,
    _tables,
    soliton_shape,
    soliton_shape_dx,
    _wrapped_offset,
)
from semzk.spectral import Grid2D, RealField

__all__ = [
    "TrajectoryPath",
    "PicardReport",
    "duhamel_term",
    "DUHAMEL_KINDS",
    "picard_solve",
    "ifrk4_step",
    "evolve",
]


@dataclass
class TrajectoryPath:
    """Fields sampled on a uniform time lattice.

    ``times`` is strictly increasing with uniform spacing; a single-snapshot
    path (``M == 1``) is permitted and represents an instantaneous state
    (quadrature-based operations require at least two nodes).
    """

    grid: Grid2D
    times: np.ndarray
    fields: list[RealField]

    def __post_init__(self) -> None:
        self.times = np.ascontiguousarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("trajectory needs at least one time node")
        if not np.all(np.isfinite(self.times)):
            raise ValueError("non-finite trajectory times")
        if len(self.fields) != self.times.size:
            raise ValueError("times and fields length mismatch")
        for f in self.fields:
            if f.grid != self.grid:
                raise ValueError("fields live on different grids")
        if self.times.size > 1:
            d = np.diff(self.times)
            if np.any(d <= 0):
                raise ValueError("trajectory times must be strictly increasing")
            if np.max(np.abs(d - d[0])) > 1e-8 * max(abs(d[0]), 1e-300):
                raise ValueError("trajectory times must be uniformly spaced")

    @property
    def n_nodes(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def node_index(self, t: float) -> int:
        """Index of the node at time ``t`` (must lie on the lattice)."""
        t0, t1 = self.times[0], self.times[-1]
        scale = max(1.0, abs(t1 - t0))
        if t < t0 - 1e-9 * scale or t > t1 + 1e-9 * scale:
            raise ValueError(f"time {t} outside trajectory range [{t0}, {t1}]")
        if self.times.size == 1:
            return 0
        i = int(round((t - t0) / self.dt))
        i = min(max(i, 0), self.times.size - 1)
        if abs(self.times[i] - t) > 1e-9 * scale:
            raise ValueError(f"time {t} does not lie on the trajectory lattice")
        return i


@dataclass
class PicardReport:
    """Convergence record of the Duhamel fixed-point iteration.

    ``distances[k]`` is the sup-over-nodes Sobolev distance between iterates
    ``k`` and ``k+1``; ``ratios`` are successive quotients (one entry fewer).
    """

    iterations: int
    distances: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    converged: bool = False
    tol: float = 0.0
    sobolev_index: float = 1.0


# ---------------------------------------------------------------------------
# Duhamel pieces

#: Integrand selectors for :func:`duhamel_term`:
#: ``u_ux``      -> u u_x
#: ``ux_g1u``    -> u_x * G1 u
#: ``uy_g2u``    -> u_y * G2 u
#: ``phi_u``     -> phi_x u + 2 phi u_x       (soliton background)
#: ``phi_g1u``   -> phi_x * G1 u              (soliton background)
DUHAMEL_KINDS = ("u_ux", "ux_g1u", "uy_g2u", "phi_u", "phi_g1u")


def _integrand_hat(kind: str, uhat: np.ndarray, grid: Grid2D,
                   p: SolitonParams | None, t: float) -> np.ndarray:
    tab = _tables(grid)
    ud = np.where(tab.mask, uhat, 0.0)

    def phys(c):
        return np.real(np.fft.ifft2(c)) * tab.n

    if kind == "u_ux":
        prod = phys(ud) * phys(ud * tab.ddx)
    elif kind == "ux_g1u":
        prod = phys(ud * tab.ddx) * phys(ud * tab.m1)
    elif kind == "uy_g2u":
        prod = phys(ud * tab.ddy) * phys(ud * tab.m2)
    elif kind in ("phi_u", "phi_g1u"):
        if p is None:
            raise ValueError(f"duhamel kind {kind!r} needs SolitonParams")
        off = _wrapped_offset(grid, p, t)
        phi = soliton_shape(p.omega, off)[:, None]
        phix = soliton_shape_dx(p.omega, off)[:, None]
        if kind == "phi_u":
            prod = phix * phys(ud) + 2.0 * phi * phys(ud * tab.ddx)
        else:
            prod = phix * phys(ud * tab.m1)
    else:
        raise ValueError(f"unknown duhamel kind {kind!r}; expected one of {DUHAMEL_KINDS}")
    return np.where(tab.mask, np.fft.fft2(prod) / tab.n, 0.0)


def duhamel_term(kind: str, path: TrajectoryPath, t: float,
                 p: SolitonParams | None = None) -> RealField:
    """Trapezoid approximation of one Duhamel integral at time ``t``.

    Computes ``integral_0^t U(t - t') f(u(t'), t') dt'`` where ``f`` is the
    integrand selected by ``kind`` (see :data:`DUHAMEL_KINDS`) and ``u`` is
    read off the trajectory nodes; ``t`` must lie on the node lattice.  The
    quadrature error is ``O(dt^2)`` for smooth trajectories.
    """
    grid = path.grid
    tab = _tables(grid)
    i = path.node_index(t)
    if i == 0:
        return RealField(grid, np.zeros((grid.nx, grid.ny)))
    dt = path.dt
    acc = np.zeros((grid.nx, grid.ny), dtype=complex)
    for j in range(i + 1):
        tj = float(path.times[j])
        uhat = np.fft.fft2(path.fields[j].values) / tab.n
        fhat = _integrand_hat(kind, uhat, grid, p, tj)
        w = dt * (0.5 if j in (0, i) else 1.0)
        acc += w * np.exp(1j * (t - tj) * tab.omega) * fhat
    return RealField(grid, np.real(np.fft.ifft2(acc)) * tab.n)


# ---------------------------------------------------------------------------
# Picard iteration


def _sobolev_weight(grid: Grid2D, s: float) -> np.ndarray:
    r = np.hypot(grid.xi2d, grid.mu2d)
    return (1.0 + r) ** (2.0 * s)


def picard_solve(u0: RealField, eq: EquationKind, T: float, *,
                 nodes: int = 33, tol: float = 1e-8, max_iter: int = 25,
                 s: float = 1.0) -> tuple[TrajectoryPath, PicardReport]:
    """Iterate the Duhamel map to a fixed point on ``[0, T]``.

    Starting from the free evolution ``U(t) u0``, each sweep replaces the
    trajectory by ``U(t) u0 - integral_0^t U(t-t') N(u(t')) dt'`` with
    composite-trapezoid quadrature on the node lattice.  Iteration stops when
    the sup-in-time H^s distance between sweeps drops below ``tol``.

    Returns the final trajectory and a :class:`PicardReport`; raises
    ``RuntimeError`` if the iteration produces non-finite values.
    """
    if not (math.isfinite(T) and T > 0):
        raise ValueError("picard_solve needs a positive horizon T")
    if nodes < 2:
        raise ValueError("picard_solve needs at least two time nodes")
    grid = u0.grid
    if eq.kind == "sem_on_soliton":
        _check_domain(grid, eq.soliton)
    tab = _tables(grid)
    times = np.linspace(0.0, T, nodes)
    u0hat = np.fft.fft2(u0.values) / tab.n
    phases = np.exp(1j * times[:, None, None] * tab.omega[None, :, :])
    w2s = _sobolev_weight(grid, s)
    area = grid.lx * grid.ly

    current = phases * u0hat[None, :, :]
    report = PicardReport(iterations=0, tol=tol, sobolev_index=s)
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            nhat = np.empty_like(current)
            for j in range(nodes):
                nhat[j] = _quadratic_hat(current[j], grid, eq, float(times[j]))
            integ = cumulative_trapezoid(np.conj(phases) * nhat, x=times, axis=0, initial=0.0)
            new = phases * (u0hat[None, :, :] - integ)
            if not np.all(np.isfinite(new.view(np.float64))):
                raise RuntimeError("picard iteration diverged")
            dist = float(np.max(np.sqrt(
                area * np.sum(w2s[None, :, :] * np.abs(new - current) ** 2, axis=(1, 2)))))
        report.iterations += 1
        report.distances.append(dist)
        if len(report.distances) > 1 and report.distances[-2] > 0:
            report.ratios.append(dist / report.distances[-2])
        current = new
        if dist <= tol:
            report.converged = True
            break
    fields = [RealField(grid, np.real(np.fft.ifft2(current[j])) * tab.n)
              for j in range(nodes)]
    return TrajectoryPath(grid, times, fields), report


# ---------------------------------------------------------------------------
# integrating-factor RK4


def _ifrk4_hat(uhat: np.ndarray, grid: Grid2D, eq: EquationKind, t: float, dt: float,
               half_phase: np.ndarray, full_phase: np.ndarray) -> np.ndarray:
    """One IFRK4 step in coefficient space (phases precomputed for ``dt``)."""
    E, E2 = half_phase, full_phase
    cE, cE2 = np.conj(E), np.conj(E2)

    def rhs(vhat, tt):
        return -_quadratic_hat(vhat, grid, eq, tt)

    k1 = rhs(uhat, t)
    k2 = cE * rhs(E * (uhat + 0.5 * dt * k1), t + 0.5 * dt)
    k3 = cE * rhs(E * (uhat + 0.5 * dt * k2), t + 0.5 * dt)
    k4 = cE2 * rhs(E2 * (uhat + dt * k3), t + dt)
    return E2 * (uhat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def ifrk4_step(u: RealField, eq: EquationKind, t: float, dt: float) -> RealField:
    """Advance one step of size ``dt`` from time ``t``.

    The linear flow is applied through its exact unitary phase, so a linear-
    only step reproduces the propagator to round-off; the nonlinearity sees
    classical RK4 with stage times ``t, t+dt/2, t+dt/2, t+dt``.
    """
    if not (math.isfinite(dt) and dt != 0.0):
        raise ValueError("step size must be finite and nonzero")
    grid = u.grid
    tab = _tables(grid)
    E = np.exp(1j * (0.5 * dt) * tab.omega)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _ifrk4_hat(np.fft.fft2(u.values) / tab.n, grid, eq, t, dt, E, E * E)
        vals = np.real(np.fft.ifft2(out)) * tab.n
    if not np.all(np.isfinite(vals)):
        raise RuntimeError("step diverged; reduce dt")
    return RealField(grid, vals)


def _pick_sample_stride(n_steps: int, requested: int | None) -> int:
    if requested is not None:
        if requested < 1:
            raise ValueError("sample stride must be >= 1")
        stride = min(requested, n_steps)
    else:
        stride = max(1, n_steps // 200)
    while n_steps % stride != 0:
        stride -= 1
    return stride


def evolve(u0: RealField, eq: EquationKind, T: float, dt: float, *,
           callbacks: Sequence[Callable[[int, float, RealField], None]] = (),
           callback_stride: int = 1,
           sample_stride: int | None = None) -> TrajectoryPath:
    """March from ``u0`` over ``[0, T]`` with IFRK4 steps of size about ``dt``.

    The step count is ``round(T/dt)`` (at least one) and the step is adjusted
    to divide ``T`` exactly.  ``T`` may be negative (backwards flow) and
    ``T == 0`` returns a single-snapshot trajectory.  Callbacks receive
    ``(step_index, time, field)`` at every ``callback_stride``-th step plus
    the endpoints, and must not mutate the field.  The returned trajectory is
    subsampled every ``sample_stride`` steps (chosen automatically to keep at
    most about 200 snapshots; always a divisor of the step count).
    """
    if not math.isfinite(T):
        raise ValueError("horizon T must be finite")
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError("dt must be positive and finite")
    grid = u0.grid
    if eq.kind == "sem_on_soliton":
        _check_domain(grid, eq.soliton)
    if T == 0.0:
        path = TrajectoryPath(grid, np.array([0.0]), [u0.copy()])
        for cb in callbacks:
            cb(0, 0.0, path.fields[0])
        return path

    n_steps = max(1, int(round(abs(T) / dt)))
    dt_eff = T / n_steps
    stride = _pick_sample_stride(n_steps, sample_stride)
    tab = _tables(grid)
    E = np.exp(1j * (0.5 * dt_eff) * tab.omega)
    E2 = E * E

    uhat = np.fft.fft2(u0.values) / tab.n
    sampled = [(0.0, u0.copy())]
    for cb in callbacks:
        cb(0, 0.0, u0)
    for i in range(n_steps):
        t = i * dt_eff
        with np.errstate(over="ignore", invalid="ignore"):
            uhat = _ifrk4_hat(uhat, grid, eq, t, dt_eff, E, E2)
        if not np.all(np.isfinite(uhat.view(np.float64))):
            raise RuntimeError("step diverged; reduce dt")
        step = i + 1
        want_field = (step % stride == 0) or (step == n_steps)
        want_cb = callbacks and ((step % callback_stride == 0) or (step == n_steps))
        if want_field or want_cb:
            f = RealField(grid, np.real(np.fft.ifft2(uhat)) * tab.n)
            if step % stride == 0:
                sampled.append((step * dt_eff, f))
            if want_cb:
                for cb in callbacks:
                    cb(step, step * dt_eff, f)

    times = np.array([t for t, _ in sampled])
    fields = [f for _, f in sampled]
    if T < 0:  # store in increasing-time order
        times = times[::-1].copy()
        fields = fields[::-1]
    return TrajectoryPath(grid, times, fields)
