"""Equation right-hand sides, the free propagator, and soliton profiles.

The evolution solved by this package is, in physical variables,

    u_t + dx(Laplacian u) + N(u) = 0,

with three choices of nonlinearity ``N``:

* ``zk``:   ``N(u) = u u_x`` (the classical two-dimensional KdV extension);
* ``sem``:  ``N(u) = (1/2) (u u_x + u_x * G1 u + u_y * G2 u)`` where ``G1``
  and ``G2`` are the bounded nonlocal operators with symbols ``m1`` and
  ``m2`` (x- and y-derivative of the inverse Laplacian of ``u_x``); this is
  the single-equation form of the surface-electromigration system, with the
  electric potential eliminated;
* ``sem_on_soliton``: the ``sem`` nonlinearity plus the linear-in-u forcing
  produced by linearizing around a travelling line soliton, used to study
  the transverse instability of that soliton.

A ``linear`` tag disables the nonlinearity entirely (free flow); it exists
for time-reversal and convergence diagnostics.

All quadratic products are formed pointwise in physical space from
two-thirds dealiased factors and the result is dealiased again, so the
retained band is alias-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from types import SimpleNamespace

import numpy as np

from semzk.spectral import (
    Grid2D,
    RealField,
    SpectralField,
    make_multiplier,
)

__all__ = [
    "KINDS",
    "SolitonParams",
    "EquationKind",
    "ZK",
    "SEM",
    "LINEAR",
    "sem_on_soliton",
    "soliton_shape",
    "soliton_shape_dx",
    "potential_shape",
    "soliton_profile",
    "soliton_profile_dx",
    "potential_profile",
    "propagator_apply",
    "nonlinear_zk",
    "nonlinear_sem",
    "background_terms",
    "nonlinear_rhs",
    "solve_potential",
    "poisson_residual",
]

#: Largest admissible soliton amplitude at the periodic seam.  Domains must
#: be long enough that the (non-periodic) sech^2 profile has decayed below
#: this at distance lx/2 from the crest.
SEAM_TOLERANCE = 1e-13


@dataclass(frozen=True)
class SolitonParams:
    """Travelling-wave parameters: speed ``omega > 0`` and crest origin ``x0``."""

    omega: float
    x0: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"soliton speed must be positive and finite, got {self.omega!r}")
        if not math.isfinite(self.x0):
            raise ValueError("soliton crest position must be finite")


#: the admissible right-hand sides
KINDS = ("linear", "zk", "sem", "sem_on_soliton")


@dataclass(frozen=True)
class EquationKind:
    """Which right-hand side to evolve; see the module docstring."""

    kind: str
    soliton: SolitonParams | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown equation kind {self.kind!r}")
        if self.kind == "sem_on_soliton" and self.soliton is None:
            raise ValueError("sem_on_soliton requires SolitonParams")
        if self.kind != "sem_on_soliton" and self.soliton is not None:
            raise ValueError(f"equation {self.kind!r} takes no soliton parameters")


ZK = EquationKind("zk")
SEM = EquationKind("sem")
LINEAR = EquationKind("linear")


def sem_on_soliton(params: SolitonParams) -> EquationKind:
    """Perturbation dynamics around the travelling soliton ``params``."""
    return EquationKind("sem_on_soliton", params)


# ---------------------------------------------------------------------------
# closed-form profiles


def _sech(z: np.ndarray) -> np.ndarray:
    # overflow-free: sech(z) = 2 e^{-|z|} / (1 + e^{-2|z|})
    a = np.exp(-np.abs(z))
    return 2.0 * a / (1.0 + a * a)


def soliton_shape(omega: float, z):
    """Travelling-wave profile ``3*omega*sech^2(sqrt(omega)/2 * z)``."""
    return 3.0 * omega * _sech(0.5 * math.sqrt(omega) * np.asarray(z, dtype=float)) ** 2


def soliton_shape_dx(omega: float, z):
    """Exact derivative of :func:`soliton_shape` with respect to ``z``."""
    a = 0.5 * math.sqrt(omega)
    az = a * np.asarray(z, dtype=float)
    s = _sech(az)
    return -6.0 * a * omega * s * s * np.tanh(az)


def potential_shape(omega: float, z):
    """Potential profile ``6*sqrt(omega)*tanh(sqrt(omega)/2 * z)``.

    Its derivative is exactly :func:`soliton_shape`; the profile itself is
    not periodic (it steps by ``12*sqrt(omega)`` across the line) and is only
    ever evaluated pointwise.
    """
    return 6.0 * math.sqrt(omega) * np.tanh(0.5 * math.sqrt(omega) * np.asarray(z, dtype=float))


def _check_domain(grid: Grid2D, p: SolitonParams) -> None:
    tail = soliton_shape(p.omega, 0.5 * grid.lx)
    if tail > SEAM_TOLERANCE:
        raise ValueError(
            f"domain too small for soliton: profile is {tail:.2e} at the periodic seam "
            f"(lx = {grid.lx:g}, omega = {p.omega:g}); need the tail below {SEAM_TOLERANCE:g}")


def _wrapped_offset(grid: Grid2D, p: SolitonParams, t: float) -> np.ndarray:
    # distance from the crest, wrapped to [-lx/2, lx/2)
    d = grid.x - (p.x0 + p.omega * t)
    return (d + 0.5 * grid.lx) % grid.lx - 0.5 * grid.lx


def soliton_profile(grid: Grid2D, p: SolitonParams, t: float = 0.0) -> RealField:
    """The travelling soliton sampled on the grid at time ``t`` (y-uniform)."""
    _check_domain(grid, p)
    col = soliton_shape(p.omega, _wrapped_offset(grid, p, t))
    return RealField(grid, np.repeat(col[:, None], grid.ny, axis=1))


def soliton_profile_dx(grid: Grid2D, p: SolitonParams, t: float = 0.0) -> RealField:
    """Exact x-derivative of :func:`soliton_profile`."""
    _check_domain(grid, p)
    col = soliton_shape_dx(p.omega, _wrapped_offset(grid, p, t))
    return RealField(grid, np.repeat(col[:, None], grid.ny, axis=1))


def potential_profile(grid: Grid2D, p: SolitonParams, t: float = 0.0) -> RealField:
    """Pointwise samples of the (non-periodic) potential profile.

    The crest offset is *not* wrapped, so the samples trace the genuine tanh
    ramp across the box.  Diagnostics only -- never Fourier-transform this.
    """
    z = grid.x - (p.x0 + p.omega * t)
    col = potential_shape(p.omega, z)
    return RealField(grid, np.repeat(np.asarray(col)[:, None], grid.ny, axis=1))


# ---------------------------------------------------------------------------
# cached per-grid spectral machinery


@lru_cache(maxsize=32)
def _tables(grid: Grid2D) -> SimpleNamespace:
    return SimpleNamespace(
        ddx=make_multiplier(grid, "ddx").values,
        ddy=make_multiplier(grid, "ddy").values,
        m1=make_multiplier(grid, "m1").values,
        m2=make_multiplier(grid, "m2").values,
        lap=make_multiplier(grid, "laplacian").values,
        inv_lap_dx=make_multiplier(grid, "inv_laplacian_dx").values,
        omega=np.real(make_multiplier(grid, "symbol_omega").values),
        mask=grid._default_dealias_mask,
        n=grid.nx * grid.ny,
    )


def _to_phys(chat: np.ndarray, n: int) -> np.ndarray:
    return np.real(np.fft.ifft2(chat)) * n


def propagator_apply(F: SpectralField, t: float) -> SpectralField:
    """Apply the free-flow group ``U(t)``, i.e. multiply by ``exp(i t omega)``.

    ``omega = xi^3 + xi mu^2`` is real and odd, so ``U(t)`` is unitary on L2,
    preserves conjugate symmetry, and satisfies ``U(s)U(t) = U(s+t)`` and
    ``U(0) = Id``.
    """
    if not math.isfinite(t):
        raise ValueError("propagator time must be finite")
    tab = _tables(F.grid)
    return SpectralField(F.grid, F.coeffs * np.exp(1j * t * tab.omega))


def _phase(grid: Grid2D, t: float) -> np.ndarray:
    return np.exp(1j * t * _tables(grid).omega)


def _quadratic_hat(uhat: np.ndarray, grid: Grid2D, eq: EquationKind, t: float) -> np.ndarray:
    """Spectrum of N(u) (dealiased) from the dealiased spectrum of u."""
    tab = _tables(grid)
    ud = np.where(tab.mask, uhat, 0.0)
    if eq.kind == "linear":
        return np.zeros_like(uhat)

    ux = _to_phys(ud * tab.ddx, tab.n)
    u = _to_phys(ud, tab.n)
    if eq.kind == "zk":
        prod = u * ux
    else:
        uy = _to_phys(ud * tab.ddy, tab.n)
        g1 = _to_phys(ud * tab.m1, tab.n)
        g2 = _to_phys(ud * tab.m2, tab.n)
        prod = 0.5 * (u * ux + ux * g1 + uy * g2)
        if eq.kind == "sem_on_soliton":
            p = eq.soliton
            off = _wrapped_offset(grid, p, t)
            phi = soliton_shape(p.omega, off)[:, None]
            phix = soliton_shape_dx(p.omega, off)[:, None]
            prod = prod + 0.5 * (phix * u + 2.0 * phi * ux + phix * g1)
    phat = np.fft.fft2(prod) / tab.n
    return np.where(tab.mask, phat, 0.0)


def nonlinear_zk(u: RealField) -> RealField:
    """Dealiased ``u u_x``."""
    g = u.grid
    uhat = np.fft.fft2(u.values) / _tables(g).n
    return RealField(g, _to_phys(_quadratic_hat(uhat, g, ZK, 0.0), _tables(g).n))


def nonlinear_sem(u: RealField) -> RealField:
    """Dealiased ``(1/2)(u u_x + u_x G1 u + u_y G2 u)``.

    For y-independent mean-zero fields ``G1 u = u`` exactly on the lattice,
    so this reduces to ``u u_x`` (the one-dimensional KdV nonlinearity).
    """
    g = u.grid
    uhat = np.fft.fft2(u.values) / _tables(g).n
    return RealField(g, _to_phys(_quadratic_hat(uhat, g, SEM, 0.0), _tables(g).n))


def background_terms(u: RealField, p: SolitonParams, t: float) -> RealField:
    """Linear-in-``u`` forcing from the soliton background at time ``t``.

    Evaluates ``(1/2)(phi_x u + 2 phi u_x) + (1/2) phi_x G1 u`` with the
    profile ``phi`` and its derivative taken in closed form at the
    travelling-crest position for time ``t``.
    """
    _check_domain(u.grid, p)
    g = u.grid
    tab = _tables(g)
    ud = np.where(tab.mask, np.fft.fft2(u.values) / tab.n, 0.0)
    uph = _to_phys(ud, tab.n)
    ux = _to_phys(ud * tab.ddx, tab.n)
    g1 = _to_phys(ud * tab.m1, tab.n)
    off = _wrapped_offset(g, p, t)
    phi = soliton_shape(p.omega, off)[:, None]
    phix = soliton_shape_dx(p.omega, off)[:, None]
    prod = 0.5 * (phix * uph + 2.0 * phi * ux) + 0.5 * phix * g1
    phat = np.where(tab.mask, np.fft.fft2(prod) / tab.n, 0.0)
    return RealField(g, _to_phys(phat, tab.n))


def nonlinear_rhs(u: RealField, eq: EquationKind, t: float = 0.0) -> RealField:
    """Full nonlinearity ``N(u)`` for the given equation (zero for linear)."""
    g = u.grid
    tab = _tables(g)
    uhat = np.fft.fft2(u.values) / tab.n
    return RealField(g, _to_phys(_quadratic_hat(uhat, g, eq, t), tab.n))


def solve_potential(u: RealField) -> RealField:
    """Reconstruct the potential: solve ``Laplacian(phi) = u_x`` with zero mean."""
    g = u.grid
    tab = _tables(g)
    uhat = np.fft.fft2(u.values) / tab.n
    return RealField(g, _to_phys(uhat * tab.inv_lap_dx, tab.n))


def poisson_residual(u: RealField, phi: RealField) -> float:
    """L2 norm of ``Laplacian(phi) - u_x``."""
    if u.grid != phi.grid:
        raise ValueError("fields live on different grids")
    g = u.grid
    tab = _tables(g)
    uhat = np.fft.fft2(u.values) / tab.n
    phat = np.fft.fft2(phi.values) / tab.n
    res = phat * tab.lap - uhat * tab.ddx
    return float(np.sqrt(g.lx * g.ly * np.sum(np.abs(res) ** 2)))
