"""Duhamel quadrature, Picard iteration, and the IFRK4 marcher."""

import numpy as np
import pytest

from semzk.dynamics import (
    LINEAR,
    SEM,
    ZK,
    SolitonParams,
    propagator_apply,
    sem_on_soliton,
    soliton_profile,
)
from semzk.integrators import (
    TrajectoryPath,
    duhamel_term,
    evolve,
    ifrk4_step,
    picard_solve,
)
from semzk.norms import conserved_I1, conserved_I2, sobolev_norm
from semzk.spectral import Grid2D, RealField, forward_transform, inverse_transform

SMALL = Grid2D(32, 32, 2 * np.pi, 2 * np.pi)


def smooth_field(grid, seed, amplitude, modes=((1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2))):
    rng = np.random.default_rng(seed)
    c = np.zeros((grid.nx, grid.ny), dtype=complex)
    for j, k in modes:
        a = rng.standard_normal() + 1j * rng.standard_normal()
        c[j, k] += a
        c[-j, -k] += np.conj(a)
    vals = np.real(np.fft.ifft2(c)) * grid.nx * grid.ny
    return RealField(grid, amplitude * vals / np.abs(vals).max())


def free_path(grid, u0, T, n_nodes):
    F = forward_transform(u0)
    times = np.linspace(0.0, T, n_nodes)
    fields = [inverse_transform(propagator_apply(F, float(t))) for t in times]
    return TrajectoryPath(grid, times, fields)


# ---------------------------------------------------------------------------
# trajectory container


def test_trajectory_validation():
    u = smooth_field(SMALL, 0, 0.1)
    with pytest.raises(ValueError, match="uniformly spaced"):
        TrajectoryPath(SMALL, np.array([0.0, 0.1, 0.3]), [u, u, u])
    with pytest.raises(ValueError, match="increasing"):
        TrajectoryPath(SMALL, np.array([0.0, -0.1, -0.2]), [u, u, u])
    with pytest.raises(ValueError, match="length mismatch"):
        TrajectoryPath(SMALL, np.array([0.0, 0.1]), [u])
    path = TrajectoryPath(SMALL, np.array([0.0, 0.5, 1.0]), [u, u, u])
    assert path.node_index(0.5) == 1
    with pytest.raises(ValueError, match="outside"):
        path.node_index(2.0)
    with pytest.raises(ValueError, match="lattice"):
        path.node_index(0.3)


# ---------------------------------------------------------------------------
# Duhamel terms


def test_duhamel_zero_cases():
    u = smooth_field(SMALL, 1, 0.5)
    path = free_path(SMALL, u, 0.5, 9)
    at0 = duhamel_term("u_ux", path, 0.0)
    assert np.all(at0.values == 0.0)
    zpath = free_path(SMALL, RealField(SMALL, np.zeros((32, 32))), 0.5, 9)
    assert np.all(duhamel_term("u_ux", zpath, 0.5).values == 0.0)
    with pytest.raises(ValueError, match="unknown duhamel kind"):
        duhamel_term("bogus", path, 0.5)
    with pytest.raises(ValueError, match="needs SolitonParams"):
        duhamel_term("phi_u", path, 0.5)


def test_duhamel_single_mode_closed_form():
    """Trapezoid Duhamel vs. the analytic oscillatory integral, O(dt^2)."""
    g = Grid2D(32, 8, 2 * np.pi, 2 * np.pi)
    k = 1.0
    u0 = RealField(g, np.cos(k * g.x)[:, None] * np.ones((1, g.ny)))
    T = 0.4
    w1, w2 = k**3, (2 * k) ** 3
    # coefficient of mode (2, 0):
    #   -(k/4i) e^{i w2 T} (e^{i(2w1-w2)T} - 1) / (i (2w1 - w2))
    expect = -(k / 4j) * np.exp(1j * w2 * T) * (np.exp(1j * (2 * w1 - w2) * T) - 1) \
        / (1j * (2 * w1 - w2))
    errs = []
    for M in (33, 65, 129):
        path = free_path(g, u0, T, M)
        c = forward_transform(duhamel_term("u_ux", path, T)).coeffs[2, 0]
        errs.append(abs(c - expect))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)
    assert errs[2] <= 5e-6


def test_duhamel_background_kinds_run():
    g = Grid2D(256, 8, 80.0, 2 * np.pi)
    p = SolitonParams(omega=1.0, x0=40.0)
    u = smooth_field(g, 2, 0.1, modes=((3, 1), (7, 0), (5, 2)))
    path = free_path(g, u, 0.2, 9)
    for kind in ("ux_g1u", "uy_g2u", "phi_u", "phi_g1u"):
        out = duhamel_term(kind, path, 0.2, p)
        assert np.all(np.isfinite(out.values))
        assert out.l2() > 0


# ---------------------------------------------------------------------------
# Picard iteration


def test_picard_zero_data():
    z = RealField(SMALL, np.zeros((32, 32)))
    path, rep = picard_solve(z, ZK, 0.5, nodes=9)
    assert rep.converged and rep.iterations == 1
    assert rep.distances == [0.0]
    assert rep.ratios == []
    assert all(np.all(f.values == 0.0) for f in path.fields)


def test_picard_contracts_and_matches_marcher():
    u0 = smooth_field(SMALL, 7, 1.0)
    u0 = (0.01 / sobolev_norm(u0, 1.0)) * u0
    for eq in (ZK, SEM):
        path, rep = picard_solve(u0, eq, 0.1, nodes=65, tol=1e-12, max_iter=30)
        assert rep.converged
        assert all(r < 1.0 for r in rep.ratios)
        assert rep.distances == sorted(rep.distances, reverse=True)
        march = evolve(u0, eq, 0.1, 1e-3).fields[-1]
        assert (path.fields[-1] - march).l2() <= 1e-8


def test_picard_report_shapes():
    u0 = smooth_field(SMALL, 3, 0.05)
    _, rep = picard_solve(u0, ZK, 0.2, nodes=33, tol=1e-10)
    assert len(rep.ratios) == len(rep.distances) - 1
    assert rep.iterations == len(rep.distances)


def test_picard_divergence_detected():
    big = smooth_field(SMALL, 4, 300.0)
    with pytest.raises(RuntimeError, match="diverged"):
        picard_solve(big, ZK, 2.0, nodes=17, max_iter=25)


def test_picard_rejects_bad_horizon():
    u0 = smooth_field(SMALL, 5, 0.1)
    with pytest.raises(ValueError):
        picard_solve(u0, ZK, 0.0)
    with pytest.raises(ValueError):
        picard_solve(u0, ZK, 1.0, nodes=1)


# ---------------------------------------------------------------------------
# IFRK4


def test_ifrk4_linear_step_equals_propagator():
    u = smooth_field(SMALL, 8, 1.0)
    dt = 0.05
    stepped = ifrk4_step(u, LINEAR, 0.0, dt)
    exact = inverse_transform(propagator_apply(forward_transform(u), dt))
    assert (stepped - exact).l2() <= 1e-13 * max(1.0, u.l2())


def test_ifrk4_zero_fixed_point():
    z = RealField(SMALL, np.zeros((32, 32)))
    out = ifrk4_step(z, SEM, 0.0, 0.01)
    assert np.all(out.values == 0.0)


def test_ifrk4_divergence_detected():
    big = smooth_field(SMALL, 9, 1e6)
    with pytest.raises(RuntimeError, match="reduce dt"):
        u = big
        for _ in range(50):
            u = ifrk4_step(u, ZK, 0.0, 0.5)


def test_ifrk4_fourth_order():
    u0 = smooth_field(SMALL, 7, 0.1)
    T = 0.25
    base = 0.005
    sols = [evolve(u0, ZK, T, dt).fields[-1] for dt in (base, base / 2, base / 4)]
    e1 = (sols[0] - sols[1]).l2()
    e2 = (sols[1] - sols[2]).l2()
    order = np.log2(e1 / e2)
    assert 3.8 <= order <= 4.2


# ---------------------------------------------------------------------------
# evolve


def test_evolve_zero_horizon():
    u0 = smooth_field(SMALL, 10, 0.2)
    path = evolve(u0, ZK, 0.0, 0.01)
    assert path.n_nodes == 1
    assert np.array_equal(path.fields[0].values, u0.values)


def test_evolve_sampling_and_callbacks():
    u0 = smooth_field(SMALL, 11, 0.1)
    seen = []
    path = evolve(u0, ZK, 0.1, 0.001, callbacks=[lambda i, t, f: seen.append((i, t))],
                  callback_stride=25, sample_stride=50)
    assert [i for i, _ in seen] == [0, 25, 50, 75, 100]
    assert path.n_nodes == 3  # steps 0, 50, 100
    assert path.times[-1] == pytest.approx(0.1)


def test_evolve_time_reversal_linear():
    u0 = smooth_field(SMALL, 12, 0.7)
    fwd = evolve(u0, LINEAR, 0.7, 0.01).fields[-1]
    back = evolve(fwd, LINEAR, -0.7, 0.01)
    assert back.times[0] == pytest.approx(-0.7)
    assert (back.fields[0] - u0).l2() <= 1e-10 * u0.l2()


def test_evolve_conserves_invariants_short_run():
    u0 = smooth_field(SMALL, 13, 0.5)
    for eq in (ZK, SEM):
        path = evolve(u0, eq, 0.2, 0.002)
        uT = path.fields[-1]
        assert abs(conserved_I1(uT) - conserved_I1(u0)) <= 1e-10 * max(1.0, abs(conserved_I1(u0)))
        assert abs(conserved_I2(uT) - conserved_I2(u0)) <= 1e-10 * conserved_I2(u0)


def test_evolve_soliton_short_travel():
    # 512 x-points keep the soliton spectrum well inside the dealias cutoff.
    g = Grid2D(512, 8, 80.0, 2 * np.pi)
    p = SolitonParams(omega=1.0, x0=30.0)
    u0 = soliton_profile(g, p, 0.0)
    uT = evolve(u0, ZK, 0.2, 2e-3).fields[-1]
    exact = soliton_profile(g, p, 0.2)
    assert (uT - exact).l2() / exact.l2() <= 1e-8


def test_evolve_soliton_background_zero_perturbation():
    g = Grid2D(256, 8, 80.0, 2 * np.pi)
    eq = sem_on_soliton(SolitonParams(omega=1.0, x0=40.0))
    z = RealField(g, np.zeros((g.nx, g.ny)))
    path = evolve(z, eq, 0.5, 0.01)
    assert np.all(path.fields[-1].values == 0.0)


def test_evolve_validates_args():
    u0 = smooth_field(SMALL, 14, 0.1)
    with pytest.raises(ValueError):
        evolve(u0, ZK, 1.0, -0.1)
    with pytest.raises(ValueError):
        evolve(u0, ZK, float("inf"), 0.1)
