import math

import numpy as np
import pytest

from optocool.errors import DomainError, StatisticsError
from optocool.molphys import RotationalState as S
from optocool.trapsim import (
    CorrelationSeries, EnsembleConfig, Particle, TrapGeometry, _field_magnitude, default_tau_grid,
    field_magnitude, fit_mixing_probability, integrate_trajectory, markov_mixing_samples, mixing_model,
    random_particle, run_ensemble, stark_potential_and_force, total_energy, velocity_correlation,
)

LFS = S(0, 2, 2, -2)


@pytest.fixture(scope="module")
def geom():
    return TrapGeometry()


def test_midplane_field_is_homogeneous(geom):
    y = geom.plate_gap / 2
    for x in np.linspace(-1e-3, 1e-3, 17):
        for z in (-1e-3, 0.0, 2e-3):
            e = field_magnitude(geom, (x, y, z))
            assert abs(e - geom.homogeneous_field) <= 1e-10 * geom.homogeneous_field


def test_midplane_field_rotated_top(geom):
    rot = TrapGeometry(top_plate_rotated=True)
    k = 2 * math.pi / rot.micro_period
    # one plate's mode survives at first order: E1 exp(-k g / 2) relative to E0
    bound = 1.01 * rot.micro_field_surface * math.exp(-k * rot.plate_gap / 2) / rot.homogeneous_field
    for x in np.linspace(-1e-3, 1e-3, 9):
        e = field_magnitude(rot, (x, rot.plate_gap / 2, 0.3e-3))
        assert abs(e - rot.homogeneous_field) <= bound * rot.homogeneous_field


def test_surface_field_colinear(geom):
    pr = geom.params(type("D", (), {"dipole": 1.0, "mass": 1.0})(), LFS)
    e = _field_magnitude(pr, 0.0, 0.0, 0.0)
    assert e == pytest.approx(geom.homogeneous_field + geom.micro_field_surface, rel=1e-14)


def test_field_periodic_near_bottom_plate(geom):
    p = geom.micro_period
    for x in np.linspace(-1e-3, 1e-3, 11):
        a = field_magnitude(geom, (x, 0.1 * p, 0.0))
        b = field_magnitude(geom, (x + p, 0.1 * p, 0.0))
        assert a == pytest.approx(b, rel=1e-11)


def test_outside_trap_rejected(geom, cf3h):
    with pytest.raises(DomainError):
        field_magnitude(geom, (0.0, -1e-4, 0.0))
    with pytest.raises(DomainError):
        stark_potential_and_force(cf3h, S(0, 2, 2, 2), geom, (0.0, 1e-3, 0.0))


@pytest.mark.parametrize("rotated", [False, True])
def test_force_matches_finite_differences(cf3h, rotated):
    g = TrapGeometry(top_plate_rotated=rotated)
    rng = np.random.default_rng(11)
    h = 1e-7
    p = g.micro_period
    for _ in range(100):
        # sample where the force is not negligible: within a few periods of a plate
        dy = rng.uniform(0.05, 2.0) * p
        y = dy if rng.uniform() < 0.5 else g.plate_gap - dy
        pos = np.array([rng.uniform(-0.9, 0.9) * g.half_width, y, rng.uniform(-0.9, 0.9) * g.half_width])
        _, f = stark_potential_and_force(cf3h, LFS, g, pos)
        fd = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            w = [stark_potential_and_force(cf3h, LFS, g, pos + j * e)[0] for j in (-2, -1, 1, 2)]
            # five-point central stencil
            fd[i] = -(w[0] - 8 * w[1] + 8 * w[2] - w[3]) / (12 * h)
        assert np.linalg.norm(fd - f) <= 1e-6 * np.linalg.norm(f)


def test_wall_force_matches_finite_differences(cf3h, geom):
    lam = geom.perimeter_decay_length
    h = 1e-3 * lam
    for x in np.linspace(geom.half_width - 5 * lam, geom.half_width - lam, 5):
        pos = np.array([x, 1.5e-3, 0.0])
        _, f = stark_potential_and_force(cf3h, LFS, geom, pos)
        wp, _ = stark_potential_and_force(cf3h, LFS, geom, pos + [h, 0, 0])
        wm, _ = stark_potential_and_force(cf3h, LFS, geom, pos - [h, 0, 0])
        assert -(wp - wm) / (2 * h) == pytest.approx(f[0], rel=1e-6)
        assert f[0] < 0


def test_bulk_force_negligible(cf3h, geom):
    _, f_surf = stark_potential_and_force(cf3h, LFS, geom, (0.0, 1e-9, 0.0))
    k = 2 * math.pi / geom.micro_period
    # both plates' modes reach the mid-plane: bound 2 exp(-k g / 2)
    bound = 2.0 * math.exp(-k * geom.plate_gap / 2)
    for x in np.linspace(-1e-3, 1e-3, 21):
        _, f = stark_potential_and_force(cf3h, LFS, geom, (x, geom.plate_gap / 2, 0.0))
        assert np.linalg.norm(f) <= 1.01 * bound * np.linalg.norm(f_surf)


def test_force_repels_from_bottom_plate(cf3h, geom):
    for x in np.linspace(0, geom.micro_period, 9):
        _, f = stark_potential_and_force(cf3h, LFS, geom, (x, 0.1 * geom.micro_period, 0.0))
        assert f[1] > 0
        _, f = stark_potential_and_force(cf3h, LFS, geom, (x, geom.plate_gap - 0.1 * geom.micro_period, 0.0))
        assert f[1] < 0


def test_energy_conserved_and_bounded(cf3h, geom):
    p = random_particle(geom, 10.0, seed=5)
    e0 = total_energy(cf3h, LFS, geom, p.position, p.velocity)
    tr = integrate_trajectory(cf3h, LFS, geom, p, 1.0)
    assert not tr.lost
    assert tr.max_energy_error < 1e-6
    assert tr.samples.shape == (100001, 3)
    assert np.allclose(np.linalg.norm(tr.samples[0]), 10.0)
    assert tr.n_collisions > 100
    # kinetic energy never exceeds the conserved total
    assert np.max(0.5 * cf3h.mass * (tr.samples**2).sum(axis=1)) <= e0 * (1 + 1e-6)


def test_separable_limit_preserves_speed_components(cf3h):
    # negligible microstructure: y motion is free, walls only flip x and z velocities
    g = TrapGeometry(micro_field_surface=1e-12)
    v0 = np.array([10.0, 0.005, 3.0])
    p = Particle(np.array([0.0, 1.5e-3, 0.0]), v0, LFS, 0)
    tr = integrate_trajectory(cf3h, LFS, g, p, 0.1)
    s = np.abs(tr.samples)
    assert np.allclose(s[:, 1], abs(v0[1]), rtol=1e-9)
    # between bounces |v_x| returns to its initial value
    far = np.abs(s[:, 0] - 10.0) < 1e-3
    assert far.mean() > 0.95
    assert np.signbit(tr.samples[:, 0]).any() and (~np.signbit(tr.samples[:, 0])).any()


def test_hfs_and_outside_start_rejected(cf3h, geom):
    with pytest.raises(DomainError):
        integrate_trajectory(cf3h, S(0, 2, 2, 2), geom, random_particle(geom, 1.0, 0), 1e-3)
    with pytest.raises(DomainError):
        integrate_trajectory(cf3h, LFS, geom, Particle(np.array([0, 5e-3, 0.0]), np.zeros(3)), 1e-3)


# --- correlation analysis -------------------------------------------------

def test_correlation_zero_lag_and_asymptote():
    tau = default_tau_grid(1e-4, fine_max=20e-3, coarse_max=0.2)
    samples = markov_mixing_samples(200, 10.0, 1.0, 1000.0, 0.6, 1e-4, seed=1)
    ser = velocity_correlation(samples, tau, 1e-4, 1000.0)
    assert ser.c_x[0] == ser.c_y[0] == ser.c_z[0] == 0.0
    late = tau >= 2e-3
    c_inf = 10.0**2 / 6
    for c in (ser.c_x, ser.c_y, ser.c_z):
        assert np.allclose(c[late], c_inf, rtol=0.06)


def test_full_mixing_saturates_after_one_collision():
    sdt = 1e-5
    tau = np.arange(0, 301) * sdt
    samples = markov_mixing_samples(400, 10.0, 1.0, 1000.0, 0.3, sdt, seed=2)
    ser = velocity_correlation(samples, tau, sdt, 1000.0)
    c_inf = 100.0 / 6
    i1 = np.searchsorted(tau, 1e-3)
    assert ser.c_x[i1] == pytest.approx(c_inf, rel=0.06)
    assert ser.c_x[i1 // 2] == pytest.approx(0.5 * c_inf, rel=0.1)  # linear ramp for even spacing


def test_fit_recovers_markov_q():
    tau = default_tau_grid(1e-4, fine_max=20e-3, coarse_max=0.2)
    samples = markov_mixing_samples(300, 10.0, 0.2, 1000.0, 1.0, 1e-4, seed=7)
    ser = velocity_correlation(samples, tau, 1e-4, 1000.0)
    fit = fit_mixing_probability(ser, (0, 1, 2), tau_max=10e-3)
    assert fit.q == pytest.approx(0.2, abs=0.02)
    lo, hi = fit.interval
    assert lo < fit.q < hi


def test_fit_exact_model_data():
    tau = np.linspace(0, 0.02, 201)
    c = mixing_model(tau, 16.0, 0.3, 900.0)
    ser = CorrelationSeries(tau, c, 1.1 * c, 0 * c, 900.0, 1)
    fit = fit_mixing_probability(ser, (0, 1), tau_min=1e-3, tau_max=0.02)
    assert fit.q == pytest.approx(0.3, rel=1e-6)
    assert fit.c_inf == pytest.approx((16.0, 17.6), rel=1e-6)


def test_fit_needs_collisions():
    tau = np.linspace(0, 1, 10)
    with pytest.raises(StatisticsError):
        fit_mixing_probability(CorrelationSeries(tau, tau, tau, tau, 0.0, 1))


def test_tau_grid_must_match_sampling():
    with pytest.raises(StatisticsError):
        velocity_correlation(np.zeros((100, 3)), [0.0, 1.5e-5], 1e-5)


def test_ensemble_deterministic_and_worker_independent(cf3h, geom):
    tau = default_tau_grid(1e-5, 1e-3, 5e-3, n_coarse=5)
    cfg = EnsembleConfig(n_particles=3, duration=0.02, seed=42)
    a = run_ensemble(cf3h, geom, cfg, tau)
    b = run_ensemble(cf3h, geom, cfg, tau)
    c = run_ensemble(cf3h, geom, EnsembleConfig(n_particles=3, duration=0.02, seed=42, workers=2), tau)
    for other in (b, c):
        assert np.array_equal(a.series.c_x, other.series.c_x)
        assert np.array_equal(a.series.c_z, other.series.c_z)
        assert a.trajectories == other.trajectories
    d = run_ensemble(cf3h, geom, EnsembleConfig(n_particles=3, duration=0.02, seed=43), tau)
    assert not np.array_equal(a.series.c_x, d.series.c_x)
