import numpy as np
import pytest

from sharplimit.errors import GeometryError, InvalidArgumentError, SimulationHaltError
from sharplimit.profile import surface_tension
from sharplimit.radial import RadialDomain, one_sided_slope
from sharplimit.sharp import GT_FACTOR, SharpSolver, summary_rows


def planar(n=400):
    return SharpSolver(RadialDomain(1, 1.0, n, -1.0), 0.0)


def test_planar_closed_form():
    s = planar()
    r, mu, V, slopes = s.solve_mu(0.0, np.zeros(401))
    exact = np.where(r > 0, 1 - np.cosh(1 - r) / np.cosh(1), -(1 - np.cosh(1 + r) / np.cosh(1)))
    assert np.abs(mu - exact).max() < 1e-4
    assert abs(mu[200]) < 1e-12
    assert slopes[0] == pytest.approx(np.tanh(1.0), abs=1e-4)
    assert slopes[1] == pytest.approx(np.tanh(1.0), abs=1e-4)
    assert abs(V) < 1e-12


def test_jump_reproduction_order():
    errs = []
    for n in (200, 400, 800):
        _, _, _, slopes = planar(n).solve_mu(0.0, np.zeros(n + 1))
        errs.append(abs(slopes[1] - np.tanh(1.0)))
    order = np.polyfit(np.log([200, 400, 800]), np.log(errs), 1)[0]
    assert -order >= 1.8


def test_ball_velocity_against_fine_grid():
    ref = SharpSolver(RadialDomain(2, 1.0, 16000), 0.5).initial_state(0.5).V
    V = SharpSolver(RadialDomain(2, 1.0, 800), 0.5).initial_state(0.5).V
    assert abs(V / ref - 1) < 1e-5


def test_interface_datum_and_curvature():
    s = SharpSolver(RadialDomain(2, 1.0, 400), 0.5)
    st = s.initial_state(0.5)
    assert st.kappa == -2.0
    assert st.mu[st.m] == pytest.approx(GT_FACTOR * st.kappa * surface_tension(), abs=1e-12)
    assert st.r[st.m] == 0.5


def test_maximum_principle_spot_check():
    st = SharpSolver(RadialDomain(2, 1.0, 400), 0.5).initial_state(0.5)
    assert np.abs(st.mu).max() <= 1 + abs(st.kappa) * surface_tension()


def test_guard_band():
    s = SharpSolver(RadialDomain(2, 1.0, 100), 0.5)
    with pytest.raises(GeometryError):
        s.solve_mu(0.995, np.zeros(101))


def test_step_sigma_uniform_reaction():
    s = SharpSolver(RadialDomain(1, 1.0, 100, -1.0), 0.0)
    st = s.initial_state(0.0, sigma0=np.full(101, 0.3))
    dt = 0.01
    out = s.step_sigma(st, dt, source=-1.0)
    assert np.allclose(out, (0.3 - dt) / (1 + 2 * dt), atol=1e-14)


def test_step_sigma_cosine_mode():
    dom = RadialDomain(1, 1.0, 2000)
    s = SharpSolver(dom, 0.5)
    r = s.grid.nodes(0.5)
    st = s.initial_state(0.5, sigma0=np.cos(np.pi * r))
    dt = 0.01
    out = s.step_sigma(st, dt, source=0.0)
    amp = np.sum(out * np.cos(np.pi * r)) / np.sum(np.cos(np.pi * r) ** 2)
    assert amp == pytest.approx(1.0 / (1 + dt * (np.pi ** 2 + 2)), rel=1e-5)


def test_step_sigma_zero_dt_is_identity():
    s = SharpSolver(RadialDomain(2, 1.0, 100), 0.5)
    st = s.initial_state(0.5, sigma0=lambda r: r ** 2)
    assert np.array_equal(s.step_sigma(st, 0.0), st.sigma)


def test_symmetric_front_stays_put():
    s = planar(200)
    traj = s.run(0.0, 0.1, 1e-3)
    assert np.abs(traj.radii()).max() < 1e-10


def test_injected_velocity_kinematics():
    s = SharpSolver(RadialDomain(2, 1.0, 400), 0.5)
    st = s.advance(s.initial_state(0.5), 0.01, velocity=1.0)
    assert st.R == pytest.approx(0.51, abs=1e-15)


def test_temporal_self_convergence():
    s = SharpSolver(RadialDomain(2, 1.0, 200), 0.5)
    R = [s.run(0.5, 0.04, dt).radii()[-1] for dt in (4e-3, 2e-3, 1e-3, 5e-4)]
    d = np.abs(np.diff(R))
    order = np.log2(d[:-1] / d[1:])
    assert np.all(order >= 0.9)


def test_spatial_self_convergence():
    R = [SharpSolver(RadialDomain(2, 1.0, n), 0.5).run(0.5, 0.02, 1e-3).radii()[-1] for n in (100, 200, 400, 800)]
    d = np.abs(np.diff(R))
    assert np.all(np.log2(d[:-1] / d[1:]) >= 1.8)


def test_trajectory_invariants():
    s = SharpSolver(RadialDomain(2, 1.0, 400), 0.5)
    traj = s.run(0.5, 0.01, 1e-3)
    ts = traj.times()
    assert np.all(np.diff(ts) > 0)
    R, V = traj.radii(), traj.velocities()
    assert np.all(np.abs(np.diff(R)) <= np.abs(V[:-1]) * 1e-3 * (1 + 1e-12))
    rows = list(summary_rows(traj))
    assert len(rows) == len(ts) and set(rows[0]) == {"t", "R", "V", "max_abs_mu", "max_abs_sigma"}


def test_sigma_continuity_by_construction():
    s = SharpSolver(RadialDomain(2, 1.0, 400), 0.5)
    st = s.run(0.5, 0.01, 1e-3).states[-1]
    # one shared unknown at the front: the sigma jump is exactly zero
    assert st.sigma[st.inner][-1] == st.sigma[st.outer][0]
    flux = one_sided_slope(st.sigma, st.r, st.m, +1) - one_sided_slope(st.sigma, st.r, st.m, -1)
    assert abs(flux) < 1e-2


def test_interpolated_state_keeps_interface_datum():
    s = SharpSolver(RadialDomain(2, 1.0, 400), 0.5)
    traj = s.run(0.5, 0.01, 1e-3)
    st = traj.at(0.00437)
    assert st.mu[st.m] == pytest.approx(s.interface_value(st.R), abs=1e-15)


def test_run_validation_and_halt():
    s = SharpSolver(RadialDomain(2, 1.0, 100), 0.5)
    with pytest.raises(InvalidArgumentError):
        s.run(0.5, 0.0105, 1e-3)
    with pytest.raises(SimulationHaltError) as info:
        s.advance(s.initial_state(0.5), 1.0, velocity=1.0)
    assert info.value.state.R == 0.5
