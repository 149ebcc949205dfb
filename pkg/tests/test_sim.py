import math

import numpy as np
import pytest

from twocars import barrier as bar
from twocars import sim
from twocars.barrier import Family, PieceId, SurfaceParams
from twocars.errors import BudgetExceeded, NotOnBarrier, PolicyRange
from twocars.kinematics import ControlPair, Costate, State, TWO_PI, propagate, radial_distance
from twocars.sim import Outcome, Termination

PI = math.pi


def test_head_on_capture():
    traj = sim.integrate(State(0, 0.6, PI), sim.constant(0), sim.constant(0), 1e-3, 1.0, 0.5)
    assert traj.termination is Termination.CAPTURED
    assert traj.t_end == pytest.approx(0.05, abs=1e-6)
    assert radial_distance(traj.states[-1]) == pytest.approx(0.5, abs=1e-6)
    assert np.all(np.diff(traj.times) > 0)


def test_capture_is_located_between_steps():
    # coarse steps still find the grazing time to the bisection resolution
    traj = sim.integrate(State(0.3, 1.5, PI), sim.constant(0.3), sim.constant(-0.2), 0.25, 3.0, 0.5)
    assert traj.termination is Termination.CAPTURED
    assert abs(radial_distance(traj.states[-1]) - 0.5) < 1e-6


def test_horizon_and_samples():
    traj = sim.integrate(State(0, 3, 0), sim.constant(0), sim.constant(0), 0.1, 0.35, 0.5)
    assert traj.termination is Termination.HORIZON
    assert traj.times[-1] == pytest.approx(0.35)
    assert len(traj.samples) == len(traj.times)


def test_monitor_stops_the_run():
    traj = sim.integrate(State(0, 3, 1), sim.constant(0), sim.constant(1), 0.01, 1.0, 0.5,
                         monitor=lambda z: z.theta < 1.205)
    assert traj.termination is Termination.LEFT_LAYER
    assert traj.t_end == pytest.approx(0.21, abs=1e-9)


def test_policy_range_is_enforced():
    with pytest.raises(PolicyRange):
        sim.integrate(State(0, 3, 0), sim.constant(2), sim.constant(0), 0.1, 1.0, 0.5)
    with pytest.raises(PolicyRange):
        sim.integrate(State(0, 3, 0), sim.constant(0), sim.constant(float("nan")), 0.1, 1.0, 0.5)


def test_rk4_is_fourth_order():
    z0 = State(0.4, 2.0, 1.0)
    c = ControlPair(0.7, -0.4)
    exact = propagate(z0, c, 1.0)
    errs = []
    for n in (10, 20):
        traj = sim.integrate(z0, sim.constant(c.u), sim.constant(c.v), 1.0 / n, 1.0, 0.1)
        e = traj.states[-1]
        errs.append(math.dist((e.x, e.y, e.theta), (exact.x, exact.y, exact.theta)))
    assert 12 < errs[0] / errs[1] < 20


def test_residual_examples():
    assert sim.semipermeability_residual(State(0, 0.5, PI / 2), Costate(1, 0, 0)) == pytest.approx(0.5)
    assert sim.semipermeability_residual(State(0, 0.5, 0), Costate(0, 1, 0)) == pytest.approx(0.0, abs=1e-15)


def test_residual_audit_is_clean(small):
    report = sim.residual_audit(small, 20, 20, np.random.default_rng(0))
    assert len(report) == 10
    for worst, count in report.values():
        assert worst < 1e-9 and count > 0


def test_oracle_examples():
    assert sim.game_oracle(State(0, 0.7, 0), 0.5).outcome is Outcome.ESCAPE
    assert sim.game_oracle(State(0, 0.55, PI), 0.5).outcome is Outcome.CAPTURE
    verdict = sim.game_oracle(State(0, 0.55, PI), 0.5, stages=2)
    assert verdict.horizon == pytest.approx(1.2)
    with pytest.raises(BudgetExceeded):
        sim.game_oracle(State(0, 1, 0), 0.5, stages=7)
    with pytest.raises(BudgetExceeded):
        sim.game_oracle(State(0, 1, 0), 0.5, stages=6, budget=1000)


def test_oracle_grid_against_straight_lines():
    # with a single stage and a single value the oracle is just a simulation
    z0 = State(0.2, 1.0, 2.5)
    v = sim.game_oracle(z0, 0.5, stages=1, values=(0.0,), stage_dt=1.0, substeps=400)
    traj = sim.integrate(z0, sim.constant(0), sim.constant(0), 1e-4, 1.0, 0.0)
    closest = min(radial_distance(z) for z in traj.states)
    # the oracle only looks at its 400 substep ends, so it can overshoot slightly
    assert closest - 1e-12 <= v.min_distance <= closest + 1e-5


@pytest.mark.parametrize("piece,params", [
    (PieceId(Family.UL, 1), 1.0),
    (PieceId(Family.UL, -1), 1.5),
    (PieceId(Family.TS, 1), SurfaceParams(1.5, 1.0)),
    (PieceId(Family.TS, -1), SurfaceParams(1.7, 1.5)),
    (PieceId(Family.P, 1), SurfaceParams(1.0, 2.0)),
    (PieceId(Family.PL, 1), 4.0),
])
def test_barrier_is_invariant_under_optimal_play(small, piece, params):
    z = bar.eval_piece(small, piece, params)
    drift, series = sim.barrier_invariance_probe(small, z, t_probe=0.5, dt=1e-4)
    assert len(series) > 100
    assert drift < 1e-5


def test_evader_deviation_moves_toward_capture(small):
    z = bar.eval_piece(small, PieceId(Family.P, 1), SurfaceParams(1.0, 2.0))
    _, series = sim.barrier_invariance_probe(small, z, t_probe=0.3, dt=1e-3, evader_override=-1.0)
    assert series[-1] < -0.1
    assert np.all(np.diff(series[1:]) < 0)
    end = sim.integrate(z, sim.constant(-1), sim.constant(-1), 1e-3, 0.3, 0.5).states[-1]
    assert sim.analytic_side(small, end) is Outcome.CAPTURE
    assert sim.game_oracle(end, 0.5).outcome is Outcome.CAPTURE


def test_bup0_straight_line_keeps_distance(small):
    z = State(0.0, 0.5, 0.0)
    traj = sim.integrate(z, sim.constant(0), sim.constant(0), 1e-2, 1.0, 0.4)
    assert max(abs(radial_distance(s) - 0.5) for s in traj.states) < 1e-12
    for x in (0.3, -0.3):
        z = State(x, 0.4, 0.0)
        s = np.sign(x)
        traj = sim.integrate(z, sim.constant(s), sim.constant(s), 1e-2, 1.0, 0.4)
        assert max(abs(radial_distance(q) - 0.5) for q in traj.states) < 1e-9


def test_emanation_pairs(small):
    assert sim.emanation_controls(PieceId(Family.UL, 1)) == ControlPair(0, 1)
    assert sim.emanation_controls(PieceId(Family.TS, -1)) == ControlPair(-1, -1)
    assert sim.emanation_controls(PieceId(Family.P, -1)) == ControlPair(1, -1)
    with pytest.raises(ValueError):
        sim.emanation_controls(PieceId(Family.DL))
    z = bar.dispersal_point(small, 2.0)
    assert sim.emanation_controls(PieceId(Family.DL), z, small) in (
        ControlPair(s * a, s) for s in (1, -1) for a in (1, -1, 0))


def test_probe_requires_a_barrier_state(small):
    with pytest.raises(NotOnBarrier):
        sim.barrier_invariance_probe(small, State(5, 5, 1))


def test_probe_set_geometry(small):
    probes = sim.probe_set(small, 5, 0.05, np.random.default_rng(1))
    assert len(probes) == 10
    for a, b in zip(probes[::2], probes[1::2]):
        assert a.base is b.base and a.displacement == -b.displacement
        assert {a.expected, b.expected} == {Outcome.CAPTURE, Outcome.ESCAPE}
        assert math.dist((a.state.x, a.state.y), (b.state.x, b.state.y)) == pytest.approx(0.1)
        assert min(a.clearance, b.clearance) >= 0.025
