import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualtrack import pso
from dualtrack.pso import _STATUS

SQUARE = [(60, 50), (120, 50), (120, 110), (60, 110)]
BOUNDS = (0, 0, 179, 143)
coord = st.floats(-500, 500, allow_nan=False)


def test_build_polygon_examples():
    assert len(pso.build_polygon([(0, 0), (4, 0), (4, 4), (0, 4)], True)) == 4
    assert len(pso.build_polygon([(0, 0), (1, 1), (2, 2)], False)) == 2
    assert len(pso.build_polygon([(0, 0), (4, 0), (4, 0), (4, 4), (0, 4)], True)) == 4
    two = pso.build_polygon([(0, 0), (3, 0)], True)
    assert not two.closed and len(two) == 1
    with pytest.raises(pso.DegeneratePolygon, match="degenerate"):
        pso.build_polygon([(1, 1), (1, 1)], False)


def test_segment_length_examples():
    assert pso.segment_length((0, 0), (3, 4)) == 5
    assert pso.segment_length((2, 2), (2, 2)) == 0
    assert pso.segment_length((1, 1), (4, 5)) == 5


def test_fitness_examples():
    assert pso.fitness((2, 3), (0, 0), (4, 0)) == 3
    assert pso.fitness((8, 0), (0, 0), (4, 0)) == 0
    assert pso.fitness((0, 0), (0, 1), (1, 0)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    with pytest.raises(pso.DegeneratePolygon):
        pso.fitness((1, 1), (2, 2), (2, 2))


@given(coord, coord, coord, coord, coord, coord)
def test_segment_distance_never_below_line_distance(px, py, ax, ay, bx, by):
    if math.hypot(bx - ax, by - ay) < 1e-3:
        return
    p, a, b = (px, py), (ax, ay), (bx, by)
    line = pso.fitness(p, a, b)
    seg = pso.segment_distance(p, a, b)
    assert seg >= line - 1e-9
    ends = min(math.dist(p, a), math.dist(p, b))
    assert seg <= ends + 1e-9


def test_init_particles_examples():
    p25 = pso.init_particles(BOUNDS, pso.PsoParams(), 7)
    p33 = pso.init_particles(BOUNDS, pso.PsoParams(population=33), 7)
    assert len(p25) == 25 and len(p33) == 33
    again = pso.init_particles(BOUNDS, pso.PsoParams(), 7)
    assert all(np.array_equal(a.position, b.position) and np.array_equal(a.velocity, b.velocity)
               for a, b in zip(p25, again))
    pos = np.array([p.position for p in p25])
    vel = np.abs(np.array([p.velocity for p in p25]))
    assert pos.min() >= 0 and (pos[:, 0] <= 179).all() and (pos[:, 1] <= 143).all()
    assert set(np.unique(vel)) <= {1.0, 2.0, 3.0}


def _particle(x, y):
    return pso.Particle(np.array([x, y], float), np.zeros(2), np.array([x, y], float))


def test_assign_swarms_ties_go_to_lowest_index():
    poly = pso.build_polygon([(0, 0), (10, 0), (10, 10), (0, 10)], True)
    swarms = pso.assign_swarms([_particle(10, 0), _particle(5, 5)], poly)
    assert 0 in swarms[0].members and 1 in swarms[0].members


def test_assign_swarms_matches_brute_force():
    rng = np.random.default_rng(0)
    poly = pso.build_polygon(SQUARE, True)
    particles = [_particle(*xy) for xy in rng.uniform(0, 180, (100, 2))]
    for metric in (pso.LINE, pso.SEGMENT):
        swarms = pso.assign_swarms(particles, poly, metric)
        assert sorted(i for s in swarms for i in s.members) == list(range(100))
        d1, d2 = poly.endpoints()
        for i, p in enumerate(particles):
            scores = [pso.score(p.position, d1[s], d2[s], metric) for s in range(4)]
            best = min(range(4), key=lambda s: (scores[s], s))
            assert i in swarms[best].members


def test_init_gbest_picks_member_nearest_an_endpoint():
    poly = pso.build_polygon([(0, 0), (20, 0)], False)
    pts = np.array([[25.0, 0.0], [0.0, 2.0], [10.0, 9.0]])
    sw = pso.Swarm(0, [0, 1, 2], np.zeros(2), 0.0)
    assert pso.init_gbest(sw, poly, pts).tolist() == [0.0, 2.0]
    sw_at = pso.Swarm(0, [0, 1], np.zeros(2), 0.0)
    assert pso.init_gbest(sw_at, poly, np.array([[5.0, 5.0], [0.0, 0.0]])).tolist() == [0.0, 0.0]
    assert pso.init_gbest(pso.Swarm(0, [], np.zeros(2), 0.0), poly, pts).tolist() == [10.0, 0.0]


def test_init_gbest_brute_force():
    rng = np.random.default_rng(3)
    poly = pso.build_polygon([(3, 4), (40, 17)], False)
    pts = rng.uniform(0, 50, (10, 2))
    sw = pso.Swarm(0, list(range(10)), np.zeros(2), 0.0)
    dist = [min(math.dist(p, (3, 4)), math.dist(p, (40, 17))) for p in pts]
    assert pso.init_gbest(sw, poly, pts).tolist() == pts[int(np.argmin(dist))].tolist()


def test_update_particle_examples():
    rng = np.random.default_rng(0)
    fixed = pso.Particle(np.array([1.0, 1.0]), np.array([2.0, -1.0]), np.array([1.0, 1.0]))
    out = pso.update_particle(fixed, (1.0, 1.0), pso.PsoParams(w=0.0), rng)
    assert out.velocity.tolist() == [0.0, 0.0] and out.position.tolist() == [1.0, 1.0]

    p = pso.Particle(np.zeros(2), np.array([2.0, 0.0]), np.zeros(2))
    out = pso.update_particle(p, (0.0, 0.0), pso.PsoParams(w=0.3, c1=0.0, c2=0.0), rng)
    assert out.velocity == pytest.approx([0.6, 0.0]) and out.position == pytest.approx([0.6, 0.0])

    p = pso.Particle(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]))
    out = pso.update_particle(p, (2.0, 0.0), pso.PsoParams(w=0.0), rng, r=(1.0, 1.0))
    assert out.velocity == pytest.approx([0.3, 0.0]) and out.position == pytest.approx([0.3, 0.0])


def test_velocity_is_clamped():
    v = pso.velocity_update(np.zeros(2), np.zeros(2), np.array([100.0, -100.0]), np.zeros(2),
                            pso.PsoParams(), 3.0, 3.0)
    assert v.tolist() == [3.0, -3.0]


def _swarm(params=pso.PsoParams(), seed=0, bounds=BOUNDS):
    rng = np.random.default_rng(seed)
    return pso.MultiSwarm.create(pso.build_polygon(SQUARE, True), bounds, params, rng), rng


def test_update_bests_branches():
    ms, _ = _swarm()
    ms.swarm_id[:] = 0
    i = 0
    ms.positions[i] = (80, 52.5)  # 2.5 from the top edge
    ms.pbest[i] = (80, 54)
    ms.pbest_fit[i] = 4.0
    pso.update_bests(ms)
    assert ms.pbest_fit[i] == pytest.approx(2.5) and ms.pbest[i].tolist() == [80, 52.5]
    ms.positions[i] = (80, 54)
    pso.update_bests(ms)
    assert ms.pbest_fit[i] == pytest.approx(2.5)
    for s in range(len(ms.polygon)):
        members = ms.swarm_id == s
        if members.any():
            assert ms.gbest_fit[s] == ms.pbest_fit[members].min()


def test_particles_on_segments_converge_without_moving():
    ms, rng = _swarm()
    d1, d2 = ms.polygon.endpoints()
    ms.positions[:] = (d1[ms.swarm_id] + d2[ms.swarm_id]) / 2
    before = ms.positions.copy()
    assert pso.step_swarms(ms, pso.PsoParams(), rng) == pso.CONVERGED
    assert ms.iteration == 1 and np.array_equal(ms.positions, before)


def test_identity_update_exhausts_without_stall_restarts():
    params = pso.PsoParams(w=0.0, c1=0.0, c2=0.0, stall_patience=None, max_iter_per_frame=50)
    ms, rng = _swarm(params)
    # off-segment but inside diverge_tol, so only the stall rule could rescue them
    d1, d2 = ms.polygon.endpoints()
    ms.positions[:] = (d1[ms.swarm_id] + d2[ms.swarm_id]) / 2 + np.array([0.0, 5.0])
    before = ms.positions.copy()
    state, iters = pso.run_frame(ms, params, rng)
    assert state == pso.EXHAUSTED and iters == 50
    assert np.array_equal(ms.positions, before)


@pytest.mark.parametrize("how", pso.STALL_RESTARTS)
def test_stalled_particles_restart_on_their_segment(how):
    params = pso.PsoParams(w=0.0, c1=0.0, c2=0.0, max_iter_per_frame=100, stall_restart=how)
    ms, rng = _swarm(params)
    d1, d2 = ms.polygon.endpoints()
    ms.positions[:] = (d1[ms.swarm_id] + d2[ms.swarm_id]) / 2 + np.array([0.0, 5.0])
    ms.pbest[:] = ms.positions
    ms.pbest_fit = ms.current_fitness()
    off = set(np.flatnonzero(ms.pbest_fit > params.accept_tol).tolist())
    assert off
    state, iters = pso.run_frame(ms, params, rng)
    assert state == pso.CONVERGED
    assert {i for i, _ in ms.reinit_log} == off
    assert iters == params.stall_patience + 2
    assert set(ms.reinit_reasons) == {pso.STALLED}
    for i, pos in ms.reinit_log:
        s = ms.swarm_id[i]
        assert pso.segment_distance(pos, d1[s], d2[s]) < 1e-9
    starts = {i: tuple(d1[ms.swarm_id[i]]) for i, _ in ms.reinit_log}
    ends = {i: tuple(d2[ms.swarm_id[i]]) for i, _ in ms.reinit_log}
    if how == "first":
        assert all(pos == starts[i] for i, pos in ms.reinit_log)
    elif how == "endpoint":
        assert all(pos in (starts[i], ends[i]) for i, pos in ms.reinit_log)
    else:
        assert len({pos for _, pos in ms.reinit_log}) == len(ms.reinit_log)


def test_unknown_stall_restart_rejected():
    with pytest.raises(ValueError):
        pso.PsoParams(stall_restart="middle")


def test_reinit_diverged_moves_to_first_endpoint():
    ms, rng = _swarm()
    ms.positions[3] = (500, 500)
    pso.reinit_diverged(ms, 3, pso.PsoParams(), rng)
    d1, _ = ms.polygon.endpoints()
    assert ms.positions[3].tolist() == d1[ms.swarm_id[3]].tolist()
    assert ms.current_fitness()[3] == 0.0


def test_far_particle_restarts_only_after_patience():
    params = pso.PsoParams()
    ms, rng = _swarm(params, bounds=(0, 0, 299, 299))
    pso.run_frame(ms, params, rng)
    ms.iteration = 0
    ms.positions[0] = (250, 250)
    ms.status[0] = _STATUS.index(pso.SEARCHING)
    before = len(ms.reinit_log)
    # far from the segment for one iteration short of the patience
    for _ in range(params.diverge_patience - 1):
        ms.positions[0] = (250, 250)
        pso.step_swarms(ms, params, rng)
    assert ms.far_count[0] == params.diverge_patience - 1
    assert len(ms.reinit_log) == before
    ms.positions[0] = (250, 250)
    pso.step_swarms(ms, params, rng)
    pso.step_swarms(ms, params, rng)
    assert ms.reinit_log[-1][0] == 0
    assert ms.reinit_reasons[-1] == pso.DIVERGED
    d1, _ = ms.polygon.endpoints()
    assert ms.reinit_log[-1][1] == tuple(d1[ms.swarm_id[0]])


def test_reinit_dominant_point_examples():
    cand = np.array([[3.0, 0.0], [1.0, 0.0], [7.0, 0.0]])
    assert pso.reinit_dominant_point((0, 0), cand, np.array([True, True, True])).tolist() == [1.0, 0.0]
    assert pso.reinit_dominant_point((0, 0), cand, np.array([True, False, True])).tolist() == [3.0, 0.0]
    assert pso.reinit_dominant_point((0, 0), cand, np.array([False] * 3)) is None
    assert pso.reinit_dominant_point((0, 0), np.zeros((0, 2)), np.zeros(0, bool)) is None


def test_set_polygon_keeps_membership_when_shape_is_unchanged():
    params = pso.PsoParams()
    ms, rng = _swarm(params)
    pso.run_frame(ms, params, rng)
    ids = ms.swarm_id.copy()
    ms.set_polygon(pso.build_polygon(np.array(SQUARE) + 2.0, True))
    assert np.array_equal(ms.swarm_id, ids)
    assert not ms.accepted().any() and ms.iteration == 0
    ms.set_polygon(pso.build_polygon(SQUARE[:3], True))
    assert ms.swarm_id.max() < 3


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([pso.SEGMENT, pso.LINE]))
def test_bests_are_monotone(seed, metric):
    params = pso.PsoParams(metric=metric)
    ms, rng = _swarm(params, seed)
    pb, gb = ms.pbest_fit.copy(), ms.gbest_fit.copy()
    state = pso.ITERATING
    while state == pso.ITERATING:
        state = pso.step_swarms(ms, params, rng)
        assert np.all(ms.pbest_fit <= pb + 1e-12)
        assert np.all(ms.gbest_fit <= gb + 1e-12)
        pb, gb = ms.pbest_fit.copy(), ms.gbest_fit.copy()
    assert state == pso.CONVERGED


def test_accepted_particles_lie_within_tolerance():
    params = pso.PsoParams()
    ms, rng = _swarm(params, 5)
    assert pso.run_frame(ms, params, rng)[0] == pso.CONVERGED
    assert np.all(ms.current_fitness() <= params.accept_tol)


@pytest.mark.parametrize("kw", [dict(population=0), dict(v_min=4.0), dict(w=-1.0), dict(metric="l2"),
                                dict(r1_range=(3, 1))])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        pso.PsoParams(**kw)
