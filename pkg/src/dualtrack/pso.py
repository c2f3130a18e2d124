"""Multiswarm PSO that keeps particles on the edges of a moving polygon.

Every polygon segment owns one swarm.  A particle's fitness is its
perpendicular distance to the line through its segment's two end vertices,
so a swarm has converged once all its members sit on that line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

CONVERGED = "converged"
SEARCHING = "searching"
DIVERGED = "diverged"

STALLED = "stalled"

ITERATING = "iterating"
EXHAUSTED = "exhausted"

_STATUS = (SEARCHING, CONVERGED, DIVERGED)

SEGMENT = "segment"
LINE = "line"

STALL_RESTARTS = ("first", "endpoint", "segment")


class DegeneratePolygon(ValueError):
    pass


@dataclass(frozen=True)
class PsoParams:
    w: float = 0.3
    c1: float = 0.1
    c2: float = 0.1
    r1_range: tuple[float, float] = (1, 3)
    r2_range: tuple[float, float] = (1, 3)
    # draw r1/r2 as integers in their range; False gives uniform reals
    integer_r: bool = True
    v_min: float = 1.0
    v_max: float = 3.0
    population: int = 25
    accept_tol: float = 1.5
    max_iter_per_frame: int = 300
    diverge_tol: float = 25.0
    diverge_patience: int = 20
    # iterations without personal-best improvement before a restart; None disables
    stall_patience: Optional[int] = 20
    # where a stalled particle restarts: "first" end vertex, a random
    # "endpoint", or uniformly along the "segment"
    stall_restart: str = "first"
    # "segment": distance to the finite segment; "line": to its infinite line
    metric: str = "segment"

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        for name in ("w", "c1", "c2", "accept_tol", "diverge_tol"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.stall_restart not in STALL_RESTARTS:
            raise ValueError(f"stall_restart must be one of {STALL_RESTARTS}")
        if self.metric not in (SEGMENT, LINE):
            raise ValueError(f"metric must be {SEGMENT!r} or {LINE!r}")
        for rng in (self.r1_range, self.r2_range):
            if rng[0] > rng[1]:
                raise ValueError(f"empty random range {rng}")


@dataclass(frozen=True)
class Polygon:
    vertices: np.ndarray
    segments: tuple[tuple[int, int], ...]
    closed: bool

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(self.segments, dtype=int).reshape(-1, 2)
        return self.vertices[idx[:, 0]], self.vertices[idx[:, 1]]

    def __len__(self) -> int:
        return len(self.segments)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float = math.inf
    swarm_id: int = -1
    status: str = SEARCHING


@dataclass
class Swarm:
    segment_id: int
    members: list[int]
    gbest_position: np.ndarray
    gbest_fitness: float


def build_polygon(dominants: Sequence[Sequence[float]] | np.ndarray, closed: bool = True) -> Polygon:
    """Join consecutive dominant points; repeated consecutive points merge."""
    pts = np.asarray(dominants, dtype=float).reshape(-1, 2)
    keep = []
    for p in pts:
        if keep and np.array_equal(keep[-1], p):
            continue
        keep.append(p)
    while closed and len(keep) > 1 and np.array_equal(keep[0], keep[-1]):
        keep.pop()
    if len(keep) < 2:
        raise DegeneratePolygon("degenerate polygon")
    verts = np.array(keep)
    n = len(verts)
    if closed and n < 3:
        closed = False
    segs = [(i, i + 1) for i in range(n - 1)]
    if closed:
        segs.append((n - 1, 0))
    return Polygon(verts, tuple(segs), closed)


def segment_length(d1: Sequence[float], d2: Sequence[float]) -> float:
    return math.hypot(d2[0] - d1[0], d2[1] - d1[1])


def fitness(p, d1, d2):
    """Perpendicular distance from ``p`` to the infinite line through ``d1``
    and ``d2``.  Broadcasts over leading axes of array arguments."""
    p = np.asarray(p, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    x0, y0 = p[..., 0], p[..., 1]
    x1, y1 = d1[..., 0], d1[..., 1]
    x2, y2 = d2[..., 0], d2[..., 1]
    length = np.hypot(x2 - x1, y2 - y1)
    if np.any(length == 0):
        raise DegeneratePolygon("fitness of a zero-length segment")
    num = np.abs((y2 - y1) * x0 - (x2 - x1) * y0 + x2 * y1 - y2 * x1)
    out = num / length
    return float(out) if out.ndim == 0 else out


def segment_distance(p, d1, d2):
    """Euclidean distance from ``p`` to the closed segment ``d1``-``d2``.

    Equals :func:`fitness` wherever ``p`` projects inside the segment and
    the distance to the nearer end vertex elsewhere.
    """
    p = np.asarray(p, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    ab = d2 - d1
    ab2 = np.sum(ab * ab, axis=-1)
    if np.any(ab2 == 0):
        raise DegeneratePolygon("distance to a zero-length segment")
    t = np.clip(np.sum((p - d1) * ab, axis=-1) / ab2, 0.0, 1.0)
    foot = d1 + t[..., None] * ab
    out = np.hypot(p[..., 0] - foot[..., 0], p[..., 1] - foot[..., 1])
    return float(out) if out.ndim == 0 else out


def score(p, d1, d2, metric: str = SEGMENT):
    return segment_distance(p, d1, d2) if metric == SEGMENT else fitness(p, d1, d2)


def fitness_matrix(points: np.ndarray, polygon: Polygon, metric: str = LINE) -> np.ndarray:
    """Score of every point against every segment, shape (n_points, n_segments)."""
    d1, d2 = polygon.endpoints()
    return score(np.asarray(points, float)[:, None, :], d1[None], d2[None], metric)


def _draw_r(rng: np.random.Generator, bounds, integer: bool, size) -> np.ndarray:
    lo, hi = bounds
    if integer:
        return rng.integers(int(lo), int(hi), size=size, endpoint=True).astype(float)
    return rng.uniform(lo, hi, size=size)


def _draw_velocity(rng: np.random.Generator, params: PsoParams, n: int) -> np.ndarray:
    lo, hi = params.v_min, params.v_max
    if float(lo).is_integer() and float(hi).is_integer():
        mag = rng.integers(int(lo), int(hi), size=(n, 2), endpoint=True).astype(float)
    else:
        mag = rng.uniform(lo, hi, size=(n, 2))
    sign = rng.choice((-1.0, 1.0), size=(n, 2))
    return mag * sign


def velocity_update(x, v, pbest, gbest, params: PsoParams, r1, r2) -> np.ndarray:
    """Inertia-weight velocity rule with per-component clamping to v_max."""
    new_v = params.w * v + params.c1 * r1 * (pbest - x) + params.c2 * r2 * (gbest - x)
    return np.clip(new_v, -params.v_max, params.v_max)


def init_particles(bounds: Sequence[float], params: PsoParams, rng_seed: int) -> list[Particle]:
    """Scatter ``params.population`` particles uniformly over ``bounds``
    given as ``(x_min, y_min, x_max, y_max)``."""
    rng = np.random.default_rng(rng_seed)
    pos, vel = _init_arrays(bounds, params, rng)
    return [Particle(pos[i].copy(), vel[i].copy(), pos[i].copy()) for i in range(len(pos))]


def _init_arrays(bounds, params: PsoParams, rng: np.random.Generator):
    x_min, y_min, x_max, y_max = map(float, bounds)
    n = params.population
    pos = np.column_stack([rng.uniform(x_min, x_max, n), rng.uniform(y_min, y_max, n)])
    return pos, _draw_velocity(rng, params, n)


def assign_swarms(particles: Sequence[Particle], polygon: Polygon, metric: str = LINE) -> list[Swarm]:
    """Give each particle to the segment it is closest to (lowest index on ties)."""
    if not particles:
        return [_empty_swarm(s, polygon) for s in range(len(polygon))]
    pos = np.array([p.position for p in particles])
    ids = np.argmin(fitness_matrix(pos, polygon, metric), axis=1)
    d1, d2 = polygon.endpoints()
    for p, s in zip(particles, ids):
        p.swarm_id = int(s)
        p.pbest_fitness = score(p.pbest_position, d1[s], d2[s], metric)
    swarms = []
    for s in range(len(polygon)):
        members = [i for i, p in enumerate(particles) if p.swarm_id == s]
        sw = Swarm(s, members, (d1[s] + d2[s]) / 2.0, 0.0)
        if members:
            sw.gbest_position = init_gbest(sw, polygon, particles)
            sw.gbest_fitness = score(sw.gbest_position, d1[s], d2[s], metric)
        swarms.append(sw)
    return swarms


def _empty_swarm(s: int, polygon: Polygon) -> Swarm:
    d1, d2 = polygon.endpoints()
    return Swarm(s, [], (d1[s] + d2[s]) / 2.0, 0.0)


def init_gbest(swarm: Swarm, polygon: Polygon, particles: Sequence[Particle] | np.ndarray) -> np.ndarray:
    """First-frame global best: the member nearest to either end vertex of
    the swarm's segment.  An empty swarm gets the segment midpoint."""
    d1, d2 = polygon.endpoints()
    a, b = d1[swarm.segment_id], d2[swarm.segment_id]
    if not swarm.members:
        return (a + b) / 2.0
    pos = _positions(particles)[swarm.members]
    dist = np.minimum(np.hypot(*(pos - a).T), np.hypot(*(pos - b).T))
    return pos[int(np.argmin(dist))].copy()


def _positions(particles) -> np.ndarray:
    if isinstance(particles, np.ndarray):
        return particles
    return np.array([p.position for p in particles])


def update_particle(
    p: Particle,
    gbest: Sequence[float],
    params: PsoParams,
    rng: np.random.Generator,
    bounds: Optional[Sequence[float]] = None,
    r: Optional[tuple[float, float]] = None,
) -> Particle:
    """One velocity/position step for a single particle.

    ``r`` pins the random coefficients; otherwise they are drawn from
    ``params``.  Positions are clamped to ``bounds`` when given.
    """
    if r is None:
        r1 = _draw_r(rng, params.r1_range, params.integer_r, 2)
        r2 = _draw_r(rng, params.r2_range, params.integer_r, 2)
    else:
        r1, r2 = r
    x = np.asarray(p.position, float)
    v = velocity_update(x, np.asarray(p.velocity, float), np.asarray(p.pbest_position, float),
                        np.asarray(gbest, float), params, r1, r2)
    new_x = x + v
    if bounds is not None:
        new_x = np.clip(new_x, bounds[:2], bounds[2:])
    return replace(p, position=new_x, velocity=v)


@dataclass
class MultiSwarm:
    """Array-backed state of all particles and their swarms."""

    polygon: Polygon
    bounds: tuple[float, float, float, float]
    positions: np.ndarray
    velocities: np.ndarray
    pbest: np.ndarray
    pbest_fit: np.ndarray
    swarm_id: np.ndarray
    status: np.ndarray  # index into _STATUS
    gbest: np.ndarray
    gbest_fit: np.ndarray
    far_count: np.ndarray
    stall_count: np.ndarray
    # end-of-frame positions, newest last, for the "is it moving" test
    history: list[np.ndarray] = field(default_factory=list)
    iteration: int = 0
    reinit_count: int = 0
    # (particle index, new position) for every diverged-particle restart
    reinit_log: list[tuple[int, tuple[float, float]]] = field(default_factory=list)
    # "diverged" or "stalled", parallel to reinit_log
    reinit_reasons: list[str] = field(default_factory=list)
    metric: str = SEGMENT

    @classmethod
    def create(cls, polygon: Polygon, bounds, params: PsoParams, rng: np.random.Generator) -> "MultiSwarm":
        pos, vel = _init_arrays(bounds, params, rng)
        n = len(pos)
        ms = cls(
            polygon=polygon,
            bounds=tuple(map(float, bounds)),
            positions=pos,
            velocities=vel,
            pbest=pos.copy(),
            pbest_fit=np.zeros(n),
            swarm_id=np.zeros(n, dtype=int),
            status=np.zeros(n, dtype=int),
            gbest=np.zeros((len(polygon), 2)),
            gbest_fit=np.zeros(len(polygon)),
            far_count=np.zeros(n, dtype=int),
            stall_count=np.zeros(n, dtype=int),
            metric=params.metric,
        )
        ms.assign(initial=True)
        return ms

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    def particle(self, i: int) -> Particle:
        return Particle(self.positions[i].copy(), self.velocities[i].copy(), self.pbest[i].copy(),
                        float(self.pbest_fit[i]), int(self.swarm_id[i]), _STATUS[self.status[i]])

    def particles(self) -> list[Particle]:
        return [self.particle(i) for i in range(self.n_particles)]

    def swarms(self) -> list[Swarm]:
        return [Swarm(s, [int(i) for i in np.flatnonzero(self.swarm_id == s)],
                      self.gbest[s].copy(), float(self.gbest_fit[s]))
                for s in range(len(self.polygon))]

    def statuses(self) -> list[str]:
        return [_STATUS[s] for s in self.status]

    def accepted(self) -> np.ndarray:
        return self.status == _STATUS.index(CONVERGED)

    def current_fitness(self) -> np.ndarray:
        d1, d2 = self.polygon.endpoints()
        return score(self.positions, d1[self.swarm_id], d2[self.swarm_id], self.metric)

    def assign(self, initial: bool = False) -> None:
        """Re-partition particles by nearest segment and rebuild the bests."""
        self.swarm_id = np.argmin(fitness_matrix(self.positions, self.polygon, self.metric), axis=1)
        d1, d2 = self.polygon.endpoints()
        self.pbest_fit = score(self.pbest, d1[self.swarm_id], d2[self.swarm_id], self.metric)
        if initial:
            self.gbest = np.zeros((len(self.polygon), 2))
            self.gbest_fit = np.zeros(len(self.polygon))
            for sw in self.swarms():
                g = init_gbest(sw, self.polygon, self.positions)
                self.gbest[sw.segment_id] = g
                self.gbest_fit[sw.segment_id] = score(g, d1[sw.segment_id], d2[sw.segment_id], self.metric)
        else:
            self.refresh_gbest()

    def refresh_gbest(self) -> None:
        d1, d2 = self.polygon.endpoints()
        for s in range(len(self.polygon)):
            members = np.flatnonzero(self.swarm_id == s)
            if len(members) == 0:
                self.gbest[s] = (d1[s] + d2[s]) / 2.0
                self.gbest_fit[s] = 0.0
                continue
            best = members[np.argmin(self.pbest_fit[members])]
            self.gbest[s] = self.pbest[best]
            self.gbest_fit[s] = self.pbest_fit[best]

    def set_polygon(self, polygon: Polygon) -> None:
        """Move to a new frame's polygon.

        Particles keep their swarm while the segment count is unchanged and
        are re-partitioned otherwise.  Personal and global bests are
        re-scored against the new segments.
        """
        same = len(polygon) == len(self.polygon)
        self.polygon = polygon
        if same:
            d1, d2 = polygon.endpoints()
            self.pbest_fit = score(self.pbest, d1[self.swarm_id], d2[self.swarm_id], self.metric)
            self.refresh_gbest()
        else:
            self.assign()
        self.status[:] = _STATUS.index(SEARCHING)
        self.far_count[:] = 0
        self.stall_count[:] = 0
        self.iteration = 0

    def end_frame(self) -> None:
        self.history.append(self.positions.copy())
        del self.history[:-2]

    def moving(self) -> np.ndarray:
        """Particles whose last two recorded positions differ."""
        if len(self.history) < 2:
            return np.zeros(self.n_particles, dtype=bool)
        return np.any(self.history[-1] != self.history[-2], axis=1)


def update_bests(ms: MultiSwarm) -> np.ndarray:
    """Keep each personal best only when the new fitness is strictly lower,
    then take each swarm's best personal best as its global best.

    Returns the mask of particles whose personal best improved.
    """
    fit = ms.current_fitness()
    better = fit < ms.pbest_fit
    ms.pbest[better] = ms.positions[better]
    ms.pbest_fit[better] = fit[better]
    ms.refresh_gbest()
    return better


def reinit_diverged(ms: MultiSwarm, i: int, params: PsoParams, rng: np.random.Generator,
                    position: Optional[np.ndarray] = None, reason: str = DIVERGED) -> None:
    """Restart particle ``i`` at ``position``, by default the first end
    vertex of its segment."""
    d1, _ = ms.polygon.endpoints()
    s = ms.swarm_id[i]
    pos = np.array(d1[s] if position is None else position, dtype=float)
    ms.positions[i] = pos
    ms.velocities[i] = _draw_velocity(rng, params, 1)[0]
    ms.pbest[i] = pos
    ms.pbest_fit[i] = score(pos, d1[s], ms.polygon.endpoints()[1][s], ms.metric)
    ms.status[i] = _STATUS.index(SEARCHING)
    ms.far_count[i] = 0
    ms.stall_count[i] = 0
    ms.reinit_count += 1
    ms.reinit_log.append((int(i), (float(pos[0]), float(pos[1]))))
    ms.reinit_reasons.append(reason)


def restart_stalled(ms: MultiSwarm, i: int, params: PsoParams, rng: np.random.Generator) -> None:
    """Restart a stalled particle on its segment as ``params.stall_restart``
    directs.  The first vertex puts one restart on every polygon corner,
    which is what the box extents are read from."""
    d1, d2 = ms.polygon.endpoints()
    s = ms.swarm_id[i]
    if params.stall_restart == "segment":
        t = rng.uniform(0.0, 1.0)
    elif params.stall_restart == "endpoint":
        t = float(rng.integers(0, 2))
    else:
        t = 0.0
    reinit_diverged(ms, i, params, rng, d1[s] + t * (d2[s] - d1[s]), reason=STALLED)


def step_swarms(ms: MultiSwarm, params: PsoParams, rng: np.random.Generator) -> str:
    """One synchronous PSO iteration over every swarm.

    Unaccepted particles that stay beyond ``diverge_tol`` for
    ``diverge_patience`` iterations restart on their segment's first vertex;
    those whose personal best stops improving for ``stall_patience``
    iterations restart per ``params.stall_restart``.
    """
    ms.iteration += 1
    conv = _STATUS.index(CONVERGED)
    fit = ms.current_fitness()
    searching = ms.status != conv
    ms.status[searching & (fit <= params.accept_tol)] = conv
    active = ms.status != conv

    far = active & (fit > params.diverge_tol)
    ms.far_count[far] += 1
    ms.far_count[active & ~far] = 0
    far_out = ms.far_count >= params.diverge_patience
    stalled = np.zeros_like(far_out)
    if params.stall_patience is not None:
        stalled = ~far_out & (ms.stall_count >= params.stall_patience)
    for i in np.flatnonzero(active & (far_out | stalled)):
        ms.status[i] = _STATUS.index(DIVERGED)
        if far_out[i]:
            reinit_diverged(ms, i, params, rng)
        else:
            restart_stalled(ms, i, params, rng)

    idx = np.flatnonzero(active)
    if len(idx):
        n = len(idx)
        r1 = _draw_r(rng, params.r1_range, params.integer_r, (n, 2))
        r2 = _draw_r(rng, params.r2_range, params.integer_r, (n, 2))
        x = ms.positions[idx]
        v = velocity_update(x, ms.velocities[idx], ms.pbest[idx], ms.gbest[ms.swarm_id[idx]], params, r1, r2)
        lo = np.array(ms.bounds[:2])
        hi = np.array(ms.bounds[2:])
        ms.velocities[idx] = v
        ms.positions[idx] = np.clip(x + v, lo, hi)
        better = update_bests(ms)
        moved = np.zeros(ms.n_particles, dtype=bool)
        moved[idx] = True
        ms.stall_count[moved & better] = 0
        ms.stall_count[moved & ~better] += 1

    if not np.any(ms.status != conv):
        return CONVERGED
    if ms.iteration >= params.max_iter_per_frame:
        return EXHAUSTED
    return ITERATING


def run_frame(ms: MultiSwarm, params: PsoParams, rng: np.random.Generator) -> tuple[str, int]:
    """Iterate until every particle is accepted or the iteration budget runs out."""
    state = ITERATING
    while state == ITERATING:
        state = step_swarms(ms, params, rng)
    ms.end_frame()
    return state, ms.iteration


def on_segment(ms: MultiSwarm, margin: float) -> np.ndarray:
    """Particles whose projection falls within their segment, give or take
    ``margin`` pixels at each end."""
    d1, d2 = ms.polygon.endpoints()
    a, b = d1[ms.swarm_id], d2[ms.swarm_id]
    ab = b - a
    length = np.hypot(ab[:, 0], ab[:, 1])
    t = np.einsum("ij,ij->i", ms.positions - a, ab) / length
    return (t >= -margin) & (t <= length + margin)


def reinit_dominant_point(
    lost_position: Sequence[float],
    candidates: np.ndarray,
    moving: np.ndarray,
) -> Optional[np.ndarray]:
    """Nearest moving candidate to a lost dominant point, or None.

    Candidates are tried nearest first; stationary ones are skipped.
    """
    cand = np.asarray(candidates, float).reshape(-1, 2)
    if len(cand) == 0:
        return None
    dist = np.hypot(*(cand - np.asarray(lost_position, float)).T)
    for i in np.argsort(dist, kind="stable"):
        if moving[i]:
            return cand[i].copy()
    return None
