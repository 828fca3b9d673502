"""Comparison schemes sharing the model stack with the main solver.

Two schemes bracket the proposed design from above:

* ``heuristic_trajectory`` — the path is fixed up front (a nearest-neighbor
  tour over users and targets flown as straight segments); the sensing
  schedule, beam covariances, radar/offload powers, and the speed profile
  along the fixed headings are then optimized by the usual alternating
  loop with the trajectory block reduced to speeds only.
* ``zf_fixed_velocity`` — communication beamformers are pinned to the
  per-slot zero-forcing directions (only powers remain free) and the UAV
  flies at a constant speed wherever it is not hovering; the acceleration
  limit is dropped, as stopping on a hover slot from a pinned cruise speed
  is otherwise impossible.

Both return the same audited result type as the main solver, so run records
and plots are interchangeable across modes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .ao_solver import (
    AOResult,
    InitializationError,
    TrajectoryVariant,
    _initial_state,
    _nn_order,
    _path_for_schedule,
    _plan_route,
    _sensing_blocks,
    alternate,
)
from .beampattern import SensingBeam, design_beam
from .comms_backhaul import zf_directions
from .power import AeroParams, y_from_v
from .scenario import ScenarioConfig
from .subproblems import Trajectory

KINDS = ("heuristic_trajectory", "zf_fixed_velocity")


@dataclass(frozen=True)
class BaselineSpec:
    """Which comparison scheme to run and its single knob."""

    kind: str
    v_fixed: float = 13.0  # cruise speed (m/s), zf_fixed_velocity only

    def validate(self, cfg: ScenarioConfig) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if self.kind == "zf_fixed_velocity":
            if not self.v_fixed > 0.0:
                raise ValueError("v_fixed must be positive")
            if self.v_fixed > cfg.v_max:
                raise ValueError(
                    f"v_fixed = {self.v_fixed} exceeds v_max = {cfg.v_max}")


@dataclass(frozen=True)
class HeuristicRoute:
    """A fixed visiting route and the slot layout threaded onto it."""

    order: tuple[tuple[str, int], ...]  # ("user", k) / ("target", e) visits
    sites: np.ndarray                   # visited positions in order (S, 2)
    alpha: np.ndarray                   # initial binary schedule (E, N)
    pins: tuple[tuple[int, tuple[float, float]], ...]  # arrival slot per site
    directions: np.ndarray              # per-slot unit headings (N, 2)
    trajectory: Trajectory              # dynamics-feasible initial profile


def _route_length(cfg: ScenarioConfig, points: np.ndarray,
                  order: tuple[int, ...]) -> float:
    path = [cfg.q_start] + [points[i] for i in order] + [cfg.q_final]
    return float(sum(np.linalg.norm(path[j + 1] - path[j])
                     for j in range(len(path) - 1)))


def heuristic_path(cfg: ScenarioConfig,
                   beam: SensingBeam | None = None) -> HeuristicRoute:
    """Fixed tour over users and targets, flown as straight segments.

    The visiting order is greedy nearest-neighbor from the mission start
    over the union of user and target positions; each target contributes a
    hover block (sized like the main initializer's), users are flown
    through.  The slot-count model ignores the turn cost at via-points, so
    an order can be kinematically impossible even when it fits; with few
    sites the remaining orders are tried shortest-first before giving up.
    Raises the usual initialization error naming the slot deficit when no
    order can be threaded into the mission length.
    """
    beam = beam if beam is not None else design_beam(cfg)
    points = (np.concatenate([cfg.user_pos, cfg.target_pos], axis=0)
              if cfg.K or cfg.E else np.zeros((0, 2)))
    labels = ([("user", k) for k in range(cfg.K)]
              + [("target", e) for e in range(cfg.E)])
    nn = tuple(_nn_order(cfg.q_start, points))
    candidates: list[tuple[int, ...]] = [nn]
    if 0 < len(points) <= 7:
        others = sorted(itertools.permutations(range(len(points))),
                        key=lambda p: _route_length(cfg, points, p))
        candidates += [p for p in others if p != nn]

    last_err: InitializationError | None = None
    for order_idx in candidates:
        waypoints = [(points[i],
                      labels[i][1] if labels[i][0] == "target" else None)
                     for i in order_idx]
        target_order = [labels[i][1] for i in order_idx
                        if labels[i][0] == "target"]
        t_counts, t_floors = _sensing_blocks(cfg, beam, target_order)
        by_target = dict(zip(target_order, zip(t_counts, t_floors)))
        counts = [by_target[e][0] if e is not None else 0 for _, e in waypoints]
        floors = [by_target[e][1] if e is not None else 0 for _, e in waypoints]
        try:
            alpha, pins, directions = _plan_route(cfg, waypoints, counts,
                                                  floors)
            traj = _path_for_schedule(cfg, alpha, pins=pins,
                                      directions=directions)
        except InitializationError as err:
            last_err = err
            continue
        return HeuristicRoute(
            order=tuple(labels[i] for i in order_idx),
            sites=(points[list(order_idx)] if order_idx
                   else np.zeros((0, 2))),
            alpha=alpha,
            pins=tuple((n, (float(p[0]), float(p[1]))) for n, p in pins),
            directions=directions, trajectory=traj)
    raise last_err if last_err is not None else InitializationError(
        "no sites to route")


def _leg_hops(a: np.ndarray, b: np.ndarray, s: int, c: float) -> np.ndarray:
    """s displacement vectors of length c from a to b (straight or zigzag).

    A leg shorter than its hop budget absorbs the surplus by alternating
    the heading symmetrically about the leg axis; a single hop must match
    the leg length exactly (the caller guarantees this).
    """
    if s == 0:
        return np.zeros((0, 2))
    d = b - a
    length = float(np.linalg.norm(d))
    u = d / length if length > 1e-12 else np.array([1.0, 0.0])
    if s == 1 or abs(s * c - length) <= 1e-9 * max(1.0, c):
        return np.tile((length / s) * u if length > 1e-12 else c * u, (s, 1))
    perp = np.array([-u[1], u[0]])
    hops = np.zeros((s, 2))
    start = 0
    remaining = length
    if s % 2:  # odd count: one straight hop, then an even zigzag
        hops[0] = c * u
        start, remaining = 1, length - c
    cos_phi = np.clip(remaining / ((s - start) * c), -1.0, 1.0)
    sin_phi = float(np.sqrt(max(0.0, 1.0 - cos_phi ** 2)))
    signs = np.where(np.arange(s - start) % 2 == 0, 1.0, -1.0)
    hops[start:] = c * (cos_phi * u + np.outer(signs, sin_phi * perp))
    return hops


def _fixed_speed_path(cfg: ScenarioConfig, v_fixed: float,
                      beam: SensingBeam) -> tuple[np.ndarray, Trajectory]:
    """Constant-speed tour threading the sensing hovers.

    The gated dynamics apply each moving velocity for a full slot, so every
    moving hop covers exactly v_fixed * delta_t meters; legs absorb surplus
    hop budget by zigzagging (see ``_leg_hops``).  Hover blocks are sized
    like the main initializer's and shrunk toward their SNR floors when the
    mission is tight.  Returns the binary schedule and the threaded
    trajectory; raises the usual initialization error on a slot deficit.
    """
    N, E = cfg.N, cfg.E
    c = v_fixed * cfg.delta_t
    order = _nn_order(cfg.q_start, cfg.target_pos) if E else []
    pins = ([cfg.q_start] + [cfg.target_pos[e] for e in order]
            + [cfg.q_final])
    lengths = [float(np.linalg.norm(pins[j + 1] - pins[j]))
               for j in range(len(pins) - 1)]

    def min_hops(length: float) -> int:
        if length <= 1e-9:
            return 0
        m = int(np.ceil(length / c - 1e-9))
        # a single hop has no slack to match an off-grid leg length
        if m == 1 and abs(length - c) > 1e-9 * max(1.0, c):
            m = 2
        return m

    need = [min_hops(length) for length in lengths]
    counts, floors = _sensing_blocks(cfg, beam, list(order))
    counts = list(counts)
    # the last slot's velocity never enters the dynamics: moving hops and
    # hovers must fit in the first N-1 slots
    avail = N - 1
    while sum(need) + sum(counts) > avail:
        shrink = [i for i in range(len(counts)) if counts[i] > floors[i]]
        if not shrink:
            total = sum(need) + sum(counts) + 1
            raise InitializationError(
                f"mission too short: a constant-speed route at {v_fixed} m/s"
                f" needs {total} slots, short by {total - N}")
        counts[max(shrink, key=lambda i: counts[i])] -= 1
    spare = avail - sum(need) - sum(counts)
    if spare:
        far = max(range(len(need)), key=lambda j: (lengths[j], need[j]))
        if need[far] == 0 and spare == 1:
            raise InitializationError(
                "mission too long for a constant-speed route: one spare"
                " moving slot cannot return to its starting point")
        need[far] += spare

    alpha = np.zeros((E, N))
    q = np.zeros((N, 2))
    v = np.zeros((N, 2))
    q[0] = cfg.q_start
    cursor = 0
    for j, s in enumerate(need):
        for hop in _leg_hops(pins[j], pins[j + 1], s, c):
            v[cursor] = hop / cfg.delta_t
            q[cursor + 1] = q[cursor] + hop
            cursor += 1
        if j < len(order):
            for _ in range(counts[j]):
                alpha[order[j], cursor] = 1.0
                q[cursor + 1] = q[cursor]
                cursor += 1
    # tail slot: the speed pin still applies, the heading is free
    v[N - 1] = v_fixed * (v[N - 2] / np.linalg.norm(v[N - 2])
                          if np.linalg.norm(v[N - 2]) > 1e-9
                          else np.array([1.0, 0.0]))
    aero = cfg.aero or AeroParams()
    y = np.array([y_from_v(v[n], aero) for n in range(N)])
    return alpha, Trajectory(q=q, v=v, y=y)


def zf_beamformers(channels: np.ndarray) -> np.ndarray:
    """Unit-norm zero-forcing directions for stacked channel rows (K, M).

    Direction k is the normalized k-th column of H (H^H H)^{-1} with
    H = channels^T, so every other user's channel is nulled.  Raises on
    K > M or (numerically) colinear channels.
    """
    H = np.asarray(channels)
    K, M = H.shape
    if K > M:
        raise ValueError(f"cannot zero-force {K} users with {M} antennas")
    A = H.T  # columns are channels
    gram = A.conj().T @ A
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("channels are linearly dependent; zero-forcing is "
                         "rank deficient")
    B = A @ np.linalg.inv(gram)
    return (B / np.linalg.norm(B, axis=0, keepdims=True)).T


def run_baseline(cfg: ScenarioConfig, spec: BaselineSpec,
                 beam: SensingBeam | None = None,
                 solvers: tuple[str, ...] = ("CLARABEL", "SCS"),
                 verbose: bool = False) -> AOResult:
    """Solve the instance under a comparison scheme's restrictions.

    Returns the same audited result type as the main solver; all model
    errors (infeasibility, deficits, solver failures) propagate unchanged.
    """
    spec.validate(cfg)
    beam = beam if beam is not None else design_beam(cfg)
    if spec.kind == "heuristic_trajectory":
        route = heuristic_path(cfg, beam)
        state = _initial_state(cfg, beam, route.alpha, route.trajectory)
        return alternate(
            cfg, beam, solvers=solvers, verbose=verbose,
            traj_variant=TrajectoryVariant(directions=route.directions),
            start=(state, route.alpha, route.trajectory))
    alpha, traj = _fixed_speed_path(cfg, spec.v_fixed, beam)
    state = _initial_state(cfg, beam, alpha, traj)
    return alternate(
        cfg, beam, solvers=solvers, verbose=verbose,
        traj_variant=TrajectoryVariant(fixed_speed=spec.v_fixed,
                                       keep_accel=False),
        zf_comm=True, start=(state, alpha, traj))


__all__ = ["KINDS", "BaselineSpec", "HeuristicRoute", "heuristic_path",
           "zf_beamformers", "run_baseline", "zf_directions"]
