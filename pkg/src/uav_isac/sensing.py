"""Pulse-radar link budget: sensing SNR, sensing ranges, and backhaul load.

A slot flagged for sensing is filled with ``N_s`` scan rounds (pulse of width
t_p followed by a listening window t_o).  All rounds of a slot are coherently
combined at the receive array, and slots are combined across the mission by
selection-MRC, which makes the accumulated SNR additive over sensing slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beampattern import SensingBeam, beam_gain
from .scenario import SPEED_OF_LIGHT, ScenarioConfig, steering_vector


@dataclass(frozen=True)
class SensingSchedule:
    """Per-target, per-slot sensing indicators.

    ``alpha[e, n]`` is 1 when slot n is spent hovering over target e.  The
    relaxed solver produces values in [0, 1]; rounding snaps them to {0, 1}.
    """

    alpha: np.ndarray  # (E, N)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 2:
            raise ValueError("alpha must be (E, N)")
        if np.any(a < -1e-9) or np.any(a > 1 + 1e-9):
            raise ValueError("alpha entries out of [0, 1]")
        object.__setattr__(self, "alpha", a)
        a.setflags(write=False)

    @property
    def E(self) -> int:
        return self.alpha.shape[0]

    @property
    def N(self) -> int:
        return self.alpha.shape[1]

    def slot_load(self) -> np.ndarray:
        """Sum over targets per slot; feasibility requires <= 1 (one beam)."""
        return self.alpha.sum(axis=0)

    def slots_per_target(self) -> np.ndarray:
        return self.alpha.sum(axis=1)

    def is_binary(self, tol: float = 1e-3) -> bool:
        return bool(np.all(np.minimum(self.alpha, 1.0 - self.alpha) <= tol))

    def check(self, N_s_max: int, tol: float = 1e-6) -> list[str]:
        """Feasibility of the schedule constraints; empty list when clean."""
        problems = []
        load = self.slot_load()
        if np.any(load > 1 + tol):
            problems.append(
                f"slot load exceeds one beam: max {load.max():.6f}")
        per = self.slots_per_target()
        if np.any(per > N_s_max + tol):
            problems.append(
                f"per-target sensing slots exceed {N_s_max}: max {per.max():.6f}")
        return problems


@dataclass(frozen=True)
class SensingBudget:
    """Derived radar bookkeeping for one scenario."""

    R_min_range: float  # m
    R_max_range: float  # m
    N_s: int  # scan rounds per sensing slot
    R_pr: float  # backhaul production rate, bits/s/Hz

    def __post_init__(self):
        if not self.R_max_range > self.R_min_range > 0:
            raise ValueError("need R_max_range > R_min_range > 0")
        if self.R_pr <= 0 or self.N_s < 1:
            raise ValueError("N_s and R_pr must be positive")


def sensing_ranges(t_p: float, t_o: float) -> tuple[float, float]:
    """Blind and maximum unambiguous range of the pulse radar.

    The radar cannot see echoes arriving while it still transmits
    (range < c*t_p/2) nor after the listening window closes (c*t_o/2).
    """
    if not t_o > t_p > 0:
        raise ValueError("need t_o > t_p > 0")
    return SPEED_OF_LIGHT * t_p / 2.0, SPEED_OF_LIGHT * t_o / 2.0


def production_rate(N_s: int, N_b: int, ranges: tuple[float, float],
                    Delta_R: float, delta_t: float, W_f: float) -> float:
    """Spectral efficiency needed to stream quantized echo samples to the BS.

    Each scan round yields one N_b-bit sample per resolvable range cell
    between the blind and maximum ranges, all of which must leave the UAV
    within the slot over bandwidth W_f.
    """
    r_min, r_max = ranges
    if min(N_s, N_b, Delta_R, delta_t, W_f) <= 0 or r_max <= r_min:
        raise ValueError("production_rate arguments must be positive")
    return N_s * N_b * (r_max - r_min) / (Delta_R * delta_t * W_f)


def budget_from_config(cfg: ScenarioConfig) -> SensingBudget:
    """Assemble the radar bookkeeping from a scenario."""
    ranges = sensing_ranges(cfg.radar.t_p, cfg.radar.t_o)
    N_s = cfg.n_rounds
    return SensingBudget(
        R_min_range=ranges[0],
        R_max_range=ranges[1],
        N_s=N_s,
        R_pr=production_rate(N_s, cfg.radar.N_b, ranges, cfg.radar.Delta_R,
                             cfg.delta_t, cfg.radar.W_f),
    )


def per_slot_snr(q: np.ndarray, d_e: np.ndarray, p_rad: float,
                 beam: SensingBeam, cfg: ScenarioConfig, e: int = 0) -> float:
    """Radar output SNR of one sensing slot at horizontal position q.

    Round-trip amplitude: reflection sqrt(rcs/(4 pi Psi^2)) times the two-way
    reference gain beta0^2 over distance 2 Psi; N_s rounds combine coherently
    with a matched (normalized-steering) receive combiner, whose array gain
    contributes the factor M = ||a||^2.  The transmit covariance is
    p_rad * R_d.
    """
    if p_rad < 0:
        raise ValueError("p_rad must be nonnegative")
    if p_rad == 0.0:
        return 0.0
    M = cfg.M
    dist2 = float(np.sum((np.asarray(q, float) - np.asarray(d_e, float)) ** 2))
    psi_sq = dist2 + cfg.H ** 2
    a = steering_vector(q, d_e, cfg.H, M, cfg.radar.antenna_spacing,
                        cfg.radar.wavelength)
    gain = p_rad * beam_gain(beam.R_d, a)
    amp_sq = cfg.rcs[e] * (cfg.beta0 ** 2) ** 2 / (16.0 * math.pi * psi_sq ** 2)
    return cfg.n_rounds * (cfg.radar.t_p / cfg.delta_t) * M * amp_sq * gain \
        / cfg.sigma2_e


def accumulated_snr(schedule: SensingSchedule, trajectory: np.ndarray,
                    p_rad: np.ndarray, beam: SensingBeam, e: int,
                    cfg: ScenarioConfig) -> float:
    """Mission-total sensing SNR for target e under selection-MRC combining."""
    if schedule.alpha.shape != (cfg.E, cfg.N):
        raise ValueError("schedule shape mismatch")
    total = 0.0
    for n in range(cfg.N):
        a_en = schedule.alpha[e, n]
        if a_en == 0.0 or p_rad[n] == 0.0:
            continue
        total += a_en * per_slot_snr(trajectory[n], cfg.target_pos[e],
                                     float(p_rad[n]), beam, cfg, e)
    return total
