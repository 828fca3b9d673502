"""UAV power consumption: rotary-wing aerodynamics, local compute, totals.

The aerodynamic model follows the standard rotary-wing decomposition into
blade-profile, induced, and parasite (drag) power.  Two flavours of the
flight expression are available:

  * ``standard`` (default): keeps the hover baselines, so p_fly(0) equals
    p_hover and the curve has the usual interior minimum;
  * ``paper_literal``: the delta-from-hover variant in which every term
    vanishes at v = 0 (and which goes slightly negative near the mean rotor
    induced velocity — retained only for faithfulness experiments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ConfigError, ScenarioConfig


@dataclass(frozen=True)
class AeroParams:
    """Rotary-wing airframe constants.

    Defaults are a common small-quadrotor parameterization: blade angular
    velocity Omega (rad/s), rotor radius (m), air density (kg/m^3), rotor
    solidity, disc area (m^2), blade-profile hover power P_o (W), induced
    hover power P_i (W), mean rotor induced velocity v0 (m/s), and fuselage
    drag ratio r0.
    """

    Omega: float = 300.0
    rotor_r: float = 0.4
    rho_air: float = 1.225
    solidity_s: float = 0.05
    disc_area_A: float = 0.503
    P_o: float = 80.0
    P_i: float = 88.6
    v0: float = 4.03
    drag_r0: float = 0.6
    model_mode: str = "standard"

    def __post_init__(self):
        for name in ("Omega", "rotor_r", "rho_air", "solidity_s",
                     "disc_area_A", "P_o", "P_i", "v0", "drag_r0"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"aero parameter {name} must be positive")
        if self.model_mode not in ("standard", "paper_literal"):
            raise ConfigError("model_mode must be 'standard' or 'paper_literal'")

    @property
    def tip_speed_sq(self) -> float:
        """(Omega * r)^2, the squared blade tip speed."""
        return (self.Omega * self.rotor_r) ** 2

    @property
    def drag_coeff(self) -> float:
        """0.5 * r0 * rho * s * A, multiplying ||v||^3 in the parasite term."""
        return 0.5 * self.drag_r0 * self.rho_air * self.solidity_s * self.disc_area_A


def p_hover(params: AeroParams | None = None) -> float:
    """Hover power: blade-profile plus induced power."""
    params = params or AeroParams()
    return params.P_o + params.P_i


def y_from_v(v, params: AeroParams | None = None) -> float:
    """Positive root of y^2 = sqrt(1 + ||v||^4 / 4 v0^4) - ||v||^2 / 2 v0^2.

    Satisfies 1/y^2 = y^2 + ||v||^2/v0^2; y(0) = 1 and y ~ v0/||v|| for fast
    flight.  This is the induced-power factor: the induced term of p_fly is
    P_i * y (standard) or P_i * (y - 1) (paper_literal).
    """
    params = params or AeroParams()
    s = float(np.sum(np.square(np.asarray(v, dtype=float)))) / (2.0 * params.v0 ** 2)
    # sqrt(1+s^2) - s, written cancellation-free
    y_sq = 1.0 / (math.sqrt(1.0 + s * s) + s)
    return math.sqrt(y_sq)


def p_fly(v, params: AeroParams | None = None) -> float:
    """Aerodynamic power at horizontal velocity ``v`` (2-vector or speed)."""
    params = params or AeroParams()
    v = np.atleast_1d(np.asarray(v, dtype=float))
    speed_sq = float(np.sum(v * v))
    speed = math.sqrt(speed_sq)
    y = y_from_v(v, params)
    profile = params.P_o * 3.0 * speed_sq / params.tip_speed_sq
    parasite = params.drag_coeff * speed ** 3
    if params.model_mode == "paper_literal":
        return profile + params.P_i * (y - 1.0) + parasite
    return params.P_o + profile + params.P_i * y + parasite


def local_power(a_hw: float, f_loc: float) -> float:
    """CPU power for on-board echo compression: a * f^3."""
    if a_hw < 0 or f_loc < 0:
        raise ValueError("a_hw and f_loc must be nonnegative")
    return a_hw * f_loc ** 3


def min_fly_speed(params: AeroParams | None = None, v_max: float = 30.0) -> tuple[float, float]:
    """Speed minimizing p_fly on [0, v_max] (fine grid + golden refinement).

    Returns (speed, power).  With the standard model the minimum is interior:
    slow flight saves induced power relative to hovering.
    """
    params = params or AeroParams()
    speeds = np.linspace(0.0, v_max, 2001)
    powers = np.array([p_fly(s, params) for s in speeds])
    i = int(np.argmin(powers))
    lo, hi = speeds[max(i - 1, 0)], speeds[min(i + 1, len(speeds) - 1)]
    # golden-section refinement on the bracketing interval
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - gr * (b - a), a + gr * (b - a)
    for _ in range(60):
        if p_fly(c, params) < p_fly(d, params):
            b, d = d, c
            c = b - gr * (b - a)
        else:
            a, c = c, d
            d = a + gr * (b - a)
    v_star = 0.5 * (a + b)
    return v_star, p_fly(v_star, params)


def aero_power_slot(alpha_slot_sum: float, v, params: AeroParams) -> float:
    """Per-slot aerodynamic power: hover while sensing, flight otherwise."""
    return alpha_slot_sum * p_hover(params) + (1.0 - alpha_slot_sum) * p_fly(v, params)


def objective(state, schedule, trajectory, cfg: ScenarioConfig) -> float:
    """Average UAV power of a full solution (W).

    Sums, per slot: amplified transmit power (communication covariance traces
    plus duty-cycled sensing power), aerodynamic power gated by the sensing
    indicators, static RF-chain power, and — on sensing slots — compression
    power and offload power.  ``state`` needs W (K,N,M,M), p_rad (N,),
    p_off_tilde (E,N); ``schedule`` needs alpha (E,N); ``trajectory`` needs
    v (N,2).
    """
    alpha = np.asarray(schedule.alpha, dtype=float)
    v = np.asarray(trajectory.v, dtype=float)
    params = cfg.aero or AeroParams()
    duty = cfg.duty_cycle
    p_loc = local_power(cfg.hw_const_a, cfg.f_loc)
    total = 0.0
    for n in range(cfg.N):
        comm_pow = sum(float(np.real(np.trace(state.W[k][n]))) for k in range(cfg.K))
        sa = float(np.sum(alpha[:, n]))
        total += cfg.eta * (comm_pow + duty * float(state.p_rad[n]))
        total += aero_power_slot(sa, v[n], params)
        total += cfg.M * cfg.P_static
        total += sa * p_loc
        total += float(np.sum(state.p_off_tilde[:, n]))
    return total / cfg.N
