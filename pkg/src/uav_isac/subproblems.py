"""Convex subproblem builders for the alternating solver.

Two parameterized conic programs are compiled once per run and re-solved with
updated expansion-point data each iteration:

* SP1 — resource allocation at a fixed trajectory: beam covariances, big-M
  product reformulations, radar/offload powers, relaxed sensing indicators,
  and the SINR/rate auxiliaries (SCA surrogates around the incumbent).
* SP2 — trajectory at fixed resource allocation: positions, velocities and
  the induced-power factor, with the rate constraint re-expressed through the
  linearized array-response trace terms and noise-normalized SINR variables.

Both builders follow the disciplined-parameterized ruleset: every quantity
that changes between iterations enters through ``cp.Parameter`` handles (and
nonneg parameters wherever they scale a convex term), so repeated solves skip
canonicalization.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import cvxpy as cp
import numpy as np

from .beampattern import SensingBeam, beam_gain
from .comms_backhaul import RAState, zf_directions
from .power import AeroParams, local_power, p_fly, p_hover
from .scenario import (
    ScenarioConfig,
    backhaul_gain,
    steering_vector,
    steering_vector_angle,
)
from .sca_surrogates import trace_term_J, trace_term_gradient
from .sensing import budget_from_config

LN2 = math.log(2.0)

# statuses every caller can rely on
STATUS_OPTIMAL = "optimal"
STATUS_INACCURATE = "inaccurate"
STATUS_INFEASIBLE = "infeasible"
STATUS_FAILURE = "failure"

_OK = (STATUS_OPTIMAL, STATUS_INACCURATE)


@dataclass
class ConicProgram:
    """A compiled cvxpy problem plus named variable/parameter handles.

    ``variables`` and ``parameters`` may hold cvxpy objects or (nested) lists
    of them; the builders below document their own keys.
    """

    problem: cp.Problem
    variables: dict[str, Any]
    parameters: dict[str, Any]
    meta: dict[str, Any] = field(default_factory=dict)


@dataclass
class SolveResult:
    status: str
    objective: float
    solve_time: float
    solver: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in _OK


def _normalize_status(raw: str | None) -> str:
    if raw == cp.OPTIMAL:
        return STATUS_OPTIMAL
    if raw == cp.OPTIMAL_INACCURATE:
        return STATUS_INACCURATE
    if raw in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return STATUS_INFEASIBLE
    return STATUS_FAILURE


# default options per solver backend; gap/feasibility targets a shade looser
# than the backends' own defaults, which otherwise report near-machine-level
# solutions as merely "almost solved"
_SOLVER_OPTS: dict[str, dict[str, Any]] = {
    "CLARABEL": {"tol_gap_abs": 1e-6, "tol_gap_rel": 1e-7, "tol_feas": 1e-8,
                 "tol_ktratio": 1e-5, "max_iter": 300},
    "SCS": {"eps_abs": 1e-7, "eps_rel": 1e-7, "max_iters": 50_000},
}


def solve_conic(prog: ConicProgram | cp.Problem, solvers: tuple[str, ...] = ("CLARABEL", "SCS"),
                verbose: bool = False) -> SolveResult:
    """Solve a conic program, normalizing solver statuses.

    Tries the solvers in order; moves on when a solver errors out or reports
    failure (an *infeasible* verdict is a result, not a failure).  A merely
    *inaccurate* result is kept as a fallback while the remaining solvers get
    a chance at an accurate one; if none deliver, the inaccurate variable
    values are restored and returned.
    """
    problem = prog.problem if isinstance(prog, ConicProgram) else prog
    last_detail = ""
    fallback: SolveResult | None = None
    snapshot: dict[int, np.ndarray | None] = {}
    for name in solvers:
        t0 = time.perf_counter()
        try:
            problem.solve(solver=name, verbose=verbose, **_SOLVER_OPTS.get(name, {}))
        except Exception as exc:  # noqa: BLE001 - solver backends raise freely
            last_detail = f"{name}: {exc!r}"
            continue
        elapsed = time.perf_counter() - t0
        status = _normalize_status(problem.status)
        if status == STATUS_FAILURE:
            last_detail = f"{name}: status {problem.status!r}"
            continue
        value = problem.value if problem.value is not None else math.nan
        if status == STATUS_INACCURATE:
            if fallback is None:
                fallback = SolveResult(status, float(value), elapsed, name)
                snapshot = {var.id: (None if var.value is None
                                     else np.array(var.value))
                            for var in problem.variables()}
            last_detail = f"{name}: status {problem.status!r}"
            continue
        if status == STATUS_INFEASIBLE and fallback is not None:
            break  # another solver already produced a near-solution; trust it
        return SolveResult(status, float(value), elapsed, name)
    if fallback is not None:
        for var in problem.variables():
            if var.id in snapshot:
                var.value = snapshot[var.id]
        return fallback
    return SolveResult(STATUS_FAILURE, math.nan, 0.0, solvers[-1], last_detail)


# ---------------------------------------------------------------------------
# shared scalar derivations
# ---------------------------------------------------------------------------


def radar_duty(cfg: ScenarioConfig) -> float:
    """Fraction of a slot spent transmitting pulses: N_s * t_p / delta_t."""
    return cfg.n_rounds * cfg.radar.t_p / cfg.delta_t


def radar_power_cap(cfg: ScenarioConfig) -> float:
    """Peak pulse power whose duty-cycled average meets the slot budget."""
    return cfg.P_max / radar_duty(cfg)


def rate_cap(cfg: ScenarioConfig) -> float:
    """Loose upper bound on any single-slot user rate (used to gate the
    per-slot rate credit by the sensing indicators)."""
    best = cfg.P_max * cfg.M * cfg.beta0 ** 2 / (cfg.sigma2_k * cfg.H ** 2)
    return math.log2(1.0 + best) + 2.0


def offload_bits(cfg: ScenarioConfig) -> float:
    """Bits/s/Hz the backhaul must carry while sensing: iota * R_Pr."""
    return cfg.iota * budget_from_config(cfg).R_pr


def sinr_expansion_cap(cfg: ScenarioConfig) -> float:
    """Largest SINR worth representing in a surrogate expansion point.

    Twice the per-slot rate the average requirement could ever demand (all
    of it squeezed into the fewest possible communication slots), plus two
    bits of margin.  Incumbent SINRs above this buy no feasibility — the
    rate rows saturate long before — while their squares enter the bilinear
    surrogate constants and can dominate every other coefficient.  The
    majorization holds at any expansion point, so clipping is safe.
    """
    r_need = float(np.max(cfg.R_min_rate, initial=0.0))
    comm_slots = max(cfg.N - cfg.E * cfg.N_s_max, 1)
    return 2.0 ** (2.0 * r_need * cfg.N / comm_slots + 2.0) - 1.0


def area_diag_sq(cfg: ScenarioConfig) -> float:
    """Squared diagonal of the bounding box of every site in the scenario."""
    pts = np.vstack([
        cfg.user_pos, cfg.target_pos, cfg.bs_pos[None, :],
        cfg.q_start[None, :], cfg.q_final[None, :],
    ])
    span = pts.max(axis=0) - pts.min(axis=0)
    return float(span @ span)


def offload_big_m(cfg: ScenarioConfig) -> float:
    """Deactivation constant for the backhaul distance ball on non-sensing
    slots: large enough that the ball covers the whole operating area at the
    smallest admissible offload power."""
    denom = (2.0 ** offload_bits(cfg) - 1.0)
    ball_floor = cfg.solver.big_M_scale * (area_diag_sq(cfg) + cfg.H_b ** 2)
    return ball_floor * cfg.sigma2_B / (cfg.solver.p_off_min * cfg.beta0 ** 2 * cfg.G_T * denom)


def boresight_gain(cfg: ScenarioConfig, beam: SensingBeam) -> float:
    a0 = steering_vector_angle(0.0, cfg.M, cfg.radar.antenna_spacing, cfg.radar.wavelength)
    return beam_gain(beam.R_d, a0)


def c3_coefficients(cfg: ScenarioConfig, beam: SensingBeam, q: np.ndarray) -> np.ndarray:
    """Accumulated-SNR coefficient per (target, slot) and per watt of pulse
    power, with the array response taken at the design angle (the schedule
    penalty pins sensing slots over the target, where the true response
    coincides with the boresight)."""
    duty = radar_duty(cfg)
    gain = boresight_gain(cfg, beam)
    beta_sq = cfg.beta0 ** 2
    coef = np.empty((cfg.E, cfg.N))
    for e in range(cfg.E):
        psi_sq = np.sum((q - cfg.target_pos[e][None, :]) ** 2, axis=1) + cfg.H ** 2
        coef[e] = (cfg.rcs[e] * beta_sq ** 2 * duty * cfg.M * gain
                   / (16.0 * math.pi * psi_sq ** 2 * cfg.sigma2_e))
    return coef


@dataclass
class Trajectory:
    """Positions, velocities and the induced-power factor per slot."""

    q: np.ndarray  # (N, 2)
    v: np.ndarray  # (N, 2)
    y: np.ndarray  # (N,)

    def copy(self) -> "Trajectory":
        return Trajectory(self.q.copy(), self.v.copy(), self.y.copy())


# ---------------------------------------------------------------------------
# SP1: resource allocation at a fixed trajectory
# ---------------------------------------------------------------------------


# slack that releases the sensing-slot SINR floor on slots whose indicator is
# (near) zero; sized in noise-normalized SINR units
SENSING_SINR_RELEASE = 1.0e4

# fraction of a pinned cruise speed the linearized lower bound concedes, so
# the heading can rotate by ~acos(1 - HEADING_SLACK) per trajectory pass
HEADING_SLACK = 1.0e-3


def build_sp1(cfg: ScenarioConfig, beam: SensingBeam,
              zf_comm: bool = False) -> ConicProgram:
    """Compile the resource-allocation subproblem.

    Variable keys: W [k][n] (hermitian M x M), credit (K,N), p_rad (N,),
    p_rad_t (E,N), p_off (N,), p_off_t (E,N), alpha (E,N), mu (K,N),
    phi (K,N), mu_ke [e] (K,N), t (K,N).  Blocks whose dimension is zero
    (no users, or no targets) are omitted along with their constraints.
    ``zf_comm`` pins every covariance to a fixed rank-one direction (the
    per-slot zero-forcing beamformers, loaded as parameters) so that only
    the per-user powers ``p_zf`` (K,N) remain free.

    Parameter keys: A [k][n] (slot-scaled user-response outer products),
    wscale (N,), mu_t/phi_t/c2a_const (K,N), mu_ke_t/c2d_const/f_slope/f_icpt
    [e] (K,N), c3 (E,N), bh_gain (E,N), c5_cap (N,), pen_lin/hover_pen/
    alpha_lb/alpha_ub (E,N), pen_const/aero_base (scalars), aero_lin (E,N).

    Scaling: the covariance variables carry per-slot normalized units, watts
    divided by ``wscale[n]`` (a per-slot noise reference); the response outer
    products fold the remaining noise ratio in, so every SINR row has O(1)
    coefficients regardless of the raw channel gains.

    The indicator-times-covariance products enter through trace-level big-M
    envelopes (``credit`` tracks ``sum_e alpha * Tr(W)`` in watts) rather
    than per-pair matrix inequalities: the two coincide wherever the
    indicators are binary, which the penalty drives them to, and the scalar
    form keeps the semidefinite block count at K*N instead of (1+4E)*K*N.
    """
    K, E, N, M = cfg.K, cfg.E, cfg.N, cfg.M
    duty = radar_duty(cfg)
    p_cap = radar_power_cap(cfg)
    p_loc = local_power(cfg.hw_const_a, cfg.f_loc)
    bits = offload_bits(cfg)
    t_cap = rate_cap(cfg)
    cred_cap = cfg.P_max  # amplifier-level cap backing the credit envelope

    cons: list[cp.Constraint] = []
    variables: dict[str, Any] = {}
    parameters: dict[str, Any] = {}

    # -- sensing schedule -------------------------------------------------
    if E:
        alpha = cp.Variable((E, N), name="alpha")
        alpha_lb_p = cp.Parameter((E, N), name="alpha_lb")
        alpha_ub_p = cp.Parameter((E, N), name="alpha_ub")
        occ = cp.sum(alpha, axis=0)  # slot occupancy, the complement of the
        cons.append(occ <= 1.0)      # communication weight 1 - sum_e alpha
        cons.append(cp.sum(alpha, axis=1) <= cfg.N_s_max)
        cons.append(alpha >= alpha_lb_p)
        cons.append(alpha <= alpha_ub_p)
        variables["alpha"] = alpha
        parameters.update(alpha_lb=alpha_lb_p, alpha_ub=alpha_ub_p)
    else:
        alpha = None
        occ = None

    # -- communication covariances and SINR epigraphs ----------------------
    if K:
        W = [[cp.Variable((M, M), hermitian=True, name=f"W_{k}_{n}") for n in range(N)]
             for k in range(K)]
        mu = cp.Variable((K, N), nonneg=True, name="mu")
        phi = cp.Variable((K, N), nonneg=True, name="phi")
        t = cp.Variable((K, N), name="t")
        A = [[cp.Parameter((M, M), hermitian=True, name=f"A_{k}_{n}") for n in range(N)]
             for k in range(K)]
        wscale_p = cp.Parameter(N, nonneg=True, name="wscale")
        mu_t_p = cp.Parameter((K, N), nonneg=True, name="mu_t")
        phi_t_p = cp.Parameter((K, N), nonneg=True, name="phi_t")
        c2a_const_p = cp.Parameter((K, N), nonneg=True, name="c2a_const")
        variables.update(W=W, mu=mu, phi=phi, t=t)
        parameters.update(A=A, wscale=wscale_p, mu_t=mu_t_p, phi_t=phi_t_p,
                          c2a_const=c2a_const_p)

        if zf_comm:
            zf_dir = [[cp.Parameter((M, M), hermitian=True, name=f"zf_{k}_{n}")
                       for n in range(N)] for k in range(K)]
            p_zf = cp.Variable((K, N), nonneg=True, name="p_zf")
            variables["p_zf"] = p_zf
            parameters["zf_dir"] = zf_dir
            for k in range(K):
                for n in range(N):
                    cons.append(W[k][n] == p_zf[k, n] * zf_dir[k][n])

        # watt-valued traces per (user, slot); the covariances themselves live
        # in slot-normalized units
        tr_watt = [cp.hstack([wscale_p[n] * cp.real(cp.trace(W[k][n]))
                              for n in range(N)]) for k in range(K)]

        # numerator lower bound via the bilinear surrogate; interference plus
        # noise upper bound phi (noise-normalized, so the noise term is 1)
        for k in range(K):
            cons.append(tr_watt[k] <= cred_cap)
            for n in range(N):
                cons.append(W[k][n] >> 0)
                sig = cp.real(cp.trace(W[k][n] @ A[k][n]))
                cons.append(sig >= 0.5 * cp.square(mu[k, n] + phi[k, n])
                            - mu_t_p[k, n] * mu[k, n] - phi_t_p[k, n] * phi[k, n]
                            + c2a_const_p[k, n])
                interf = [cp.real(cp.trace(W[i][n] @ A[k][n])) for i in range(K) if i != k]
                if interf:
                    cons.append(cp.sum(interf) + 1.0 <= phi[k, n])
                else:
                    cons.append(phi[k, n] >= 1.0)

        # per-slot rate credit, gated so sensing slots earn none
        cons.append(t <= cp.log1p(mu) / LN2)
        if E:
            for k in range(K):
                cons.append(t[k, :] <= t_cap * (1.0 - occ))
        else:
            cons.append(t <= t_cap)

    # -- indicator-product terms (pulse, offload, credited comm power) ------
    if E:
        p_rad = cp.Variable(N, nonneg=True, name="p_rad")
        p_rad_t = cp.Variable((E, N), nonneg=True, name="p_rad_t")
        p_off = cp.Variable(N, name="p_off")
        p_off_t = cp.Variable((E, N), nonneg=True, name="p_off_t")
        variables.update(p_rad=p_rad, p_rad_t=p_rad_t, p_off=p_off, p_off_t=p_off_t)
        for e in range(E):
            cons.append(p_off_t[e, :] <= cfg.P_max * alpha[e, :])
            cons.append(p_off_t[e, :] <= p_off)
            cons.append(p_off_t[e, :] >= p_off - (1.0 - alpha[e, :]) * cfg.P_max)
            cons.append(p_rad_t[e, :] <= p_cap * alpha[e, :])
            cons.append(p_rad_t[e, :] <= p_rad)
            cons.append(p_rad_t[e, :] >= p_rad - (1.0 - alpha[e, :]) * p_cap)
        cons.append(p_rad <= p_cap)
        cons.append(p_off >= cfg.solver.p_off_min)
        cons.append(p_off <= cfg.P_max)

        # accumulated sensing SNR per target
        c3_p = cp.Parameter((E, N), nonneg=True, name="c3")
        cons.append(cp.sum(cp.multiply(c3_p, p_rad_t), axis=1) >= cfg.SNR_th)
        parameters["c3"] = c3_p

        # offload link sustains the compressed echo stream while sensing
        bh_gain_p = cp.Parameter((E, N), nonneg=True, name="bh_gain")
        cons.append(cp.log1p(cp.multiply(bh_gain_p, p_off_t)) / LN2 >= bits * alpha)
        parameters["bh_gain"] = bh_gain_p

    if E and K:
        # credited communication power on sensing slots (watts)
        credit = cp.Variable((K, N), nonneg=True, name="credit")
        variables["credit"] = credit
        for k in range(K):
            cons.append(credit[k, :] <= tr_watt[k])
            cons.append(credit[k, :] <= cred_cap * occ)
            cons.append(credit[k, :] >= tr_watt[k] - cred_cap * (1.0 - occ))

        # sensing-slot SINR floors feeding the rate correction, released by a
        # big-M slack wherever the slot is not spent on that target
        mu_ke = [cp.Variable((K, N), nonneg=True, name=f"mu_ke_{e}") for e in range(E)]
        mu_ke_t_p = [cp.Parameter((K, N), nonneg=True, name=f"mu_ke_t_{e}") for e in range(E)]
        c2d_const_p = [cp.Parameter((K, N), nonneg=True, name=f"c2d_const_{e}") for e in range(E)]
        f_slope_p = [cp.Parameter((K, N), nonneg=True, name=f"f_slope_{e}") for e in range(E)]
        f_icpt_p = [cp.Parameter((K, N), nonneg=True, name=f"f_icpt_{e}") for e in range(E)]
        variables["mu_ke"] = mu_ke
        parameters.update(mu_ke_t=mu_ke_t_p, c2d_const=c2d_const_p,
                          f_slope=f_slope_p, f_icpt=f_icpt_p)
        for e in range(E):
            for k in range(K):
                for n in range(N):
                    sig = cp.real(cp.trace(W[k][n] @ A[k][n]))
                    cons.append(
                        sig + SENSING_SINR_RELEASE * (1.0 - alpha[e, n])
                        >= 0.5 * cp.square(mu_ke[e][k, n] + phi[k, n])
                        - mu_ke_t_p[e][k, n] * mu_ke[e][k, n]
                        - phi_t_p[k, n] * phi[k, n] + c2d_const_p[e][k, n])

        # feeder downlink leaves room for the relayed user rates off sensing
        # slots
        c5_cap_p = cp.Parameter(N, nonneg=True, name="c5_cap")
        cons.append(c5_cap_p >= float(np.sum(cfg.R_min_rate)) * (1.0 - occ))
        parameters["c5_cap"] = c5_cap_p

    # -- average rate with the linearized sensing-slot correction -----------
    if K:
        mean_t = cp.sum(t, axis=1) / N
        if E:
            corr = sum(cp.sum(cp.multiply(f_slope_p[e], mu_ke[e]) + f_icpt_p[e], axis=1)
                       for e in range(E))
            cons.append(mean_t - corr / N >= cfg.R_min_rate)
        else:
            cons.append(mean_t >= cfg.R_min_rate)

    # -- per-slot power budget ---------------------------------------------
    for n in range(N):
        budget = []
        if K:
            budget.append(sum(tr_watt[k][n] for k in range(K)))
        if E and K:
            budget.append(-cp.sum(credit[:, n]))
        if E:
            budget.append(duty * cp.sum(p_rad_t[:, n]))
            budget.append(cp.sum(p_off_t[:, n]))
        if budget:
            cons.append(sum(budget) <= cfg.P_max)

    # -- objective ----------------------------------------------------------
    aero_base_p = cp.Parameter(nonneg=True, name="aero_base")
    parameters["aero_base"] = aero_base_p
    objective = aero_base_p + 0.0
    if K:
        comm_power = sum(cp.sum(tr_watt[k]) for k in range(K))
        objective = objective + cfg.eta * comm_power / N
    if E:
        aero_lin_p = cp.Parameter((E, N), name="aero_lin")
        pen_lin_p = cp.Parameter((E, N), name="pen_lin")
        pen_const_p = cp.Parameter(nonneg=True, name="pen_const")
        hover_pen_p = cp.Parameter((E, N), nonneg=True, name="hover_pen")
        parameters.update(aero_lin=aero_lin_p, pen_lin=pen_lin_p,
                          pen_const=pen_const_p, hover_pen=hover_pen_p)
        objective = (
            objective
            + cfg.eta * duty * cp.sum(p_rad) / N
            + cp.sum(cp.multiply(aero_lin_p, alpha))
            + (p_loc / N) * cp.sum(alpha)
            + cp.sum(p_off_t) / N
            + cp.sum(cp.multiply(pen_lin_p, alpha)) + pen_const_p
            + cp.sum(cp.multiply(hover_pen_p, alpha))
        )

    problem = cp.Problem(cp.Minimize(objective), cons)
    return ConicProgram(problem, variables, parameters, {"kind": "sp1"})


def _hermitianize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


def sp1_set_params(prog: ConicProgram, cfg: ScenarioConfig, beam: SensingBeam,
                   traj: Trajectory, alpha_t: np.ndarray,
                   mu_t: np.ndarray, phi_t: np.ndarray, mu_ke_t: np.ndarray,
                   alpha_lb: np.ndarray | None = None,
                   alpha_ub: np.ndarray | None = None) -> None:
    """Load one iteration's data: steering outer products and noise at the
    fixed trajectory, SCA expansion points, penalty linearization, and the
    (optionally pinned) indicator box."""
    K, E, N = cfg.K, cfg.E, cfg.N
    p = prog.parameters
    q = traj.q
    spacing, wl = cfg.radar.antenna_spacing, cfg.radar.wavelength

    if K:
        noise = np.empty((K, N))
        steer = np.empty((K, N, cfg.M), dtype=complex)
        for k in range(K):
            for n in range(N):
                steer[k, n] = steering_vector(q[n], cfg.user_pos[k], cfg.H, cfg.M,
                                              spacing, wl)
                noise[k, n] = cfg.sigma2_k * (float(np.sum((q[n] - cfg.user_pos[k]) ** 2))
                                              + cfg.H ** 2) / cfg.beta0 ** 2
        # per-slot covariance scale: the mean noise over users, so that the
        # response products keep O(1) entries (only the bounded user-to-user
        # noise ratio remains in them)
        ref = noise.mean(axis=0)
        prog.meta["wscale"] = ref
        p["wscale"].value = ref
        for k in range(K):
            for n in range(N):
                outer = np.outer(steer[k, n], steer[k, n].conj())
                p["A"][k][n].value = _hermitianize(outer * (ref[n] / noise[k, n]))

        mu_t = np.maximum(np.asarray(mu_t, dtype=float), 0.0)
        phi_t = np.maximum(np.asarray(phi_t, dtype=float), 1.0)
        p["mu_t"].value = mu_t
        p["phi_t"].value = phi_t
        p["c2a_const"].value = 0.5 * (mu_t ** 2 + phi_t ** 2)

        if "zf_dir" in p:
            for n in range(N):
                dirs = zf_directions(q[n], cfg)
                for k in range(K):
                    outer = np.outer(dirs[k], dirs[k].conj())
                    p["zf_dir"][k][n].value = _hermitianize(outer)

    if K and E:
        mu_ke_t = np.maximum(np.asarray(mu_ke_t, dtype=float), 0.0)
        for e in range(E):
            mke = mu_ke_t[:, e, :]
            p["mu_ke_t"][e].value = mke
            p["c2d_const"][e].value = 0.5 * (mke ** 2 + phi_t ** 2)
            p["f_slope"][e].value = 1.0 / ((1.0 + mke) * LN2)
            p["f_icpt"][e].value = np.log2(1.0 + mke) - mke / ((1.0 + mke) * LN2)
        lam_sq = np.array([backhaul_gain(q[n], cfg.bs_pos, cfg.H_b, cfg.beta0, cfg.G_T) ** 2
                           for n in range(N)])
        p["c5_cap"].value = np.log2(1.0 + cfg.p_BS * lam_sq / cfg.sigma2_U)

    if E:
        p["c3"].value = c3_coefficients(cfg, beam, q)
        lam_sq = np.array([backhaul_gain(q[n], cfg.bs_pos, cfg.H_b, cfg.beta0, cfg.G_T) ** 2
                           for n in range(N)])
        p["bh_gain"].value = np.tile(lam_sq / cfg.sigma2_B, (E, 1))

        alpha_t = np.clip(np.asarray(alpha_t, dtype=float), 0.0, 1.0)
        tau1, tau2 = cfg.solver.tau1, cfg.solver.tau2
        p["pen_lin"].value = tau1 * (1.0 - 2.0 * alpha_t)
        p["pen_const"].value = tau1 * float(np.sum(alpha_t ** 2))
        hover = np.empty((E, N))
        for e in range(E):
            hover[e] = tau2 * np.sum((q - cfg.target_pos[e][None, :]) ** 2, axis=1)
        p["hover_pen"].value = hover

        p["alpha_lb"].value = (np.zeros((E, N)) if alpha_lb is None
                               else np.asarray(alpha_lb, float))
        p["alpha_ub"].value = (np.ones((E, N)) if alpha_ub is None
                               else np.asarray(alpha_ub, float))

    # at a fixed trajectory the aero power is exactly affine in the indicator
    # column sums: p_fly(v_n) + sum_e alpha_en * (p_hover - p_fly(v_n))
    aero = cfg.aero or AeroParams()
    fly_t = np.array([p_fly(traj.v[n], aero) for n in range(N)])
    p["aero_base"].value = float(np.sum(fly_t)) / N + cfg.M * cfg.P_static
    if E:
        p["aero_lin"].value = np.tile((p_hover(aero) - fly_t) / N, (E, 1))


def sp1_extract(prog: ConicProgram, cfg: ScenarioConfig) -> tuple[RAState, np.ndarray]:
    """Pull the solved resource allocation into dense arrays.

    The indicator-times-covariance products are materialized as
    ``alpha[e, n] * W[k, n]``, the value their envelopes pin down wherever
    the indicators are binary.
    """
    K, E, N, M = cfg.K, cfg.E, cfg.N, cfg.M
    v = prog.variables
    alpha = (np.clip(np.asarray(v["alpha"].value, dtype=float), 0.0, 1.0)
             if E else np.zeros((0, N)))
    wscale = prog.meta.get("wscale", np.ones(N))
    W = np.zeros((K, N, M, M), dtype=complex)
    for k in range(K):
        for n in range(N):
            W[k, n] = wscale[n] * _hermitianize(np.asarray(v["W"][k][n].value))
    Wt = np.zeros((K, E, N, M, M), dtype=complex)
    for e in range(E):
        Wt[:, e, :] = alpha[e][None, :, None, None] * W
    mu_ke = np.zeros((K, E, N))
    if K and E:
        for e in range(E):
            mu_ke[:, e, :] = np.asarray(v["mu_ke"][e].value)
    if E:
        p_rad = np.maximum(np.asarray(v["p_rad"].value, dtype=float), 0.0)
        p_rad_t = np.maximum(np.asarray(v["p_rad_t"].value, dtype=float), 0.0)
        p_off = np.maximum(np.asarray(v["p_off"].value, dtype=float), 0.0)
        p_off_t = np.maximum(np.asarray(v["p_off_t"].value, dtype=float), 0.0)
    else:
        p_rad, p_off = np.zeros(N), np.zeros(N)
        p_rad_t, p_off_t = np.zeros((0, N)), np.zeros((0, N))
    state = RAState(
        W=W, W_tilde=Wt,
        p_rad=p_rad, p_rad_tilde=p_rad_t,
        p_off=p_off, p_off_tilde=p_off_t,
        mu=(np.asarray(v["mu"].value, dtype=float) if K else np.zeros((0, N))),
        mu_ke=mu_ke,
        phi=(np.asarray(v["phi"].value, dtype=float) if K else np.zeros((0, N))),
    )
    return state, alpha


# ---------------------------------------------------------------------------
# SP2: trajectory at fixed resource allocation
# ---------------------------------------------------------------------------


def build_sp2(cfg: ScenarioConfig, directions: np.ndarray | None = None,
              fixed_speed: float | None = None,
              keep_accel: bool = True) -> ConicProgram:
    """Compile the trajectory subproblem.

    Variable keys: q (N,2), v (N,2), y (N,), mu_p (K,N), beta_hat (K,N),
    t2 (K,N).  Parameter keys: w (N,), c2a_const/c2a_gx/c2a_gy (K,N),
    mu_pt/quad_const/relax (K,N), int_const/int_gx/int_gy/noise_scale (K,N),
    rate_rhs (K,), ball4 (N,), ball5 (N,), hover_w (E,N), g_y/g_vx/g_vy/g_c
    (N,), obj_const (scalar).  Blocks whose dimension is zero are omitted.

    The comparison schemes restrict the kinematics: ``directions`` pins every
    velocity to a fixed unit heading (variable ``s`` holds the speeds, and a
    zero row forces a standstill), ``fixed_speed`` holds the speed at a
    constant on every non-sensing slot (lower bound linearized around the
    incumbent heading parameter ``u_t``, released where the gate closes),
    and ``keep_accel=False`` drops the acceleration limit.
    """
    K, E, N = cfg.K, cfg.E, cfg.N
    aero = cfg.aero or AeroParams()
    t_cap = rate_cap(cfg)

    q = cp.Variable((N, 2), name="q")
    v = cp.Variable((N, 2), name="v")
    y = cp.Variable(N, name="y")

    w_p = cp.Parameter(N, nonneg=True, name="w")
    ball4_p = cp.Parameter(N, nonneg=True, name="ball4")
    ball5_p = cp.Parameter(N, nonneg=True, name="ball5")
    g_y_p = cp.Parameter(N, nonneg=True, name="g_y")
    g_vx_p = cp.Parameter(N, name="g_vx")
    g_vy_p = cp.Parameter(N, name="g_vy")
    g_c_p = cp.Parameter(N, name="g_c")
    obj_const_p = cp.Parameter(name="obj_const")
    variables: dict[str, Any] = {"q": q, "v": v, "y": y}
    parameters: dict[str, Any] = {"w": w_p, "ball4": ball4_p, "ball5": ball5_p,
                                  "g_y": g_y_p, "g_vx": g_vx_p, "g_vy": g_vy_p,
                                  "g_c": g_c_p, "obj_const": obj_const_p}

    cons: list[cp.Constraint] = []

    # dynamics, kinematic limits, endpoint pins; motion is gated off on
    # sensing slots through the fixed weights w = 1 - sum_e alpha
    dt = cfg.delta_t
    for axis in range(2):
        cons.append(q[1:, axis] - q[:-1, axis]
                    == dt * cp.multiply(w_p[:-1], v[:-1, axis]))
    if keep_accel:
        cons.append(cp.norm(v[1:, :] - v[:-1, :], 2, axis=1) <= cfg.a_max * dt)
    cons.append(cp.norm(v, 2, axis=1) <= cfg.v_max * w_p)
    cons.append(q[0, :] == cfg.q_start)
    cons.append(q[N - 1, :] == cfg.q_final)

    if directions is not None:
        u = np.asarray(directions, dtype=float)
        s = cp.Variable(N, nonneg=True, name="s")
        variables["s"] = s
        cons.append(s <= cfg.v_max)
        for axis in range(2):
            cons.append(v[:, axis] == cp.multiply(u[:, axis], s))
    if fixed_speed is not None:
        u_t_p = cp.Parameter((N, 2), name="u_t")
        parameters["u_t"] = u_t_p
        cons.append(cp.norm(v, 2, axis=1) <= fixed_speed * w_p)
        # linearized ||v|| >= fixed_speed, inactive wherever the gate
        # closes; the fractional slack is what lets the heading rotate
        # between passes — without it the bound meets the speed cap in the
        # single point fixed_speed * u_t and the direction can never move
        cons.append(cp.sum(cp.multiply(u_t_p, v), axis=1)
                    >= fixed_speed * (3.0 * w_p - 2.0 - HEADING_SLACK))

    # induced-power factor: 1/y^2 <= tangent of (y^2 + ||v||^2 / v0^2)
    cons.append(y >= 1e-4)
    cons.append(y <= 1.0)
    g_aff = (cp.multiply(g_y_p, y) + cp.multiply(g_vx_p, v[:, 0])
             + cp.multiply(g_vy_p, v[:, 1]) + g_c_p)
    cons.append(cp.square(cp.inv_pos(y)) <= g_aff)

    # SINR epigraphs in incumbent-scaled units: the affine numerator bound
    # comes from the linearized array-response trace terms, the denominator
    # collects linearized interference plus the exact convex distance noise
    if K:
        mu_p = cp.Variable((K, N), nonneg=True, name="mu_p")
        beta_hat = cp.Variable((K, N), nonneg=True, name="beta_hat")
        t2 = cp.Variable((K, N), name="t2")
        c2a_const_p = cp.Parameter((K, N), name="c2a_const")
        c2a_gx_p = cp.Parameter((K, N), name="c2a_gx")
        c2a_gy_p = cp.Parameter((K, N), name="c2a_gy")
        mu_pt_p = cp.Parameter((K, N), nonneg=True, name="mu_pt")
        quad_const_p = cp.Parameter((K, N), nonneg=True, name="quad_const")
        relax_p = cp.Parameter((K, N), nonneg=True, name="relax")
        int_const_p = cp.Parameter((K, N), name="int_const")
        int_gx_p = cp.Parameter((K, N), name="int_gx")
        int_gy_p = cp.Parameter((K, N), name="int_gy")
        noise_scale_p = cp.Parameter((K, N), nonneg=True, name="noise_scale")
        rate_rhs_p = cp.Parameter(K, name="rate_rhs")
        variables.update(mu_p=mu_p, beta_hat=beta_hat, t2=t2)
        parameters.update(c2a_const=c2a_const_p, c2a_gx=c2a_gx_p, c2a_gy=c2a_gy_p,
                          mu_pt=mu_pt_p, quad_const=quad_const_p, relax=relax_p,
                          int_const=int_const_p, int_gx=int_gx_p, int_gy=int_gy_p,
                          noise_scale=noise_scale_p, rate_rhs=rate_rhs_p)
        for k in range(K):
            num = (c2a_const_p[k, :] + cp.multiply(c2a_gx_p[k, :], q[:, 0])
                   + cp.multiply(c2a_gy_p[k, :], q[:, 1]) + relax_p[k, :])
            cons.append(num >= 0.5 * cp.square(mu_p[k, :] + beta_hat[k, :])
                        - cp.multiply(mu_pt_p[k, :], mu_p[k, :]) - beta_hat[k, :]
                        + quad_const_p[k, :])
            d_k = cfg.user_pos[k]
            dist_sq = cp.sum(cp.square(q - d_k[None, :]), axis=1) + cfg.H ** 2
            den = (int_const_p[k, :] + cp.multiply(int_gx_p[k, :], q[:, 0])
                   + cp.multiply(int_gy_p[k, :], q[:, 1])
                   + cp.multiply(noise_scale_p[k, :], dist_sq))
            cons.append(den <= beta_hat[k, :])

        # weighted average rate held at the incumbent-capped requirement
        cons.append(t2 <= cp.log1p(mu_p) / LN2)
        cons.append(t2 <= t_cap)
        for k in range(K):
            cons.append(cp.sum(cp.multiply(w_p, t2[k, :])) / N >= rate_rhs_p[k])

    # backhaul distance balls: offload while sensing, feeder link otherwise
    bs_sq = cp.sum(cp.square(q - cfg.bs_pos[None, :]), axis=1) + cfg.H_b ** 2
    cons.append(bs_sq <= ball4_p)
    cons.append(bs_sq <= ball5_p)

    # moving aero power: profile + induced + parasite, weighted by w
    speed_sq = cp.sum(cp.square(v), axis=1)
    speed = cp.norm(v, 2, axis=1)
    profile = 3.0 * aero.P_o / aero.tip_speed_sq
    if aero.model_mode == "paper_literal":
        fly = (profile * cp.multiply(w_p, speed_sq)
               + aero.P_i * (cp.multiply(w_p, y) - w_p)
               + aero.drag_coeff * cp.multiply(w_p, cp.power(speed, 3)))
    else:
        fly = (aero.P_o * w_p + profile * cp.multiply(w_p, speed_sq)
               + aero.P_i * cp.multiply(w_p, y)
               + aero.drag_coeff * cp.multiply(w_p, cp.power(speed, 3)))

    hover_pen = 0
    if E:
        hover_w_p = cp.Parameter((E, N), nonneg=True, name="hover_w")
        parameters["hover_w"] = hover_w_p
        for e in range(E):
            d_e = cfg.target_pos[e]
            hover_pen = hover_pen + cp.sum(
                cp.multiply(hover_w_p[e, :], cp.sum(cp.square(q - d_e[None, :]), axis=1)))

    objective = obj_const_p + cp.sum(fly) / N + hover_pen
    problem = cp.Problem(cp.Minimize(objective), cons)
    return ConicProgram(problem, variables, parameters, {"kind": "sp2"})


def sp2_set_params(prog: ConicProgram, cfg: ScenarioConfig, state: RAState,
                   alpha: np.ndarray, traj: Trajectory,
                   w_floor: float = 1e-6, relax_big: float = 1e4) -> None:
    """Load one iteration's data from the fixed resource allocation and the
    incumbent trajectory (the SCA expansion point)."""
    K, E, N = cfg.K, cfg.E, cfg.N
    p = prog.parameters
    alpha = np.clip(np.asarray(alpha, dtype=float), 0.0, 1.0)
    w = np.clip(1.0 - alpha.sum(axis=0), 0.0, 1.0)
    p["w"].value = w

    q_t, v_t = traj.q, traj.v
    y_t = np.array([float(yy) for yy in traj.y])

    if K:
        # linearized array-response trace terms, every covariance measured at
        # every victim user's channel: term[k, i] is transmitter i seen by k
        U = np.empty((K, K, N))
        J = np.empty((K, K, N))
        G = np.empty((K, K, N, 2))
        for k in range(K):
            for i in range(K):
                for n in range(N):
                    u_v, j_v = trace_term_J(state.W[i, n], q_t[n],
                                            cfg.user_pos[k], cfg)
                    U[k, i, n], J[k, i, n] = u_v, j_v
                    G[k, i, n] = trace_term_gradient(state.W[i, n], q_t[n],
                                                     cfg.user_pos[k], cfg)

        dist_sq = np.empty((K, N))
        for k in range(K):
            dist_sq[k] = np.sum((q_t - cfg.user_pos[k][None, :]) ** 2, axis=1) + cfg.H ** 2

        term = U + J
        sig = np.stack([term[k, k] for k in range(K)])
        interf = term.sum(axis=1) - term[np.arange(K), np.arange(K)]
        noise = cfg.sigma2_k * dist_sq
        scale = interf + noise
        mu_pt = np.minimum(np.maximum(sig / scale, 0.0), sinr_expansion_cap(cfg))

        c2a_const = np.empty((K, N))
        c2a_g = np.empty((K, N, 2))
        int_const = np.empty((K, N))
        int_g = np.empty((K, N, 2))
        for k in range(K):
            for n in range(N):
                s = scale[k, n]
                c2a_g[k, n] = G[k, k, n] / s
                c2a_const[k, n] = (term[k, k, n] - G[k, k, n] @ q_t[n]) / s
                g_sum = np.zeros(2)
                c_sum = 0.0
                for i in range(K):
                    if i == k:
                        continue
                    g_sum += G[k, i, n]
                    c_sum += term[k, i, n] - G[k, i, n] @ q_t[n]
                int_g[k, n] = g_sum / s
                int_const[k, n] = c_sum / s
        p["c2a_const"].value = c2a_const
        p["c2a_gx"].value = c2a_g[:, :, 0]
        p["c2a_gy"].value = c2a_g[:, :, 1]
        p["mu_pt"].value = mu_pt
        p["quad_const"].value = 0.5 * (mu_pt ** 2 + 1.0)
        p["relax"].value = np.where(w[None, :] <= w_floor, relax_big, 0.0) * np.ones((K, 1))
        p["int_const"].value = int_const
        p["int_gx"].value = int_g[:, :, 0]
        p["int_gy"].value = int_g[:, :, 1]
        p["noise_scale"].value = cfg.sigma2_k / scale

        # keep whatever weighted rate the incumbent actually achieves, up to
        # the requirement (never ask the trajectory step for more than it
        # inherited)
        rates = np.log2(1.0 + mu_pt)
        achieved = (w[None, :] * rates).sum(axis=1) / N
        p["rate_rhs"].value = np.minimum(cfg.R_min_rate, achieved * (1.0 - 1e-9))

    # backhaul distance balls from the fixed offload/indicator data; both are
    # capped at the deactivation radius (anything that already covers the
    # whole operating area is equivalent), which keeps parameter magnitudes
    # near the squared-distance scale
    bits = offload_bits(cfg)
    denom = 2.0 ** bits - 1.0
    big_m = offload_big_m(cfg)
    chan = cfg.beta0 ** 2 * cfg.G_T / cfg.sigma2_B
    ball_floor = cfg.solver.big_M_scale * (area_diag_sq(cfg) + cfg.H_b ** 2)
    ball4 = np.full(N, ball_floor)
    for e in range(E):
        bracket = alpha[e] / denom + (1.0 - alpha[e]) * big_m
        ball4 = np.minimum(ball4, np.asarray(state.p_off) * chan * bracket)
    p["ball4"].value = np.clip(ball4, 0.0, ball_floor)

    req5 = float(np.sum(cfg.R_min_rate)) * w
    feeder = cfg.p_BS * cfg.beta0 ** 2 * cfg.G_T / cfg.sigma2_U
    den5 = 2.0 ** np.maximum(req5, 1e-9) - 1.0
    ball5 = np.where(req5 > 1e-9, feeder / den5, ball_floor)
    p["ball5"].value = np.clip(ball5, 0.0, ball_floor)

    if E:
        p["hover_w"].value = cfg.solver.tau2 * alpha

    # tangent of the convex side of the induced-power identity
    v0_sq = (cfg.aero or AeroParams()).v0 ** 2
    p["g_y"].value = 2.0 * y_t
    p["g_vx"].value = 2.0 * v_t[:, 0] / v0_sq
    p["g_vy"].value = 2.0 * v_t[:, 1] / v0_sq
    p["g_c"].value = -(y_t ** 2) - np.sum(v_t ** 2, axis=1) / v0_sq

    if "u_t" in p:
        # unit headings for the fixed-speed lower bound: the incumbent
        # velocity where it moves, otherwise point at the mission end
        u = np.zeros((N, 2))
        for n in range(N):
            speed = float(np.linalg.norm(v_t[n]))
            if speed > 1e-9:
                u[n] = v_t[n] / speed
            else:
                d = cfg.q_final - q_t[n]
                dist = float(np.linalg.norm(d))
                u[n] = d / dist if dist > 1e-9 else np.array([1.0, 0.0])
        p["u_t"].value = u

    # constants of the full objective that SP2 does not touch: transmit and
    # static power, compression and offload power, hover aero power, and the
    # binary penalty at the fixed indicators
    aero = cfg.aero or AeroParams()
    duty = radar_duty(cfg)
    p_loc = local_power(cfg.hw_const_a, cfg.f_loc)
    comm_power = float(np.real(np.trace(state.W.sum(axis=(0, 1)))))
    const = cfg.eta * (comm_power + duty * float(np.sum(state.p_rad))) / N
    const += cfg.M * cfg.P_static
    const += p_loc * float(np.sum(alpha)) / N
    const += float(np.sum(state.p_off_tilde)) / N
    const += p_hover(aero) * float(np.sum(alpha)) / N
    const += cfg.solver.tau1 * float(np.sum(alpha - alpha ** 2))
    p["obj_const"].value = const


def sp2_extract(prog: ConicProgram) -> Trajectory:
    v = prog.variables
    return Trajectory(
        q=np.asarray(v["q"].value, dtype=float),
        v=np.asarray(v["v"].value, dtype=float),
        y=np.asarray(v["y"].value, dtype=float),
    )
