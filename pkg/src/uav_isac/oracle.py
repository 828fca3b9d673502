"""Independent validators: Monte-Carlo echo simulation, schedule brute force,
and finite differences.

Nothing here reuses solver internals: the Monte-Carlo estimator rebuilds the
echo chain (per-round pulses, round-trip channel, receive combining,
selection-MRC across slots) from the physical model, and the schedule
enumerator simply tries every feasible binary sensing pattern.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterator

import numpy as np

from .beampattern import SensingBeam
from .scenario import ScenarioConfig, steering_vector


def mc_echo_snr(q: np.ndarray, d_e: np.ndarray, p_rad, beam: SensingBeam,
                cfg: ScenarioConfig, trials: int, seed: int,
                e: int = 0) -> tuple[float, tuple[float, float]]:
    """Empirical accumulated sensing SNR with a 95% confidence interval.

    ``q`` may be a single position (2,) or a stack (S, 2) of sensing-slot
    positions that are MRC-combined; ``p_rad`` broadcasts likewise.  Each
    trial draws a fresh sensing waveform per slot (shared by that slot's
    rounds, as in the signal model) plus per-round noise, and the SNR is
    estimated as mean signal energy over mean effective noise energy.  The
    paired signal/noise design (noise never contaminates the signal-energy
    term) keeps the estimator unbiased at low SNR.
    """
    if trials < 10_000:
        raise ValueError("need at least 1e4 trials for a stable estimate")
    q = np.atleast_2d(np.asarray(q, float))  # (S, 2)
    S = q.shape[0]
    p_rad = np.broadcast_to(np.asarray(p_rad, float), (S,))
    M = cfg.M
    N_s = cfg.n_rounds
    rng = np.random.default_rng(seed)

    # factor L with R_d = L L^H so s_0 = sqrt(p) L g, g ~ CN(0, I)
    evals, evecs = np.linalg.eigh(beam.R_d)
    L_chol = evecs * np.sqrt(np.clip(evals, 0.0, None))

    signal_energy = np.zeros(trials)
    noise_sq = np.empty((trials, S))
    block = max(1, min(trials, 2 ** 22 // max(N_s, 1)))  # bound memory
    for s in range(S):
        dist_sq = float(np.sum((q[s] - np.asarray(d_e, float)) ** 2))
        psi_sq = dist_sq + cfg.H ** 2
        psi = math.sqrt(psi_sq)
        a = steering_vector(q[s], d_e, cfg.H, M, cfg.radar.antenna_spacing,
                            cfg.radar.wavelength)
        # round-trip amplitude in front of a a^H: reflection * two-way gain
        amp = math.sqrt(cfg.rcs[e] / (4.0 * math.pi * psi_sq)) \
            * cfg.beta0 ** 2 / (2.0 * psi)
        g = (rng.standard_normal((trials, M)) +
             1j * rng.standard_normal((trials, M))) / math.sqrt(2.0)
        s0 = math.sqrt(p_rad[s]) * g @ L_chol.T  # (trials, M)
        # u^H H_e s_0 with u = a/||a||: amp * ||a|| * (a^H s_0)
        proj = s0 @ a.conj()
        r = N_s * math.sqrt(cfg.radar.t_p / cfg.delta_t) \
            * amp * math.sqrt(M) * proj
        signal_energy += np.abs(r) ** 2
        # effective noise: N_s rounds of u^H z, each CN(0, sigma2_e),
        # summed blockwise over trials to keep the (block, N_s) draw bounded
        scale = math.sqrt(cfg.sigma2_e / 2.0)
        for lo in range(0, trials, block):
            hi = min(lo + block, trials)
            re = rng.standard_normal((hi - lo, N_s)).sum(axis=1)
            im = rng.standard_normal((hi - lo, N_s)).sum(axis=1)
            noise_sq[lo:hi, s] = scale ** 2 * (re ** 2 + im ** 2)

    num = signal_energy  # per-trial MRC numerator, sum over slots
    den = noise_sq.mean(axis=1)  # per-trial noise energy scale
    num_mean, den_mean = float(num.mean()), float(den.mean())
    estimate = num_mean / den_mean
    # delta-method variance of a ratio of independent sample means
    var = (np.var(num, ddof=1) / trials) / den_mean ** 2 \
        + num_mean ** 2 * (np.var(den, ddof=1) / trials) / den_mean ** 4
    half = 1.96 * math.sqrt(var)
    return estimate, (estimate - half, estimate + half)


def feasible_alpha_patterns(N: int, E: int,
                            N_s_max: int) -> Iterator[np.ndarray]:
    """All binary schedules with at most one beam per slot and at most
    N_s_max sensing slots per target."""
    # per-slot choice: no sensing (E) or one of the targets (0..E-1)
    for choice in itertools.product(range(E + 1), repeat=N):
        alpha = np.zeros((E, N))
        for n, c in enumerate(choice):
            if c < E:
                alpha[c, n] = 1.0
        if np.all(alpha.sum(axis=1) <= N_s_max):
            yield alpha


def enumerate_alpha(cfg: ScenarioConfig, beam: SensingBeam,
                    **solve_kwargs) -> tuple[float, np.ndarray, int]:
    """Exhaustive search over binary schedules; each candidate is solved to
    convergence with the schedule pinned.

    Returns (best objective, best schedule, number of candidates evaluated).
    Raises RuntimeError when every candidate is infeasible.
    """
    if (cfg.E + 1) ** cfg.N > 2 ** (cfg.N * cfg.E) and cfg.E > 1:
        pass  # bound below is the binding one
    if 2 ** (cfg.N * cfg.E) > 64:
        raise ValueError("instance too large for exhaustive enumeration")
    from .ao_solver import solve_fixed_alpha  # deferred: avoids import cycle

    best_obj, best_alpha, count = math.inf, None, 0
    for alpha in feasible_alpha_patterns(cfg.N, cfg.E, cfg.N_s_max):
        count += 1
        try:
            obj = solve_fixed_alpha(cfg, beam, alpha, **solve_kwargs)
        except RuntimeError:
            continue
        if obj is not None and obj < best_obj:
            best_obj, best_alpha = obj, alpha
    if best_alpha is None:
        raise RuntimeError("all schedules infeasible")
    return best_obj, best_alpha, count


def finite_diff(fn: Callable[[np.ndarray], float], q: np.ndarray,
                h: float) -> np.ndarray:
    """Central-difference gradient of a scalar field over 2-vectors."""
    if h <= 0:
        raise ValueError("step must be positive")
    q = np.asarray(q, float)
    grad = np.zeros(2)
    for i in range(2):
        step = np.zeros(2)
        step[i] = h
        grad[i] = (fn(q + step) - fn(q - step)) / (2.0 * h)
    return grad
