"""Downlink user rates and the two backhaul links (offload up, feed down).

Everything is expressed in covariance form: the downlink transmit covariance
of user k in slot n is W[k, n] (M x M, Hermitian PSD), and channel outer
products enter only through quadratic forms a^H W a, which keeps these
evaluations consistent with the semidefinite solver variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import ScenarioConfig, steering_vector
from .sensing import SensingSchedule


@dataclass
class RAState:
    """Communication-and-sensing block of the design (trajectory lives apart).

    The tilde arrays are the products of the matching quantity with the
    sensing indicator (W_tilde[k, e, n] tracks alpha[e, n] * W[k, n], and so
    on); mu / mu_ke / phi are the auxiliary rate and interference bounds
    carried along for expansion-point bookkeeping between solves.
    """

    W: np.ndarray  # (K, N, M, M) complex
    W_tilde: np.ndarray  # (K, E, N, M, M) complex
    p_rad: np.ndarray  # (N,)
    p_rad_tilde: np.ndarray  # (E, N)
    p_off: np.ndarray  # (N,)
    p_off_tilde: np.ndarray  # (E, N)
    mu: np.ndarray  # (K, N)
    mu_ke: np.ndarray = field(default=None)  # (K, E, N)
    phi: np.ndarray = field(default=None)  # (K, N)

    def __post_init__(self):
        K, N = self.W.shape[0], self.W.shape[1]
        E = self.W_tilde.shape[1]
        if self.mu_ke is None:
            self.mu_ke = np.zeros((K, E, N))
        if self.phi is None:
            self.phi = np.zeros((K, N))
        for name in ("p_rad", "p_rad_tilde", "p_off", "p_off_tilde"):
            if np.any(getattr(self, name) < -1e-9):
                raise ValueError(f"{name} must be nonnegative")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        K, N, M, _ = self.W.shape
        return K, self.W_tilde.shape[1], N, M

    def copy(self) -> "RAState":
        return RAState(**{k: np.array(v) for k, v in self.__dict__.items()})


def user_steering_outer(q: np.ndarray, u_k: np.ndarray,
                        cfg: ScenarioConfig) -> np.ndarray:
    """Outer product A_k = a a^H of the steering vector towards user k."""
    a = steering_vector(q, u_k, cfg.H, cfg.M, cfg.radar.antenna_spacing,
                        cfg.radar.wavelength)
    return np.outer(a, a.conj())


def zf_directions(q_n: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """Unit-norm zero-forcing beam directions for every user at one slot.

    Column k of A (A^H A)^{-1} — A stacking the users' array responses — is
    orthogonal to every other user's response (and therefore to every other
    user's LoS channel, which differs only by a positive scalar).  Returns
    the normalized directions as rows, shape (K, M).  Raises ValueError when
    the responses are (numerically) linearly dependent or K exceeds M: those
    users cannot be separated spatially.
    """
    K, M = cfg.K, cfg.M
    if K > M:
        raise ValueError(f"cannot zero-force {K} users with {M} antennas")
    A = np.stack([
        steering_vector(q_n, cfg.user_pos[k], cfg.H, M,
                        cfg.radar.antenna_spacing, cfg.radar.wavelength)
        for k in range(K)], axis=1)
    gram = A.conj().T @ A
    if np.linalg.cond(gram) > 1e12:
        raise ValueError(
            "user array responses are linearly dependent; zero-forcing is "
            "rank deficient at this position")
    B = A @ np.linalg.inv(gram)
    return (B / np.linalg.norm(B, axis=0, keepdims=True)).T


def sinr(k: int, n: int, W_n: np.ndarray, q_n: np.ndarray,
         cfg: ScenarioConfig) -> float:
    """Downlink SINR of user k in slot n, covariance form.

    The common LoS factor beta0^2 / (dist^2 + H^2) cancels from signal and
    interference, leaving the noise scaled by its inverse.
    """
    A_k = user_steering_outer(q_n, cfg.user_pos[k], cfg)
    signal = float(np.real(np.trace(W_n[k] @ A_k)))
    interference = 0.0
    for i in range(cfg.K):
        if i != k:
            interference += float(np.real(np.trace(W_n[i] @ A_k)))
    dist3_sq = float(np.sum((q_n - cfg.user_pos[k]) ** 2)) + cfg.H ** 2
    noise = cfg.sigma2_k * dist3_sq / cfg.beta0 ** 2
    return max(signal, 0.0) / (interference + noise)


def backhaul_channel_gain_sq(q_n: np.ndarray, cfg: ScenarioConfig) -> float:
    """lambda_1^2: squared singular value of the LoS UAV-BS channel."""
    dist3_sq = float(np.sum((q_n - cfg.bs_pos) ** 2)) + cfg.H_b ** 2
    return cfg.beta0 ** 2 * cfg.G_T / dist3_sq


def uav_to_bs_rate(n: int, alpha_n: float, p_off_n: float, q_n: np.ndarray,
                   cfg: ScenarioConfig) -> float:
    """Offload rate of the UAV->BS link in slot n (zero when not sensing)."""
    if p_off_n < 0:
        raise ValueError("p_off must be nonnegative")
    snr = alpha_n * p_off_n * backhaul_channel_gain_sq(q_n, cfg) / cfg.sigma2_B
    return math.log2(1.0 + snr)


def offload_ok(n: int, alpha_n: float, p_off_n: float, q_n: np.ndarray,
               R_pr: float, cfg: ScenarioConfig, tol: float = 1e-9) -> bool:
    """Echo-stream admissibility: offload rate covers the production rate."""
    required = alpha_n * cfg.iota * R_pr
    return uav_to_bs_rate(n, alpha_n, p_off_n, q_n, cfg) >= required - tol


def bs_to_uav_rate(n: int, alpha_n: float, q_n: np.ndarray,
                   cfg: ScenarioConfig) -> tuple[float, float, bool]:
    """Feed-link rate, its requirement, and whether the slot satisfies it.

    The BS must deliver the users' aggregate payload to the UAV in
    communication slots; during sensing (alpha_n = 1) nothing is required.
    """
    snr = cfg.p_BS * backhaul_channel_gain_sq(q_n, cfg) / cfg.sigma2_U
    rate = math.log2(1.0 + snr)
    required = float(np.sum(cfg.R_min_rate)) * (1.0 - alpha_n)
    return rate, required, rate >= required - 1e-9


def avg_user_rate(k: int, schedule: SensingSchedule, W: np.ndarray,
                  trajectory: np.ndarray, cfg: ScenarioConfig) -> float:
    """Mission-average downlink rate of user k over communication slots."""
    load = schedule.slot_load()
    total = 0.0
    for n in range(cfg.N):
        w = 1.0 - float(load[n])
        if w <= 0.0:
            continue
        total += w * math.log2(1.0 + sinr(k, n, W[:, n], trajectory[n], cfg))
    return total / cfg.N
