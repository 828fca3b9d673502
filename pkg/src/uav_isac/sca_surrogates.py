"""Convex surrogates and exact expansions shared by both solver blocks.

Each inner iteration replaces a nonconvex expression by a one-sided model
that touches it at the current expansion point: products of auxiliaries get a
difference-of-convex upper bound, rates get tangent bounds, the binary
indicator gets a linear majorizer of alpha - alpha^2, and the velocity/
induced-power coupling gets a global concave lower bound.  One-sidedness is
what keeps every surrogate-feasible point feasible for the original problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig

LN2 = math.log(2.0)


@dataclass
class ExpansionPoint:
    """Snapshot of the decision variables a surrogate is expanded around."""

    iteration: int
    mu_t: np.ndarray | None = None  # (K, N)
    phi_t: np.ndarray | None = None  # (K, N)
    mu_ke_t: np.ndarray | None = None  # (K, E, N)
    alpha_t: np.ndarray | None = None  # (E, N)
    q_t: np.ndarray | None = None  # (N, 2)
    v_t: np.ndarray | None = None  # (N, 2)
    y_t: np.ndarray | None = None  # (N,)
    mu_prime_t: np.ndarray | None = None  # (K, N)
    beta_t: np.ndarray | None = None  # (K, N)

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if isinstance(val, np.ndarray) and not np.all(np.isfinite(val)):
                raise ValueError(f"non-finite expansion data in {name}")
        if self.alpha_t is not None and (
                np.any(self.alpha_t < -1e-9) or np.any(self.alpha_t > 1 + 1e-9)):
            raise ValueError("alpha_t out of [0, 1]")


def bilinear_surrogate(mu, phi, mu_t, phi_t):
    """Convex upper bound on the product mu * phi, tight at (mu_t, phi_t).

    mu*phi = 0.5[(mu+phi)^2 - mu^2 - phi^2]; keeping the first square and
    linearizing the subtracted convex part around the expansion point gives
    nu = 0.5(mu+phi)^2 - mu_t*mu - phi_t*phi + 0.5(mu_t^2 + phi_t^2).
    """
    mu, phi = np.asarray(mu, float), np.asarray(phi, float)
    mu_t, phi_t = np.asarray(mu_t, float), np.asarray(phi_t, float)
    return (0.5 * (mu + phi) ** 2 - mu_t * mu - phi_t * phi
            + 0.5 * (mu_t ** 2 + phi_t ** 2))


def log_upper(mu_ke, mu_ke_t):
    """Tangent of log2(1+mu) at mu_t; upper-bounds the rate everywhere."""
    mu_ke, mu_ke_t = np.asarray(mu_ke, float), np.asarray(mu_ke_t, float)
    if np.any(mu_ke <= -1) or np.any(mu_ke_t <= -1):
        raise ValueError("log_upper needs arguments > -1")
    return np.log2(1.0 + mu_ke_t) + (mu_ke - mu_ke_t) / ((1.0 + mu_ke_t) * LN2)


def binary_penalty(alpha, alpha_t) -> float:
    """Linear majorizer of sum(alpha - alpha^2); zero exactly at binary points.

    Driving this to zero with a growing weight is how the relaxed sensing
    indicators are pushed back to {0, 1}.
    """
    alpha = np.asarray(alpha, float)
    alpha_t = np.asarray(alpha_t, float)
    return float(np.sum(alpha - alpha_t * (2.0 * alpha - alpha_t)))


def _pair_data(W: np.ndarray):
    """Magnitudes, phases, and index gaps of the strict upper triangle."""
    M = W.shape[0]
    iu, ju = np.triu_indices(M, k=1)
    w = W[iu, ju]
    return np.abs(w), np.angle(w), (ju - iu).astype(float)


def trace_term_J(W: np.ndarray, q: np.ndarray, d_k: np.ndarray,
                 cfg: ScenarioConfig) -> tuple[float, float]:
    """Split beta0^2 * a^H W a into a position-free part U and a cosine sum J.

    U collects the diagonal of W (independent of q); J collects every
    off-diagonal pair through cos(kappa * gap * H / dist3 + phase), which is
    the only place the horizontal position enters.  Returns (U, J).
    """
    U = cfg.beta0 ** 2 * float(np.real(np.trace(W)))
    if W.shape[0] == 1:
        return U, 0.0
    mags, phases, gaps = _pair_data(W)
    kappa = 2.0 * math.pi * cfg.radar.antenna_spacing / cfg.radar.wavelength
    dist3 = math.sqrt(float(np.sum((np.asarray(q, float) - d_k) ** 2))
                      + cfg.H ** 2)
    J = cfg.beta0 ** 2 * float(
        np.sum(2.0 * mags * np.cos(kappa * gaps * cfg.H / dist3 + phases)))
    return U, J


def trace_term_gradient(W: np.ndarray, q: np.ndarray, d_k: np.ndarray,
                        cfg: ScenarioConfig) -> np.ndarray:
    """Analytic gradient of the cosine sum J with respect to q.

    Per pair, d/dq cos(kappa*gap*H/dist3 + phase)
      = sin(kappa*gap*H/dist3 + phase) * kappa*gap*H / dist3^3 * (q - d).
    """
    q = np.asarray(q, float)
    if W.shape[0] == 1:
        return np.zeros(2)
    mags, phases, gaps = _pair_data(W)
    kappa = 2.0 * math.pi * cfg.radar.antenna_spacing / cfg.radar.wavelength
    dist3_sq = float(np.sum((q - d_k) ** 2)) + cfg.H ** 2
    dist3 = math.sqrt(dist3_sq)
    args = kappa * gaps * cfg.H / dist3 + phases
    scale = cfg.beta0 ** 2 * float(
        np.sum(2.0 * mags * np.sin(args) * kappa * gaps)) * cfg.H / dist3 ** 3
    return scale * (q - d_k)


def affine_J(W: np.ndarray, q: np.ndarray, q_t: np.ndarray, d_k: np.ndarray,
             cfg: ScenarioConfig) -> float:
    """First-order expansion of J around q_t (exact there)."""
    _, J_t = trace_term_J(W, q_t, d_k, cfg)
    grad = trace_term_gradient(W, q_t, d_k, cfg)
    return J_t + float(grad @ (np.asarray(q, float) - np.asarray(q_t, float)))


def velocity_lower_bound(y, v, y_t, v_t, v0: float):
    """Tangent lower bound on y^2 + ||v||^2/v0^2 (jointly convex, so global).

    Used to convexify the induced-power recursion: requiring 1/y^2 below this
    bound is a conservative version of the original equality-driven coupling.
    """
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    y_t = np.asarray(y_t, float)
    v_t = np.asarray(v_t, float)
    if np.any(y_t <= 0):
        raise ValueError("y_t must be positive")
    vv_t = np.sum(v_t * v_t, axis=-1)
    cross = np.sum(v_t * v, axis=-1)
    return (y_t ** 2 + vv_t / v0 ** 2 + 2.0 * y_t * (y - y_t)
            + (2.0 / v0 ** 2) * (cross - vv_t))
