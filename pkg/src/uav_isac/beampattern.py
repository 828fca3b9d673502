"""Offline synthesis of the sensing covariance and beam-gain evaluation.

The sensing beam is designed once, for the hover-overhead geometry (boresight
at zero departure angle): a unit-trace PSD covariance R_d whose transmit
pattern a^H(theta) R_d a(theta) matches a flat-top ideal pattern of half-width
Delta in the least-squares sense, jointly with a free scaling of the ideal
level.  At run time the radar covariance is just p_rad[n] * R_d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .scenario import steering_vector_angle


class SynthesisError(RuntimeError):
    """Raised when the covariance synthesis solver does not return a solution."""


@dataclass(frozen=True)
class IdealPattern:
    """Flat-top target pattern on a uniform angular grid over [-pi/2, pi/2]."""

    angles: np.ndarray  # (L,) rad
    values: np.ndarray  # (L,) in {0.0, 1.0}

    def __post_init__(self):
        self.angles.setflags(write=False)
        self.values.setflags(write=False)


@dataclass(frozen=True)
class SensingBeam:
    R_d: np.ndarray  # (M, M) Hermitian PSD, unit trace
    rho0: float
    mse: float

    def __post_init__(self):
        self.R_d.setflags(write=False)


def ideal_pattern(theta_e: float, Delta: float, L: int) -> IdealPattern:
    """Indicator pattern: 1 on [theta_e - Delta, theta_e + Delta], else 0."""
    if not 0 < Delta <= math.pi / 2:
        raise ValueError("Delta out of (0, pi/2]")
    if L < 3:
        raise ValueError("need L >= 3 grid points")
    angles = np.linspace(-math.pi / 2, math.pi / 2, L)
    values = ((angles >= theta_e - Delta) & (angles <= theta_e + Delta)).astype(float)
    return IdealPattern(angles=angles, values=values)


def beam_gain(R: np.ndarray, a: np.ndarray) -> float:
    """Transmit pattern gain a^H R a (real, >= 0 for PSD R)."""
    return float(np.real(np.conj(a) @ R @ a))


def _project_psd(R: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and re-symmetrize."""
    R = 0.5 * (R + R.conj().T)
    w, V = np.linalg.eigh(R)
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.conj().T


def synthesize_beam(pattern: IdealPattern, M: int, spacing: float,
                    wavelength: float) -> SensingBeam:
    """Least-squares covariance fit to the ideal pattern.

    Minimizes (1/L) * sum_l |rho0 * D(theta_l) - a^H(theta_l) R a(theta_l)|^2
    over unit-trace Hermitian PSD R and the free scale rho0.  Small negative
    eigenvalues from the solver are clipped before the covariance is returned.
    """
    L = len(pattern.angles)
    steer = np.stack([steering_vector_angle(t, M, spacing, wavelength)
                      for t in pattern.angles])  # (L, M)
    if M == 1:
        # gain is identically 1; only rho0 is free and the fit is scalar
        d = pattern.values
        denom = float(d @ d)
        rho0 = float(d.sum() / denom) if denom > 0 else 1.0
        mse = float(np.mean((rho0 * d - 1.0) ** 2))
        return SensingBeam(R_d=np.array([[1.0 + 0j]]), rho0=rho0, mse=mse)

    R = cp.Variable((M, M), hermitian=True)
    rho0 = cp.Variable(nonneg=True)
    gains = cp.real(cp.sum(cp.multiply(steer.conj() @ R, steer), axis=1))
    residual = cp.multiply(rho0, pattern.values) - gains
    problem = cp.Problem(
        cp.Minimize(cp.sum_squares(residual) / L),
        [cp.trace(R) == 1.0, R >> 0],
    )
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        raise SynthesisError(f"covariance synthesis failed: {exc}") from exc
    if R.value is None:
        raise SynthesisError(f"covariance synthesis failed: status {problem.status}")
    R_val = _project_psd(np.asarray(R.value))
    R_val = R_val / np.real(np.trace(R_val))
    gains_val = np.real(np.einsum("lm,mp,lp->l", steer.conj(), R_val, steer))
    rho_val = float(rho0.value)
    mse = float(np.mean(np.abs(rho_val * pattern.values - gains_val) ** 2))
    return SensingBeam(R_d=R_val, rho0=rho_val, mse=mse)


DESIGN_GRID = 181  # angular grid points used for the runtime design fit


def design_beam(cfg, L: int | None = None) -> SensingBeam:
    """Synthesize the boresight sensing covariance a scenario runs with.

    The design angle is zero (hover-overhead geometry); the flat-top
    half-width, grid size, and array geometry come from the scenario's
    radar block.
    """
    if L is None:
        L = getattr(cfg.radar, "L", DESIGN_GRID)
    pattern = ideal_pattern(0.0, cfg.radar.Delta, L)
    return synthesize_beam(pattern, cfg.M, cfg.radar.antenna_spacing,
                           cfg.radar.wavelength)


def gain_profile(beam: SensingBeam, pattern: IdealPattern, spacing: float,
                 wavelength: float) -> np.ndarray:
    """Pattern gain of the synthesized beam on the design grid."""
    M = beam.R_d.shape[0]
    return np.array([
        beam_gain(beam.R_d, steering_vector_angle(t, M, spacing, wavelength))
        for t in pattern.angles
    ])
