"""Problem instance and propagation primitives.

Holds the full scenario description (geometry, radar timing, power/QoS
parameters, solver settings) and the channel primitives shared by every
other module: departure angles, ULA steering vectors, user channels, and
the backhaul amplitude gain.

Conventions:
  * positions are horizontal 2-vectors in meters, the UAV flies at fixed
    altitude H, users/targets are on the ground, the BS antenna sits at
    height H_bs (so the UAV-BS vertical offset is H_b = H - H_bs);
  * the departure angle is measured from the vertical, so hovering right
    above a site gives theta = 0;
  * ``beta0`` is the *amplitude* channel gain at 1 m.  A "-30 dB" reference
    power gain therefore loads as beta0 = 10**(-1.5), and |h|^2 carries
    beta0**2 = 1e-3.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

SPEED_OF_LIGHT = 2.99792458e8  # m/s


def db_to_linear(x_db: float) -> float:
    """Power ratio from dB."""
    return 10.0 ** (x_db / 10.0)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


class ConfigError(ValueError):
    """Raised when a config file violates a scenario invariant."""


@dataclass(frozen=True)
class RadarTiming:
    """Pulse-radar timing and backhaul quantization parameters.

    Each slot of duration delta_t is divided into sensing rounds of length
    T_s = t_p + t_o (pulse + listening).  ``n_rounds_supplied`` optionally
    pins the number of rounds per slot; when present it wins over the value
    derived from the timing (the two may disagree by a fraction of a percent
    in published parameter tables) and the discrepancy is reported by
    :func:`load_scenario` as a warning.
    """

    t_p: float  # pulse width (s)
    t_o: float  # listening time (s)
    N_b: int  # quantization bits per echo sample
    Delta_R: float  # range resolution (m)
    W_f: float  # backhaul bandwidth (Hz)
    wavelength: float  # carrier wavelength (m)
    antenna_spacing: float  # ULA element spacing (m)
    Delta: float  # half-beamwidth of the ideal sensing pattern (rad)
    L: int = 181  # angular grid size for beam synthesis
    n_rounds_supplied: int | None = None

    def __post_init__(self):
        if self.t_p <= 0:
            raise ConfigError("t_p must be positive")
        if self.t_o <= self.t_p:
            raise ConfigError("t_o must exceed t_p")
        if self.N_b < 1 or self.Delta_R <= 0 or self.W_f <= 0:
            raise ConfigError("N_b, Delta_R, W_f must be positive")

    @property
    def T_s(self) -> float:
        """Duration of one sensing round (s)."""
        return self.t_p + self.t_o

    def n_rounds(self, delta_t: float) -> int:
        """Sensing rounds per slot: supplied value if given, else floor(delta_t/T_s)."""
        if self.n_rounds_supplied is not None:
            return self.n_rounds_supplied
        n = math.floor(delta_t / self.T_s)
        if n < 1:
            raise ConfigError("slot too short: floor(delta_t / T_s) < 1")
        return n

    def duty_cycle(self, delta_t: float) -> float:
        """Fraction of a slot spent transmitting pulses: N_s * t_p / delta_t."""
        return self.n_rounds(delta_t) * self.t_p / delta_t


@dataclass(frozen=True)
class SolverParams:
    tau1: float = 2e3  # weight pushing the relaxed schedule to binary values
    tau2: float = 2e2  # weight pulling the UAV onto scheduled targets (per m^2)
    eps_ao: float = 1e-3  # relative objective change that stops the outer loop
    max_ao_iters: int = 50
    binary_tol: float = 1e-3  # accepted |alpha - round(alpha)| before rounding
    hover_tol: float = 1.0  # accepted hover gap ||q - d_e|| on sensing slots (m)
    big_M_scale: float = 10.0
    conic_tol: float = 1e-9
    seed: int = 0
    p_off_min: float = 1e-6  # floor on the offload power (W); keeps the
    # offload-rate ball in the trajectory subproblem well defined on slots
    # where no offloading happens

    def __post_init__(self):
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ConfigError("penalty weights must be positive")
        if not 0 < self.eps_ao <= 1:
            raise ConfigError("eps_ao out of (0,1]")
        if self.p_off_min <= 0:
            raise ConfigError("p_off_min must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable problem instance.

    All physical quantities are SI; rates are bits/s/Hz.  Loaded from YAML by
    :func:`load_scenario`, which converts ``*_db`` / ``*_dbm`` keys once.
    """

    N: int
    delta_t: float
    K: int
    E: int
    M: int
    H: float
    H_bs: float
    user_pos: np.ndarray  # (K, 2)
    target_pos: np.ndarray  # (E, 2)
    bs_pos: np.ndarray  # (2,)
    q_start: np.ndarray  # (2,)
    q_final: np.ndarray  # (2,)
    v_max: float
    a_max: float
    P_max: float
    R_min_rate: np.ndarray  # (K,)
    SNR_th: np.ndarray  # (E,) linear
    beta0: float  # amplitude gain at 1 m
    sigma2_k: float
    sigma2_e: float
    sigma2_B: float
    sigma2_U: float
    rcs: np.ndarray  # (E,) m^2
    eta: float  # power-amplifier inefficiency (>1)
    P_static: float  # circuit power per RF chain (W)
    G_T: float  # linear backhaul antenna gain
    p_BS: float  # BS transmit power (W)
    iota: float  # compression factor in (0,1)
    N_s_max: int  # max sensing slots per target
    f_loc: float  # local CPU speed (cycles/s)
    hw_const_a: float  # effective switched capacitance of the CPU
    radar: RadarTiming
    solver: SolverParams = field(default_factory=SolverParams)
    aero: "AeroParams | None" = None  # filled by load_scenario; power module type
    load_warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.K < 0 or self.E < 0 or self.M < 1:
            raise ConfigError("K and E must be >= 0 and M >= 1")
        if not 0 < self.iota < 1:
            raise ConfigError("iota out of (0,1)")
        if self.eta <= 1:
            raise ConfigError("eta must exceed 1")
        for name in ("sigma2_k", "sigma2_e", "sigma2_B", "sigma2_U"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.v_max <= 0 or self.a_max <= 0 or self.P_max <= 0:
            raise ConfigError("v_max, a_max, P_max must be positive")
        if np.any(np.asarray(self.SNR_th) <= 0):
            raise ConfigError("SNR_th must be positive")
        if self.H <= 0 or self.H_bs < 0 or self.H_bs >= self.H:
            raise ConfigError("need 0 <= H_bs < H")
        # freeze the arrays so the instance is safely shareable
        for name in ("user_pos", "target_pos", "bs_pos", "q_start", "q_final",
                     "R_min_rate", "SNR_th", "rcs"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.user_pos.shape != (self.K, 2):
            raise ConfigError("user_pos must have shape (K, 2)")
        if self.target_pos.shape != (self.E, 2):
            raise ConfigError("target_pos must have shape (E, 2)")
        if self.R_min_rate.shape != (self.K,):
            raise ConfigError("R_min_rate must have shape (K,)")
        if self.SNR_th.shape != (self.E,) or self.rcs.shape != (self.E,):
            raise ConfigError("SNR_th and rcs must have shape (E,)")

    @property
    def H_b(self) -> float:
        """Vertical offset between the UAV and the BS antenna."""
        return self.H - self.H_bs

    @property
    def n_rounds(self) -> int:
        return self.radar.n_rounds(self.delta_t)

    @property
    def duty_cycle(self) -> float:
        return self.radar.duty_cycle(self.delta_t)

    def replace(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)


# ---------------------------------------------------------------------------
# propagation primitives
# ---------------------------------------------------------------------------

def aod_angle(q, d, H: float) -> float:
    """Departure angle (rad, from the vertical) from the UAV at ``q`` toward
    ground site ``d``:  arccos(H / sqrt(||q-d||^2 + H^2)).  Hover gives 0."""
    q = np.asarray(q, dtype=float)
    d = np.asarray(d, dtype=float)
    dist3 = math.sqrt(float(np.sum((q - d) ** 2)) + H * H)
    return math.acos(min(1.0, H / dist3))


def steering_vector(q, d, H: float, M: int, spacing: float, wavelength: float) -> np.ndarray:
    """ULA steering vector toward site ``d``.

    Element m (0-based) is exp(j*2*pi*(spacing/wavelength)*m*cos(theta)); the
    first element is exactly 1 and all elements are unit modulus.
    """
    cos_theta = math.cos(aod_angle(q, d, H))
    m = np.arange(M)
    return np.exp(1j * 2.0 * math.pi * (spacing / wavelength) * m * cos_theta)


def steering_vector_angle(theta: float, M: int, spacing: float, wavelength: float) -> np.ndarray:
    """Steering vector for an explicit departure angle (used on the synthesis grid)."""
    m = np.arange(M)
    return np.exp(1j * 2.0 * math.pi * (spacing / wavelength) * m * math.cos(theta))


def user_channel(q, d_k, H: float, M: int, spacing: float, wavelength: float,
                 beta0: float) -> np.ndarray:
    """Free-space downlink channel beta0 * a / sqrt(||q-d_k||^2 + H^2)."""
    q = np.asarray(q, dtype=float)
    d_k = np.asarray(d_k, dtype=float)
    dist3 = math.sqrt(float(np.sum((q - d_k) ** 2)) + H * H)
    return beta0 * steering_vector(q, d_k, H, M, spacing, wavelength) / dist3


def backhaul_gain(q, bs_pos, H_b: float, beta0: float, G_T: float) -> float:
    """Amplitude gain of the rank-one UAV-BS link: sqrt(beta0^2 G_T) / dist."""
    q = np.asarray(q, dtype=float)
    bs_pos = np.asarray(bs_pos, dtype=float)
    dist3 = math.sqrt(float(np.sum((q - bs_pos) ** 2)) + H_b * H_b)
    return math.sqrt(beta0 * beta0 * G_T) / dist3


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

_DB_SUFFIX = "_db"
_DBM_SUFFIX = "_dbm"

# (plain key, default, warn-on-default) applied after dB conversion.
_OPTIONAL_DEFAULTS = {
    "eta": (2.0, True),
    "iota": (0.5, True),
    "p_BS": (dbm_to_watt(40.0), True),
    "H_bs": (10.0, True),
    "N_s_max": (4, True),
    "q_start": ([0.0, 0.0], False),
    "q_final": ([300.0, 300.0], False),
    "sigma2_B": (None, False),  # falls back to sigma2_k
    "sigma2_U": (None, False),
    "sigma2_e": (None, False),
    "P_static": (0.3, False),
    "f_loc": (3e9, False),
    "hw_const_a": (1e-28, False),
}

_AREA_DEFAULT = 300.0  # side of the square used for seeded site placement (m)


def _convert_db_keys(raw: dict) -> dict:
    """Convert ``*_db`` / ``*_dbm`` keys to linear/W values once, recursively."""

    def conv(val, fn):
        if isinstance(val, (list, tuple)):
            return [fn(float(v)) for v in val]
        return fn(float(val))

    out = {}
    for key, val in raw.items():
        if isinstance(val, dict):
            out[key] = _convert_db_keys(val)
        elif key.endswith(_DBM_SUFFIX):
            out[key[: -len(_DBM_SUFFIX)]] = conv(val, dbm_to_watt)
        elif key.endswith(_DB_SUFFIX):
            out[key[: -len(_DB_SUFFIX)]] = conv(val, db_to_linear)
        else:
            out[key] = val
    return out


def _as_positions(val, count: int, name: str) -> np.ndarray:
    if count == 0:
        return np.zeros((0, 2))
    arr = np.asarray(val, dtype=float)
    if arr.shape != (count, 2):
        raise ConfigError(f"{name} must be a list of {count} [x, y] pairs")
    return arr


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario from a YAML file.

    Missing optional keys get documented defaults (a warning is recorded on
    the returned config for the physically meaningful ones).  Keys suffixed
    ``_db``/``_dbm`` are converted to linear/W.  Raises :class:`ConfigError`
    naming the violated invariant on bad input.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} is not a mapping")
    data = _convert_db_keys(raw)
    # beta0_db quotes the reference *power* gain; the stored beta0 is the
    # amplitude gain, so take the square root after the dB conversion.
    if "beta0_db" in raw:
        data["beta0"] = math.sqrt(data["beta0"])
    warnings: list[str] = []

    for key, (default, warn) in _OPTIONAL_DEFAULTS.items():
        if key not in data and default is not None:
            data[key] = default
            if warn:
                warnings.append(f"{key} not set; default {default!r} applied")
    for noise_key in ("sigma2_B", "sigma2_U", "sigma2_e"):
        if data.get(noise_key) is None:
            data[noise_key] = data["sigma2_k"]

    K = int(data["K"])
    E = int(data["E"])
    rng = np.random.default_rng(int(data.get("placement_seed", data.get("seed", 0))))
    if "user_pos" in data:
        user_pos = _as_positions(data["user_pos"], K, "user_pos")
    else:
        user_pos = rng.uniform(0.0, _AREA_DEFAULT, size=(K, 2))
        warnings.append("user_pos not set; seeded uniform placement applied")
    if "target_pos" in data:
        target_pos = _as_positions(data["target_pos"], E, "target_pos")
    else:
        target_pos = rng.uniform(0.0, _AREA_DEFAULT, size=(E, 2))
        warnings.append("target_pos not set; seeded uniform placement applied")

    radar_raw = data.get("radar")
    if not isinstance(radar_raw, dict):
        raise ConfigError("config must contain a 'radar' mapping")
    radar = RadarTiming(
        t_p=float(radar_raw["t_p"]),
        t_o=float(radar_raw["t_o"]),
        N_b=int(radar_raw["N_b"]),
        Delta_R=float(radar_raw["Delta_R"]),
        W_f=float(radar_raw["W_f"]),
        # 0.875-wavelength spacing keeps the pattern-fit SDP well posed: the
        # cos-theta phase map leaves part of the period invisible at lambda/2
        # (degenerate near-zero-pattern covariances) and aliases end-fire onto
        # broadside at full lambda.
        wavelength=float(radar_raw.get("wavelength", 0.1)),
        antenna_spacing=float(radar_raw.get("antenna_spacing", 0.0875)),
        Delta=float(radar_raw["Delta"]),
        L=int(radar_raw.get("L", 181)),
        n_rounds_supplied=(int(radar_raw["n_rounds"]) if "n_rounds" in radar_raw else None),
    )
    if radar.n_rounds_supplied is not None:
        delta_t = float(data["delta_t"])
        derived = math.floor(delta_t / radar.T_s)
        rel = abs(derived - radar.n_rounds_supplied) / radar.n_rounds_supplied
        if rel > 1e-12:
            warnings.append(
                f"supplied n_rounds={radar.n_rounds_supplied} differs from "
                f"floor(delta_t/T_s)={derived} by {rel:.2%}; supplied value wins")

    solver_raw = data.get("solver", {})
    solver = SolverParams(**{k: v for k, v in solver_raw.items()})

    def scalar_per(count, val, name):
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 0:
            return np.full(count, float(arr))
        if arr.shape != (count,):
            raise ConfigError(f"{name} must be a scalar or a list of {count} values")
        return arr

    from .power import AeroParams  # deferred: power imports scenario

    aero_raw = dict(data.get("aero", {}))
    mode = aero_raw.pop("model_mode", data.get("model_mode", "standard"))
    aero = AeroParams(model_mode=mode, **aero_raw)

    cfg = ScenarioConfig(
        N=int(data["N"]),
        delta_t=float(data["delta_t"]),
        K=K,
        E=E,
        M=int(data["M"]),
        H=float(data["H"]),
        H_bs=float(data["H_bs"]),
        user_pos=user_pos,
        target_pos=target_pos,
        bs_pos=np.asarray(data["bs_pos"], dtype=float),
        q_start=np.asarray(data["q_start"], dtype=float),
        q_final=np.asarray(data["q_final"], dtype=float),
        v_max=float(data["v_max"]),
        a_max=float(data["a_max"]),
        P_max=float(data["P_max"]),
        R_min_rate=scalar_per(K, data["R_min_rate"], "R_min_rate"),
        SNR_th=scalar_per(E, data["SNR_th"], "SNR_th"),
        beta0=float(data["beta0"]),
        sigma2_k=float(data["sigma2_k"]),
        sigma2_e=float(data["sigma2_e"]),
        sigma2_B=float(data["sigma2_B"]),
        sigma2_U=float(data["sigma2_U"]),
        rcs=scalar_per(E, data["rcs"], "rcs"),
        eta=float(data["eta"]),
        P_static=float(data["P_static"]),
        G_T=float(data["G_T"]),
        p_BS=float(data["p_BS"]),
        iota=float(data["iota"]),
        N_s_max=int(data["N_s_max"]),
        f_loc=float(data["f_loc"]),
        hw_const_a=float(data["hw_const_a"]),
        radar=radar,
        solver=solver,
        aero=aero,
        load_warnings=tuple(warnings),
    )
    return cfg
