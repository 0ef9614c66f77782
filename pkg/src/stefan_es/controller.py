"""Measurable extremum-seeking loop: demodulation, filtered drive, predictor.

The gradient and curvature of the unknown quadratic response map are
estimated by multiplying the measured output with sinusoidal demodulation
signals; a slow washout removes the output's large constant part first so
the estimates do not carry a parasitic ripple at the probing frequency
(their one-period averages are unchanged by this).  The drive is

    v = -K * (G + Hhat*(predictor integral) + Hhat*(field integral))

passed through an exact zero-order-hold discretization of the low-pass
c/(s+c).  With K < 0 and a map curvature H < 0 the estimates average to
(H*err, H), so -K*(...) realizes the negative feedback -K*H*(err + ...)
that pulls the front toward the optimum.  In the delay-compensated mode
the integral of the last D seconds of the drive acts as a one-window
predictor of the front error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MODE_NOMINAL = "nominal"
MODE_DELAY_COMPENSATED = "delay-compensated"
MODE_DELAY_UNCOMPENSATED = "delay-uncompensated"
_MODES = (MODE_NOMINAL, MODE_DELAY_COMPENSATED, MODE_DELAY_UNCOMPENSATED)


class ZeroAmplitudeError(ValueError):
    """Demodulation requested with zero probing amplitude."""


@dataclass(frozen=True)
class ControllerConfig:
    K: float = -0.1             # drive gain, negative
    a: float = 0.1              # probing amplitude (matches the dither)
    omega: float = 10.0         # probing frequency [rad/s]
    c: float = 10.0             # low-pass pole [rad/s]
    dt_ctrl: float = 0.005      # control sample period [s]
    D: float = 0.5              # input delay [s]; 0 in nominal mode
    mode: str = MODE_DELAY_COMPENSATED
    washout_pole: float = 1.0   # output washout pole [rad/s]; 0 disables
    settle_time: float = 0.0    # listen-only warmup before the drive engages [s]

    def validate(self) -> None:
        if not self.K < 0:
            raise ValueError(f"K must be negative, got {self.K}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.dt_ctrl > 0:
            raise ValueError(f"dt_ctrl must be positive, got {self.dt_ctrl}")
        if self.D < 0:
            raise ValueError(f"D must be >= 0, got {self.D}")
        if self.a < 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.washout_pole < 0:
            raise ValueError(f"washout_pole must be >= 0, got {self.washout_pole}")
        if self.settle_time < 0:
            raise ValueError(f"settle_time must be >= 0, got {self.settle_time}")
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != MODE_NOMINAL:
            ratio = self.D / self.dt_ctrl
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"D={self.D} must be an integer multiple of "
                                 f"dt_ctrl={self.dt_ctrl} in delay modes")

    @property
    def delay_samples(self) -> int:
        return int(round(self.D / self.dt_ctrl))


@dataclass(frozen=True)
class MapConfig:
    theta_star: float = 0.8     # optimizer
    y_star: float = 4.0         # optimum
    hessian: float = -1.0       # curvature, negative (maximum seeking)

    def validate(self) -> None:
        if not self.hessian < 0:
            raise ValueError(f"hessian must be negative, got {self.hessian}")


@dataclass
class ControllerState:
    u_filt: float = 0.0
    delay_buffer: np.ndarray = field(default_factory=lambda: np.zeros(1))
    g_est: float = 0.0
    h_est: float = 0.0
    t: float = 0.0
    y_lp: float | None = None   # washout low-pass state


def make_controller_state(cfg: ControllerConfig) -> ControllerState:
    cfg.validate()
    # The ring holds the last delay_samples + 1 filter outputs, so trapezoid
    # quadrature over it spans exactly [t - D, t]; a single slot means the
    # predictor window has zero width and contributes 0.
    n = cfg.delay_samples if cfg.mode == MODE_DELAY_COMPENSATED else 0
    return ControllerState(delay_buffer=np.zeros(n + 1))


def static_map(theta: float, m: MapConfig) -> float:
    """Quadratic response map y* + (H/2)(theta - theta*)^2."""
    return m.y_star + 0.5 * m.hessian * (theta - m.theta_star) ** 2


def demod_gradient(y: float, t: float, cfg: ControllerConfig) -> float:
    """Gradient estimate (2/a)*sin(omega*t)*y."""
    if cfg.a == 0:
        raise ZeroAmplitudeError("gradient demodulation needs a > 0")
    return (2.0 / cfg.a) * math.sin(cfg.omega * t) * y


def demod_hessian(y: float, t: float, cfg: ControllerConfig) -> float:
    """Curvature estimate -(8/a^2)*cos(2*omega*t)*y."""
    if cfg.a == 0:
        raise ZeroAmplitudeError("curvature demodulation needs a > 0")
    return -(8.0 / cfg.a ** 2) * math.cos(2.0 * cfg.omega * t) * y


def predictor_integral(st: ControllerState, cfg: ControllerConfig) -> float:
    """Trapezoidal integral of the buffered drive over the last delay window."""
    buf = st.delay_buffer
    if buf.shape[0] < 2:
        return 0.0
    return float(cfg.dt_ctrl * (np.sum(buf) - 0.5 * (buf[0] + buf[-1])))


def control_update(st: ControllerState, y: float, integ_u: float,
                   cfg: ControllerConfig) -> float:
    """One control sample: demodulate, form the drive, advance the filter.

    integ_u is the measured integral of the deviation field over the liquid
    domain.  Returns the new filter output, which is also pushed into the
    predictor ring.  With settle_time > 0 the drive is held at zero for that
    long while the washout keeps listening: until the output washout has
    converged, the curvature estimate multiplies the large startup field
    integral and rectifies into a spurious drive.  Aggressive demodulation
    gains (small probing amplitudes) need that warmup.
    """
    if cfg.washout_pole > 0:
        if st.y_lp is None:
            st.y_lp = y
        else:
            st.y_lp += -math.expm1(-cfg.washout_pole * cfg.dt_ctrl) * (y - st.y_lp)
        y_dev = y - st.y_lp
    else:
        y_dev = y
    g = demod_gradient(y_dev, st.t, cfg)
    h = demod_hessian(y_dev, st.t, cfg)
    if st.t < cfg.settle_time:
        v = 0.0
    elif cfg.mode == MODE_DELAY_COMPENSATED:
        v = -cfg.K * (g + h * predictor_integral(st, cfg) + h * integ_u)
    else:
        v = -cfg.K * (g + h * integ_u)
    decay = math.exp(-cfg.c * cfg.dt_ctrl)
    st.u_filt = decay * st.u_filt + (1.0 - decay) * v
    st.delay_buffer[:-1] = st.delay_buffer[1:]
    st.delay_buffer[-1] = st.u_filt
    st.g_est = g
    st.h_est = h
    st.t += cfg.dt_ctrl
    return st.u_filt


def actuator_input(st: ControllerState, s_t: float) -> float:
    """Flux command handed to the plant: filtered drive plus the probing signal."""
    return st.u_filt + s_t
