"""One-phase melting-front solver on a front-fixed unit grid.

The liquid-phase heat equation T_t = alpha*T_xx on the growing domain
[0, s(t)] is rewritten in the immobilized coordinate eta = x/s(t), which
maps the moving domain onto [0, 1] at the cost of an advection term:

    v_t = (alpha/s^2) v_ee + eta*(sdot/s) v_e,      v(eta, t) = T(eta*s(t), t)

The front moves by sdot = -beta_phys * T_x(s(t), t).  The input is either
the heat flux at x = 0 (normal operation, applied through a ghost node) or
a pinned boundary temperature (used only to compare against the classical
similarity solution).  Time stepping is explicit with a CFL-limited substep
re-evaluated every substep; a macro step covers one controller sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(fn):
            return fn
        return deco


BC_NEUMANN_FLUX = "neumann-flux"
BC_DIRICHLET_TEMPERATURE = "dirichlet-temperature"

# Below this front position the Stefan update is frozen; the closed loop
# never operates there and letting s -> 0 would blow up the CFL substep.
S_FLOOR = 1e-6

_MAX_SUBSTEPS = 50_000_000


class ConfigurationError(ValueError):
    """A config violates one of its invariants."""


class IntegrationFailureError(RuntimeError):
    """The explicit integration produced a non-finite state."""

    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"integration failure at t={t:.6g}")


@dataclass(frozen=True)
class PlantConfig:
    alpha: float = 1.0          # diffusivity (1 in normalized mode)
    beta_phys: float = 1.0      # front gain (1 in normalized mode)
    k_cond: float = 1.0         # conductivity (1 in normalized mode)
    T_m: float = 100.0          # melting temperature [degC]
    T_0: float = 110.0          # initial boundary temperature [degC]
    s_0: float = 0.12           # initial front position [m]
    L: float = 1.0              # spatial domain length [m]
    grid_n: int = 100           # number of intervals on the unit grid
    cfl_safety: float = 0.8
    bc_mode: str = BC_NEUMANN_FLUX

    def validate(self) -> None:
        if not self.s_0 > 0:
            raise ConfigurationError(f"s_0 must be positive, got {self.s_0}")
        if not self.s_0 < self.L:
            raise ConfigurationError(f"s_0={self.s_0} must be below L={self.L}")
        if not self.T_0 >= self.T_m:
            raise ConfigurationError(f"T_0={self.T_0} must be >= T_m={self.T_m}")
        if self.grid_n < 8:
            raise ConfigurationError(f"grid_n must be >= 8, got {self.grid_n}")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ConfigurationError(f"cfl_safety must lie in (0,1), got {self.cfl_safety}")
        for name in ("alpha", "beta_phys", "k_cond"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.bc_mode not in (BC_NEUMANN_FLUX, BC_DIRICHLET_TEMPERATURE):
            raise ConfigurationError(f"unknown bc_mode {self.bc_mode!r}")


@dataclass
class PlantState:
    t: float
    s: float
    temp: np.ndarray   # grid_n+1 samples of T(eta*s, t); temp[-1] == T_m exactly
    s_dot: float

    def copy(self) -> "PlantState":
        return PlantState(self.t, self.s, self.temp.copy(), self.s_dot)


@dataclass(frozen=True)
class ValidityReport:
    min_superheat: float
    s_dot_sign: float
    in_band: bool
    violated: bool


@njit(cache=True)
def _advance(temp, s, dt_total, bc_value, flux_bc, alpha, beta, k_cond, t_melt,
             cfl, max_substeps):
    """Advance the front-fixed fields by dt_total using CFL-limited substeps.

    Mutates ``temp`` in place; returns (s, s_dot, substeps, ran_out).
    NaN anywhere makes the loop exit via the NaN-poisoned remaining time;
    the caller checks finiteness.
    """
    n = temp.shape[0] - 1
    deta = 1.0 / n
    work = np.empty_like(temp)
    remaining = dt_total
    s_dot = 0.0
    nsub = 0
    while remaining > 0.0 and nsub < max_substeps:
        grad_eta = (3.0 * temp[n] - 4.0 * temp[n - 1] + temp[n - 2]) / (2.0 * deta)
        if s > S_FLOOR:
            s_dot = -beta * grad_eta / s
        else:
            s_dot = 0.0
        dt = cfl * deta * deta * s * s / (2.0 * alpha + abs(s_dot) * s * deta)
        if dt > remaining:
            dt = remaining
        adiff = alpha * dt / (s * s * deta * deta)
        cadv = dt * s_dot / (2.0 * s * deta)
        for i in range(1, n):
            work[i] = temp[i] + adiff * (temp[i + 1] - 2.0 * temp[i] + temp[i - 1]) \
                + cadv * (i * deta) * (temp[i + 1] - temp[i - 1])
        if flux_bc:
            # ghost node encodes -k_cond * T_x(0) = q_c, i.e. v_e(0) = -q_c*s/k
            work[0] = temp[0] + 2.0 * adiff * (temp[1] - temp[0] + deta * bc_value * s / k_cond)
        else:
            work[0] = bc_value
        work[n] = t_melt
        temp[:] = work
        s = s + dt * s_dot
        remaining -= dt
        nsub += 1
    return s, s_dot, nsub, remaining > 0.0


def init_state(config: PlantConfig) -> PlantState:
    """Initial state: linear profile from T_0 at the heated end to T_m at the front."""
    config.validate()
    temp = np.linspace(config.T_0, config.T_m, config.grid_n + 1)
    temp[-1] = config.T_m
    state = PlantState(t=0.0, s=config.s_0, temp=temp, s_dot=0.0)
    state.s_dot = -config.beta_phys * interface_gradient(state)
    return state


def step(state: PlantState, config: PlantConfig, u_in: float, dt_macro: float) -> PlantState:
    """Advance one macro step under a zero-order-hold input.

    ``u_in`` is the boundary heat flux q_c in neumann-flux mode, or the pinned
    boundary temperature in dirichlet-temperature mode.
    """
    if not dt_macro > 0:
        raise ValueError(f"dt_macro must be positive, got {dt_macro}")
    if not np.isfinite(u_in):
        raise IntegrationFailureError(state.t, f"non-finite input at t={state.t:.6g}")
    nxt = state.copy()
    s, s_dot, _, ran_out = _advance(
        nxt.temp, state.s, dt_macro, float(u_in),
        config.bc_mode == BC_NEUMANN_FLUX,
        config.alpha, config.beta_phys, config.k_cond, config.T_m,
        config.cfl_safety, _MAX_SUBSTEPS,
    )
    nxt.s = s
    nxt.s_dot = s_dot
    nxt.t = state.t + dt_macro
    if ran_out or not (np.isfinite(s) and np.all(np.isfinite(nxt.temp))):
        raise IntegrationFailureError(nxt.t)
    return nxt


def interface_gradient(state: PlantState) -> float:
    """T_x at x = s(t), second-order one-sided stencil (exact through quadratics)."""
    temp = state.temp
    n = temp.shape[0] - 1
    deta = 1.0 / n
    return float((3.0 * temp[n] - 4.0 * temp[n - 1] + temp[n - 2]) / (2.0 * deta * state.s))


def domain_integral_u(state: PlantState) -> float:
    """Trapezoidal integral of (T - T_m) over [0, s(t)].

    T_m is read off the pinned front node, which equals it exactly.
    """
    t_melt = state.temp[-1]
    n = state.temp.shape[0] - 1
    return float(np.trapezoid(state.temp - t_melt, dx=1.0 / n) * state.s)


def validity_check(state: PlantState, tolerance: float,
                   band: tuple[float, float] | None = None) -> ValidityReport:
    """Model-validity monitor: superheat sign and front direction. Never aborts."""
    t_melt = state.temp[-1]
    min_superheat = float(np.min(state.temp) - t_melt)
    in_band = True if band is None else bool(band[0] <= state.s <= band[1])
    violated = (min_superheat < -tolerance) or (state.s_dot < -tolerance)
    return ValidityReport(
        min_superheat=min_superheat,
        s_dot_sign=float(np.sign(state.s_dot)),
        in_band=in_band,
        violated=bool(violated),
    )
