"""Closed-loop scenario runner: wiring, traces, settle metrics, config files.

One scenario is one single-owner pipeline: read the plant, evaluate the
response map, demodulate, update the drive, inject the probing signal,
push the flux through the input-delay line, macro-step the plant, log.
Scenarios:

    nominal              delay-free loop (the delay is forced to 0)
    delay-compensated    input delay, predictor term and advanced probing clock
    delay-uncompensated  same delayed plant and probing clock, predictor dropped
    dirichlet-oracle     pinned boundary temperature vs the similarity solution
    open-loop-dither     probing signal only, drive forced to 0
    average-target       the average error system (analysis module)

Config files are plain text, one ``section.key = value`` per line with
``#`` comments; unknown keys are errors and missing keys take the default
parameter set.  Traces go to CSV with 12 significant digits.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import backstepping, controller, dither, oracles, plant
from .controller import ControllerConfig, MapConfig
from .dither import DitherConfig
from .plant import PlantConfig

SCENARIO_NOMINAL = "nominal"
SCENARIO_DELAY_COMPENSATED = "delay-compensated"
SCENARIO_DELAY_UNCOMPENSATED = "delay-uncompensated"
SCENARIO_DIRICHLET_ORACLE = "dirichlet-oracle"
SCENARIO_AVERAGE_TARGET = "average-target"
SCENARIO_OPEN_LOOP_DITHER = "open-loop-dither"
SCENARIOS = (SCENARIO_NOMINAL, SCENARIO_DELAY_COMPENSATED,
             SCENARIO_DELAY_UNCOMPENSATED, SCENARIO_DIRICHLET_ORACLE,
             SCENARIO_AVERAGE_TARGET, SCENARIO_OPEN_LOOP_DITHER)

VALIDITY_TOLERANCE = 1e-9

TRACE_HEADER = "t,s,y,U,S,theta,G,Hhat,T0,min_superheat,valid"


class ParseError(ValueError):
    """Malformed config text; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class WindowTooShortError(ValueError):
    """Metrics window holds fewer than 3 probing periods."""


@dataclass(frozen=True)
class SimConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    map: MapConfig = field(default_factory=MapConfig)
    dither: DitherConfig = field(default_factory=DitherConfig)
    t_end: float = 100.0
    scenario: str = SCENARIO_DELAY_COMPENSATED
    seed: int = 0
    output_stride: int = 1


@dataclass(frozen=True)
class TraceRecord:
    t: float
    s: float
    y: float
    U: float
    S: float
    theta: float
    G: float
    Hhat: float
    T0: float
    min_superheat: float
    valid: bool


@dataclass(frozen=True)
class SettleMetrics:
    window: tuple[float, float]
    s_residual_max: float
    s_residual_mean: float
    y_residual_max: float
    y_residual_mean: float
    u_residual_mean: float
    dither_amplitude_fit: float


@dataclass
class AuxLog:
    """Per-sample internals kept for consistency checks and field statistics."""
    t: np.ndarray
    U: np.ndarray
    G: np.ndarray
    Hhat: np.ndarray
    integ_u: np.ndarray
    predint: np.ndarray
    max_superheat: np.ndarray   # max over the grid of T - T_m


# ---------------------------------------------------------------------------
# configuration

_SECTION_TYPES = {
    "plant": plant.PlantConfig,
    "controller": controller.ControllerConfig,
    "map": controller.MapConfig,
    "dither": dither.DitherConfig,
}
_SIM_KEYS = {"t_end": float, "scenario": str, "seed": int, "output_stride": int}


def _field_types() -> dict[str, type]:
    table: dict[str, type] = {}
    for section, cls in _SECTION_TYPES.items():
        for f in fields(cls):
            table[f"{section}.{f.name}"] = {"float": float, "int": int, "str": str}[
                "int" if f.type == "int" else "str" if f.type == "str" else "float"]
    for key, typ in _SIM_KEYS.items():
        table[f"sim.{key}"] = typ
    return table


_FIELD_TYPES = _field_types()


def _cast(key: str, raw: str, line_no: int):
    typ = _FIELD_TYPES[key]
    if typ is str:
        return raw
    try:
        if typ is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ParseError(line_no, f"{key} expects {typ.__name__}, got {raw!r}") from None


def parse_config_text(text: str, start_line: int = 1) -> dict[str, object]:
    """Raw ``section.key`` -> value mapping from config text."""
    values: dict[str, object] = {}
    for offset, raw_line in enumerate(text.splitlines()):
        line_no = start_line + offset
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, f"expected 'section.key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ParseError(line_no, f"unknown key {key!r}")
        values[key] = _cast(key, raw_value, line_no)
    return values


def _build_config(values: dict[str, object]) -> SimConfig:
    per_section: dict[str, dict[str, object]] = {s: {} for s in _SECTION_TYPES}
    sim_kwargs: dict[str, object] = {}
    for key, value in values.items():
        section, name = key.split(".", 1)
        if section == "sim":
            sim_kwargs[name] = value
        else:
            per_section[section][name] = value
    cfg = SimConfig(
        plant=plant.PlantConfig(**per_section["plant"]),
        controller=controller.ControllerConfig(**per_section["controller"]),
        map=controller.MapConfig(**per_section["map"]),
        dither=dither.DitherConfig(**per_section["dither"]),
        **sim_kwargs,
    )
    return _resolve_scenario(cfg, explicit=set(values))


def _resolve_scenario(cfg: SimConfig, explicit: set[str] = frozenset()) -> SimConfig:
    """Wire the scenario's cross-field conventions and validate the result.

    The scenario is the master switch: it fixes the controller mode, the
    probing-clock advance (the delay D in both delay modes, so the probing
    signal arrives phase-matched; the uncompensated scenario differs from
    the compensated one only by the missing predictor term) and, for the
    nominal scenario, forces D to 0.
    """
    if cfg.scenario not in SCENARIOS:
        raise plant.ConfigurationError(f"unknown scenario {cfg.scenario!r}")
    ctrl = cfg.controller
    dit = cfg.dither
    if cfg.scenario == SCENARIO_NOMINAL:
        ctrl = replace(ctrl, mode=controller.MODE_NOMINAL, D=0.0)
        advance = 0.0
    elif cfg.scenario == SCENARIO_DELAY_COMPENSATED:
        ctrl = replace(ctrl, mode=controller.MODE_DELAY_COMPENSATED)
        advance = ctrl.D
    elif cfg.scenario == SCENARIO_DELAY_UNCOMPENSATED:
        ctrl = replace(ctrl, mode=controller.MODE_DELAY_UNCOMPENSATED)
        advance = ctrl.D
    else:
        advance = dit.advance   # plant-only scenarios leave the dither as-is
    if "controller.mode" in explicit and cfg.controller.mode != ctrl.mode:
        raise plant.ConfigurationError(
            f"controller.mode={cfg.controller.mode!r} conflicts with "
            f"scenario {cfg.scenario!r}")
    if "dither.advance" in explicit and dit.advance != advance:
        raise plant.ConfigurationError(
            f"dither.advance={dit.advance} conflicts with scenario "
            f"{cfg.scenario!r} (expected {advance})")
    # the probing parameters follow the controller unless explicitly pinned
    for name in ("a", "omega"):
        want = getattr(ctrl, name)
        if f"dither.{name}" in explicit and getattr(dit, name) != want:
            raise plant.ConfigurationError(
                f"dither.{name}={getattr(dit, name)} conflicts with "
                f"controller.{name}={want}")
        dit = replace(dit, **{name: want})
    dit = replace(dit, advance=advance)
    resolved = replace(cfg, controller=ctrl, dither=dit)
    validate_sim_config(resolved)
    return resolved


def validate_sim_config(cfg: SimConfig) -> None:
    try:
        cfg.plant.validate()
        cfg.controller.validate()
        cfg.map.validate()
        cfg.dither.validate()
    except ValueError as exc:
        raise plant.ConfigurationError(str(exc)) from exc
    if not cfg.t_end > 0:
        raise plant.ConfigurationError(f"t_end must be positive, got {cfg.t_end}")
    if cfg.output_stride < 1:
        raise plant.ConfigurationError(f"output_stride must be >= 1, got {cfg.output_stride}")
    if cfg.scenario not in SCENARIOS:
        raise plant.ConfigurationError(f"unknown scenario {cfg.scenario!r}")
    if not cfg.map.theta_star < cfg.plant.L:
        raise plant.ConfigurationError(
            f"map.theta_star={cfg.map.theta_star} must lie below plant.L={cfg.plant.L}")
    if cfg.dither.a != cfg.controller.a or cfg.dither.omega != cfg.controller.omega:
        raise plant.ConfigurationError(
            "dither (a, omega) must match controller (a, omega)")


def load_config(text: str, overrides: list[str] | None = None) -> SimConfig:
    """SimConfig from config text plus optional override lines (last wins)."""
    values = parse_config_text(text)
    for i, line in enumerate(overrides or []):
        values.update(parse_config_text(line, start_line=i + 1))
    return _build_config(values)


def default_config() -> SimConfig:
    return _resolve_scenario(SimConfig())


# ---------------------------------------------------------------------------
# scenario execution

def _grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n + 1)


def _record(t, state, y, u, s_t, theta, g, hh, band) -> TraceRecord:
    report = plant.validity_check(state, VALIDITY_TOLERANCE, band=band)
    return TraceRecord(t=t, s=state.s, y=y, U=u, S=s_t, theta=theta, G=g, Hhat=hh,
                       T0=float(state.temp[0]), min_superheat=report.min_superheat,
                       valid=not report.violated)


def _run_closed_loop(cfg: SimConfig, capture_aux: bool):
    pcfg, ccfg, mcfg = cfg.plant, cfg.controller, cfg.map
    open_loop = cfg.scenario == SCENARIO_OPEN_LOOP_DITHER
    es_active = (not open_loop) and cfg.dither.a > 0
    inject = cfg.dither.a > 0
    meas_dither = replace(cfg.dither, advance=0.0)

    state = plant.init_state(pcfg)
    eta = _grid(pcfg.grid_n)
    if open_loop:
        # Start on the probing field itself so the front keeps tracking the
        # generated sinusoid instead of riding a superheat dump.
        state.temp = pcfg.T_m + dither.beta_profile(meas_dither, eta * pcfg.s_0, 0.0)
        state.temp[-1] = pcfg.T_m
        state.s_dot = -pcfg.beta_phys * plant.interface_gradient(state)

    ctrl = controller.make_controller_state(ccfg)
    n_delay = ccfg.delay_samples if ccfg.mode != controller.MODE_NOMINAL else 0
    fifo: deque[float] = deque([0.0] * n_delay)
    band = (pcfg.s_0, mcfg.theta_star)
    dt = ccfg.dt_ctrl
    n_steps = int(round(cfg.t_end / dt))
    rows: list[TraceRecord] = []
    aux_rows: list[tuple[float, ...]] = []

    for k in range(n_steps):
        t = k * dt
        y = controller.static_map(state.s, mcfg)
        try:
            if es_active:
                beta_grid = dither.beta_profile(meas_dither, eta * state.s, t)
                u_meas = (state.temp - pcfg.T_m) - beta_grid
                integ_u = state.s * float(np.trapezoid(u_meas, dx=1.0 / pcfg.grid_n))
                predint = controller.predictor_integral(ctrl, ccfg)
                u_out = controller.control_update(ctrl, y, integ_u, ccfg)
                g, hh = ctrl.g_est, ctrl.h_est
            else:
                integ_u = predint = 0.0
                u_out = g = hh = 0.0
            s_t = dither.dither_signal(cfg.dither, t) if inject else 0.0
        except dither.TruncationError as exc:
            # The front left the probing field's convergence region; the
            # loop has escaped its design envelope and the run is over.
            raise plant.IntegrationFailureError(
                t, f"front left the probing-series region at t={t:.6g} "
                   f"(s={state.s:.4g}): {exc}") from exc
        theta = u_out + s_t
        if n_delay > 0:
            fifo.append(theta)
            applied = fifo.popleft()
        else:
            applied = theta
        rows.append(_record(t, state, y, u_out, s_t, theta, g, hh, band))
        if capture_aux:
            aux_rows.append((t, u_out, g, hh, integ_u, predint,
                             float(np.max(state.temp)) - pcfg.T_m))
        state = plant.step(state, pcfg, applied, dt)

    if capture_aux:
        return rows, _aux_from_rows(aux_rows)
    return rows, None


def _aux_from_rows(aux_rows):
    cols = np.array(aux_rows, dtype=float).reshape(len(aux_rows), 7).T
    return AuxLog(t=cols[0], U=cols[1], G=cols[2], Hhat=cols[3],
                  integ_u=cols[4], predint=cols[5], max_superheat=cols[6])


def _run_dirichlet(cfg: SimConfig):
    pcfg = cfg.plant
    if pcfg.bc_mode != plant.BC_DIRICHLET_TEMPERATURE:
        pcfg = replace(pcfg, bc_mode=plant.BC_DIRICHLET_TEMPERATURE)
    if not pcfg.T_0 > pcfg.T_m:
        raise plant.ConfigurationError("dirichlet-oracle needs T_0 > T_m")
    sim_spec = similarity_spec_for(pcfg)
    state = plant.init_state(pcfg)
    state.temp = oracles.similarity_profile(
        sim_spec, _grid(pcfg.grid_n) * pcfg.s_0, 0.0, pcfg.T_0, pcfg.T_m, pcfg.alpha)
    state.temp[-1] = pcfg.T_m
    state.s_dot = -pcfg.beta_phys * plant.interface_gradient(state)
    dt = cfg.controller.dt_ctrl
    n_steps = int(round(cfg.t_end / dt))
    band = (pcfg.s_0, cfg.map.theta_star)
    rows = []
    for k in range(n_steps):
        t = k * dt
        y = controller.static_map(state.s, cfg.map)
        rows.append(_record(t, state, y, 0.0, 0.0, pcfg.T_0, 0.0, 0.0, band))
        state = plant.step(state, pcfg, pcfg.T_0, dt)
    rows.append(_record(n_steps * dt, state, controller.static_map(state.s, cfg.map),
                        0.0, 0.0, pcfg.T_0, 0.0, 0.0, band))
    return rows, None


def similarity_spec_for(pcfg: plant.PlantConfig) -> oracles.SimilaritySpec:
    """Similarity parameters matching a dirichlet-oracle plant config."""
    stefan_number = (pcfg.beta_phys / pcfg.alpha) * (pcfg.T_0 - pcfg.T_m)
    return oracles.make_similarity_spec(stefan_number, pcfg.s_0, pcfg.alpha)


def _run_average(cfg: SimConfig):
    spec = backstepping.KernelSpec(k_bar=cfg.controller.K * cfg.map.hessian,
                                   s_star=cfg.map.theta_star)
    rng = np.random.default_rng(cfg.seed)
    st = backstepping.random_average_state(rng, spec, cfg.plant.grid_n)
    dt = cfg.controller.dt_ctrl
    n_steps = int(round(cfg.t_end / dt))
    rows = []
    for k in range(n_steps):
        y = controller.static_map(st.s_av, cfg.map)
        rows.append(TraceRecord(
            t=k * dt, s=st.s_av, y=y, U=st.u_filt, S=0.0, theta=st.u_filt,
            G=0.0, Hhat=0.0, T0=float(st.u_av[0]),
            min_superheat=float(np.min(st.u_av)), valid=True))
        st = backstepping.average_system_step(st, dt, spec)
    return rows, None


def run_scenario(cfg: SimConfig, capture_aux: bool = False):
    """Run one scenario; returns (trace, metrics) and optionally the aux log.

    Metrics always come from the full-rate trace; output_stride only thins
    the returned rows.  Integration failures propagate with the failing time.
    The scenario's cross-field conventions (controller mode, probing-clock
    advance, D forced to 0 in the nominal scenario) are applied here, so the
    scenario field is authoritative.
    """
    cfg = _resolve_scenario(cfg)
    if cfg.scenario == SCENARIO_DIRICHLET_ORACLE:
        rows, aux = _run_dirichlet(cfg)
    elif cfg.scenario == SCENARIO_AVERAGE_TARGET:
        rows, aux = _run_average(cfg)
    else:
        rows, aux = _run_closed_loop(cfg, capture_aux)
    try:
        metrics = settle_metrics(rows, cfg.map, window_fraction=0.2)
    except WindowTooShortError:
        metrics = settle_metrics(rows, cfg.map, window_fraction=0.2,
                                 fit_amplitude=False)
    if cfg.output_stride > 1:
        rows = rows[:: cfg.output_stride]
    if capture_aux:
        return rows, metrics, aux
    return rows, metrics


# ---------------------------------------------------------------------------
# metrics

def settle_metrics(trace: list[TraceRecord], mcfg: controller.MapConfig,
                   window_fraction: float = 0.2,
                   fit_amplitude: bool = True) -> SettleMetrics:
    """Residuals and probing-amplitude fit over the trailing window.

    With fit_amplitude=False the oscillation fit is skipped and reported as
    NaN; run_scenario falls back to that for traces with no oscillation to
    fit (pure-drift scenarios).
    """
    if not trace:
        raise ValueError("trace is empty")
    t = np.array([r.t for r in trace])
    s = np.array([r.s for r in trace])
    y = np.array([r.y for r in trace])
    u = np.array([r.U for r in trace])
    t_lo = t[-1] - window_fraction * (t[-1] - t[0])
    mask = t >= t_lo
    s_res = np.abs(s[mask] - mcfg.theta_star)
    y_res = np.abs(y[mask] - mcfg.y_star)
    amp = _fundamental_amplitude(t[mask], s[mask]) if fit_amplitude else float("nan")
    return SettleMetrics(
        window=(float(t_lo), float(t[-1])),
        s_residual_max=float(np.max(s_res)),
        s_residual_mean=float(np.mean(s_res)),
        y_residual_max=float(np.max(y_res)),
        y_residual_mean=float(np.mean(y_res)),
        u_residual_mean=float(np.mean(np.abs(u[mask]))),
        dither_amplitude_fit=amp,
    )


def _fundamental_amplitude(t: np.ndarray, s: np.ndarray) -> float:
    """Least-squares amplitude of the dominant oscillation of s on the window.

    The FFT peak of the detrended signal locates the fundamental to within
    one bin; a frequency scan around that bin then picks the best-fitting
    A*sin + B*cos + C model (the bin quantization alone would bias the
    amplitude for windows that do not hold a whole number of periods).
    """
    if t.shape[0] < 4:
        raise WindowTooShortError("need at least 4 samples to fit an oscillation")
    # Remove the linear drift first so a settling transient cannot swamp the
    # oscillation peak in the spectrum.
    drift = np.polynomial.polynomial.polyfit(t - t[0], s, 1)
    sw = s - np.polynomial.polynomial.polyval(t - t[0], drift)
    scale = max(1.0, float(np.max(np.abs(s))))
    if float(np.max(np.abs(sw))) < 1e-12 * scale:
        return 0.0
    spectrum = np.abs(np.fft.rfft(sw))
    if spectrum.shape[0] < 2:
        raise WindowTooShortError("window too short to resolve any oscillation")
    k_peak = int(np.argmax(spectrum[1:])) + 1
    if k_peak < 3:
        raise WindowTooShortError(
            f"fewer than 3 oscillation periods fit the window (peak bin {k_peak})")
    span = t[-1] - t[0]
    bin_width = 2.0 * math.pi / span
    best = (math.inf, 0.0)
    ones = np.ones_like(t)
    for omega_fit in np.linspace((k_peak - 1) * bin_width, (k_peak + 1) * bin_width, 81):
        basis = np.column_stack([np.sin(omega_fit * t), np.cos(omega_fit * t), ones])
        coef, residual, *_ = np.linalg.lstsq(basis, s, rcond=None)
        err = float(residual[0]) if residual.size else 0.0
        if err < best[0]:
            best = (err, float(math.hypot(coef[0], coef[1])))
    return best[1]


# ---------------------------------------------------------------------------
# trace I/O

def _format_value(value: float) -> str:
    return f"{value:.12g}"


def write_trace(trace: list[TraceRecord], destination) -> int:
    """Write the trace as CSV (12 significant digits, LF endings); returns rows written."""
    own = isinstance(destination, (str, bytes))
    try:
        handle = open(destination, "w", newline="\n") if own else destination
    except OSError as exc:
        raise OSError(f"cannot write trace to {destination!r}: {exc}") from exc
    try:
        handle.write(TRACE_HEADER + "\n")
        for r in trace:
            handle.write(",".join([
                _format_value(r.t), _format_value(r.s), _format_value(r.y),
                _format_value(r.U), _format_value(r.S), _format_value(r.theta),
                _format_value(r.G), _format_value(r.Hhat), _format_value(r.T0),
                _format_value(r.min_superheat), str(int(r.valid)),
            ]) + "\n")
    finally:
        if own:
            handle.close()
    return len(trace)


def read_trace(source) -> list[TraceRecord]:
    """Parse a trace CSV produced by write_trace."""
    own = isinstance(source, (str, bytes))
    handle = open(source, "r", newline="") if own else source
    try:
        lines = handle.read().splitlines()
    finally:
        if own:
            handle.close()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("missing or unexpected trace header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 11:
            raise ValueError(f"malformed trace row: {line!r}")
        rows.append(TraceRecord(
            t=float(parts[0]), s=float(parts[1]), y=float(parts[2]),
            U=float(parts[3]), S=float(parts[4]), theta=float(parts[5]),
            G=float(parts[6]), Hhat=float(parts[7]), T0=float(parts[8]),
            min_superheat=float(parts[9]), valid=bool(int(parts[10])),
        ))
    return rows


def metrics_block(metrics: SettleMetrics) -> str:
    """Flat key = value text block."""
    lines = [
        f"window_start = {_format_value(metrics.window[0])}",
        f"window_end = {_format_value(metrics.window[1])}",
        f"s_residual_max = {_format_value(metrics.s_residual_max)}",
        f"s_residual_mean = {_format_value(metrics.s_residual_mean)}",
        f"y_residual_max = {_format_value(metrics.y_residual_max)}",
        f"y_residual_mean = {_format_value(metrics.y_residual_mean)}",
        f"u_residual_mean = {_format_value(metrics.u_residual_mean)}",
        f"dither_amplitude_fit = {_format_value(metrics.dither_amplitude_fit)}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# predictor consistency

@dataclass(frozen=True)
class PredictorReport:
    n_checked: int
    max_predictor_dev: float
    max_filter_dev: float


def predictor_equivalence_report(cfg: SimConfig, n_times: int = 100,
                                 aux: AuxLog | None = None) -> PredictorReport:
    """Replay-check of the delay-compensated drive bookkeeping.

    At sampled instants of a converged run, the ring-buffer predictor
    integral is recomputed independently from the logged drive history
    (same trapezoid rule on the trailing delay window) and the logged drive
    is reconstructed through the exact filter update from the logged
    estimates.  Both must agree to quadrature tolerance.  Pass a captured
    aux log to reuse an existing run.
    """
    if cfg.scenario != SCENARIO_DELAY_COMPENSATED:
        raise ValueError("the predictor check needs the delay-compensated scenario")
    if aux is None:
        _, _, aux = run_scenario(cfg, capture_aux=True)
    ccfg = cfg.controller
    n_delay = ccfg.delay_samples
    dt = ccfg.dt_ctrl
    n = aux.t.shape[0]
    first = max(n_delay + 2, int(ccfg.settle_time / dt) + n_delay + 2, n // 2)
    ks = np.unique(np.linspace(first, n - 1, n_times).astype(int))
    decay = math.exp(-ccfg.c * dt)
    max_pred = 0.0
    max_filt = 0.0
    for k in ks:
        window = aux.U[k - n_delay - 1: k]   # the N+1 outputs available at sample k
        direct = dt * (np.sum(window) - 0.5 * (window[0] + window[-1]))
        max_pred = max(max_pred, abs(direct - aux.predint[k]))
        v = -ccfg.K * (aux.G[k] + aux.Hhat[k] * direct + aux.Hhat[k] * aux.integ_u[k])
        rebuilt = decay * aux.U[k - 1] + (1.0 - decay) * v
        max_filt = max(max_filt, abs(rebuilt - aux.U[k]))
    return PredictorReport(n_checked=len(ks), max_predictor_dev=float(max_pred),
                           max_filter_dev=float(max_filt))
