"""Probing-signal generation by exact series solution of the heat equation.

The additive probing signal S(t) is the boundary flux that makes a
diffusion-generated sinusoid xi(t) = a*sin(omega*t) appear at the far end
of the actuation dynamics.  It comes from the classical heat-polynomial
series

    beta(x, t) = sum_i 1/(2i)! * d^i/dt^i [x - xi(t)]^(2i),      i >= 1,

which solves beta_t = beta_xx exactly with beta(xi(t), t) = 0 and
beta_x(xi(t), t) = -a*omega*cos(omega*t).  (The i = 0 term of the closed
form is a constant and is dropped; the boundary-anchored coefficient
series below starts at zero.)  S(t) = -beta_x(0, t), optionally evaluated
on a clock advanced by a known input delay.

Time derivatives are mechanized with truncated Taylor-jet arithmetic:
products of jets are truncated convolutions, so every derivative is exact
to machine precision with no expression swell.  The same field can also be
reconstructed from the coefficient recursion

    a_0 = 0,  a_1 = -xi'(t),  a_i = a_{i-2}' - a_{i-1} * xi'(t),

with beta = sum_i a_i(t)/i! * (x - xi)^i; both routes are kept as mutual
cross-checks and the recursion route doubles as a fast vectorized profile
evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TINY = 1e-300


class TruncationError(RuntimeError):
    """Series cap reached while terms are still above the truncation tolerance."""


@dataclass(frozen=True)
class DitherConfig:
    a: float = 0.1              # perturbation amplitude
    omega: float = 10.0         # perturbation frequency [rad/s]
    advance: float = 0.0        # clock advance (0, or the input delay D)
    max_order: int = 24         # cap on the series index i
    term_tol: float = 1e-10     # relative magnitude below which the series stops

    def validate(self) -> None:
        if self.a < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.a}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.max_order < 2:
            raise ValueError(f"max_order must be >= 2, got {self.max_order}")
        if not self.term_tol > 0:
            raise ValueError(f"term_tol must be positive, got {self.term_tol}")


@dataclass(frozen=True)
class TimeJet:
    """Derivative values f(t), f'(t), ..., f^(J)(t) of a scalar signal at one instant."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) < 1:
            raise ValueError("a jet needs at least the order-0 value")
        if not all(math.isfinite(c) for c in self.coefficients):
            raise ValueError("jet coefficients must be finite")

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1


def _factorials(n: int) -> np.ndarray:
    out = np.empty(n + 1)
    out[0] = 1.0
    for k in range(1, n + 1):
        out[k] = out[k - 1] * k
    return out


def _xi_taylor(cfg: DitherConfig, t: float, order: int, shift: int = 0) -> np.ndarray:
    """Taylor coefficients (derivatives / k!) of the shift-th derivative of xi."""
    tp = cfg.omega * (t + cfg.advance)
    k = np.arange(order + 1)
    raw = cfg.a * cfg.omega ** (k + shift) * np.sin(tp + (k + shift) * (np.pi / 2.0))
    return raw / _factorials(order)


def _mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[: order + 1]


def _ddt(c: np.ndarray) -> np.ndarray:
    """Taylor coefficients of the time derivative (drops one order)."""
    k = np.arange(1, c.shape[0])
    return c[1:] * k


def xi(cfg: DitherConfig, t: float) -> float:
    """Reference sinusoid a*sin(omega*(t + advance))."""
    return cfg.a * math.sin(cfg.omega * (t + cfg.advance))


def xi_jet(cfg: DitherConfig, t: float, order: int) -> TimeJet:
    """Exact derivatives of xi through the given order (cyclic sin/cos pattern)."""
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    tp = cfg.omega * (t + cfg.advance)
    k = np.arange(order + 1)
    raw = cfg.a * cfg.omega ** k * np.sin(tp + k * (np.pi / 2.0))
    return TimeJet(coefficients=tuple(float(v) for v in raw))


def beta_eval(cfg: DitherConfig, x: float, t: float) -> float:
    """Probing field beta(x, t) via the heat-polynomial series.

    Term i is the i-th time derivative of (x - xi)^(2i) scaled by 1/(2i)!,
    computed by jet arithmetic.  Truncation follows the configured relative
    tolerance and order cap.
    """
    cfg.validate()
    fact = _factorials(2 * cfg.max_order)
    g = -_xi_taylor(cfg, t, cfg.max_order)
    g[0] += x
    g2 = _mul(g, g, cfg.max_order)
    pw = g2.copy()                    # holds g^(2i)
    total = 0.0
    scale = _TINY
    for i in range(1, cfg.max_order + 1):
        term = fact[i] * pw[i] / fact[2 * i]
        total += term
        scale = max(scale, abs(term))
        if i >= 2 and abs(term) < cfg.term_tol * scale:
            return total
        pw = _mul(pw, g2, cfg.max_order)
    raise TruncationError(
        f"beta series still above tolerance at order {cfg.max_order} (x={x:.4g}, t={t:.4g})")


def dither_signal(cfg: DitherConfig, t: float) -> float:
    """Probing signal S(t) = -beta_x(0, t) by term-wise spatial differentiation.

    The x-derivative of series term i carries (x - xi)^(2i-1) and a 1/(2i-1)!
    weight; only odd powers of -xi survive at x = 0.
    """
    cfg.validate()
    fact = _factorials(2 * cfg.max_order)
    g = -_xi_taylor(cfg, t, cfg.max_order)   # Taylor of (0 - xi)
    g2 = _mul(g, g, cfg.max_order)
    pw = g.copy()                            # holds g^(2i-1)
    total = 0.0
    scale = _TINY
    for i in range(1, cfg.max_order + 1):
        term = -fact[i] * pw[i] / fact[2 * i - 1]
        total += term
        scale = max(scale, abs(term))
        if i >= 2 and abs(term) < cfg.term_tol * scale:
            return total
        pw = _mul(pw, g2, cfg.max_order)
    raise TruncationError(
        f"dither series still above tolerance at order {cfg.max_order} (t={t:.4g})")


def _coefficient_jets(cfg: DitherConfig, t: float, count: int) -> list[np.ndarray]:
    """Taylor jets of the recursion coefficients a_0 .. a_{count-1}."""
    top = count + 2
    xidot = _xi_taylor(cfg, t, top, shift=1)
    jets = [np.zeros(top + 1), -xidot[: top]]
    for i in range(2, count):
        k = top - i
        d = _ddt(jets[i - 2])[: k + 1]
        m = _mul(jets[i - 1], xidot, k)
        jets.append(d - m)
    return jets[:count]


def series_coefficients(cfg: DitherConfig, t: float, count: int) -> np.ndarray:
    """Values a_0(t) .. a_{count-1}(t) of the boundary-anchored series coefficients."""
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    cfg.validate()
    return np.array([jet[0] for jet in _coefficient_jets(cfg, t, count)])


def beta_profile(cfg: DitherConfig, x: np.ndarray, t: float) -> np.ndarray:
    """Vectorized beta(x, t) through the coefficient recursion.

    Equivalent to beta_eval on each sample (cross-checked in tests) but one
    coefficient sweep covers a whole grid, which is what the closed-loop
    runner needs every control sample.
    """
    cfg.validate()
    count = 2 * cfg.max_order + 1
    vals = series_coefficients(cfg, t, count)
    b = vals / _factorials(count - 1)
    d = np.asarray(x, dtype=float) - xi(cfg, t)
    dmax = float(np.max(np.abs(d))) if d.size else 0.0
    contrib = np.abs(b) * dmax ** np.arange(count)
    scale = max(float(np.max(contrib)), _TINY)
    if float(np.max(contrib[-2:])) > cfg.term_tol * scale:
        raise TruncationError(
            f"profile series still above tolerance at order {count - 1} "
            f"(|x-xi| up to {dmax:.4g}, t={t:.4g})")
    return np.polynomial.polynomial.polyval(d, b)


def dither_signal_fast(cfg: DitherConfig, t: float) -> float:
    """S(t) from the coefficient recursion: -sum_i a_i/(i-1)! * (-xi)^(i-1).

    Agrees with dither_signal to roundoff; used where the coefficients are
    computed anyway.
    """
    cfg.validate()
    count = 2 * cfg.max_order + 1
    vals = series_coefficients(cfg, t, count)
    b = vals / _factorials(count - 1)
    db = b[1:] * np.arange(1, count)
    return float(-np.polynomial.polynomial.polyval(-xi(cfg, t), db))
