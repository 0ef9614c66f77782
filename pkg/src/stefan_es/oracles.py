"""Independent reference computations for validating the solvers.

The classical similarity solution of the one-phase melting problem under a
constant boundary temperature gives a closed-form front trajectory
s(t) = 2*lambda*sqrt(alpha*t + t_offset); the root lambda of its
transcendental equation parameterizes everything.  A finite-difference
heat-equation residual probe validates analytic field constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf  # vendored rational approximation, < 1e-15 error


@dataclass(frozen=True)
class SimilaritySpec:
    stefan_number: float
    lam: float
    t_offset: float   # in alpha*t units, chosen so the front starts at s_0

    def validate(self) -> None:
        if not self.stefan_number > 0:
            raise ValueError(f"Stefan number must be positive, got {self.stefan_number}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        residual = _transcendental(self.lam) - self.stefan_number / math.sqrt(math.pi)
        if abs(residual) > 1e-12:
            raise ValueError(f"lambda does not solve the transcendental equation "
                             f"(residual {residual:.3e})")


def _transcendental(lam: float) -> float:
    return lam * math.exp(lam * lam) * float(erf(lam))


def similarity_lambda(stefan_number: float) -> float:
    """Root of lambda*exp(lambda^2)*erf(lambda) = St/sqrt(pi), by bisection."""
    if not stefan_number > 0:
        raise ValueError(f"Stefan number must be positive, got {stefan_number}")
    target = stefan_number / math.sqrt(math.pi)
    lo, hi = 1e-8, 5.0
    if _transcendental(lo) - target > 0 or _transcendental(hi) - target < 0:
        raise ValueError(f"Stefan number {stefan_number} outside the bisection bracket")
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if _transcendental(mid) - target <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_similarity_spec(stefan_number: float, s_0: float, alpha: float = 1.0) -> SimilaritySpec:
    """Spec with t_offset chosen so the similarity front equals s_0 at t = 0."""
    lam = similarity_lambda(stefan_number)
    t_offset = (s_0 / (2.0 * lam)) ** 2   # alpha*t units; alpha folds in below
    return SimilaritySpec(stefan_number=stefan_number, lam=lam, t_offset=t_offset)


def similarity_interface(spec: SimilaritySpec, t: float, alpha: float = 1.0) -> float:
    """Front position 2*lambda*sqrt(alpha*t + t_offset)."""
    return 2.0 * spec.lam * math.sqrt(alpha * t + spec.t_offset)


def similarity_profile(spec: SimilaritySpec, x: np.ndarray, t: float,
                       t_boundary: float, t_melt: float, alpha: float = 1.0) -> np.ndarray:
    """Temperature profile of the similarity solution at time t."""
    tau = alpha * t + spec.t_offset
    arg = np.asarray(x, dtype=float) / (2.0 * math.sqrt(tau))
    return t_boundary - (t_boundary - t_melt) * erf(arg) / erf(spec.lam)


def fd_residual(field: Callable[[float, float], float],
                points: Iterable[Sequence[float]],
                steps: tuple[float, float] = (1e-4, 1e-4)) -> float:
    """Max |f_t - f_xx| over the points, by central differences."""
    hx, ht = steps[0], steps[1]
    worst = 0.0
    for x, t in points:
        f_t = (field(x, t + ht) - field(x, t - ht)) / (2.0 * ht)
        f_xx = (field(x + hx, t) - 2.0 * field(x, t) + field(x - hx, t)) / (hx * hx)
        worst = max(worst, abs(f_t - f_xx))
    return worst
