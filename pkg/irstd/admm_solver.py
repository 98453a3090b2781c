"""ADMM solver for K = B + T + N with an L2,1 background, ASSTV smoothing and a sparse target.

One sweep updates, in order: Z (L2,1 prox through TLNMTQR), B (FFT-diagonalized
linear solve), T (soft threshold), V1..V3 (soft thresholds of the differences
of B), N (closed form), the five multipliers and the penalty mu.
"""
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import torch

from . import defaults
from . import tensor_core as tc
from .asstv import Axis, OperatorSpectrum, diff, operator_spectrum
from .errors import ConfigError, NonFiniteError
from .tlnm import tlnmtqr

logger = logging.getLogger(__name__)

_CFG = defaults.SOLVER_CONFIG


@dataclass(frozen=True)
class SolverParams:
    r: int = _CFG["R"]
    frames_per_window: int = _CFG["FRAMES_PER_WINDOW"]
    h_tuning: float = _CFG["H_TUNING"]
    # None: derived per window as H / sqrt(max(n1, n2) * L)
    lambda_s: Optional[float] = None
    lambda_tv: float = _CFG["LAMBDA_TV"]
    lambda3: float = _CFG["LAMBDA3"]
    delta: float = _CFG["DELTA"]
    mu0: float = _CFG["MU0"]
    rho: float = _CFG["RHO"]
    mu_max: float = _CFG["MU_MAX"]
    xi: float = _CFG["XI"]
    inner_iters: int = _CFG["INNER_ITERS"]
    max_outer_iters: int = _CFG["MAX_OUTER_ITERS"]
    trifactor_iters: int = _CFG["TRIFACTOR_ITERS"]
    trifactor_eps: float = _CFG["TRIFACTOR_EPS"]
    plain_residual: bool = _CFG["PLAIN_RESIDUAL"]

    def __post_init__(self):
        positive = {
            "h_tuning": self.h_tuning, "lambda_tv": self.lambda_tv, "lambda3": self.lambda3,
            "delta": self.delta, "mu0": self.mu0, "rho": self.rho, "mu_max": self.mu_max,
            "xi": self.xi, "trifactor_eps": self.trifactor_eps,
        }
        if self.lambda_s is not None:
            positive["lambda_s"] = self.lambda_s
        for name, value in positive.items():
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a positive finite number, got {value}")
        counts = {
            "r": self.r, "frames_per_window": self.frames_per_window, "inner_iters": self.inner_iters,
            "max_outer_iters": self.max_outer_iters, "trifactor_iters": self.trifactor_iters,
        }
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value}")
        if not self.rho > 1:
            raise ConfigError(f"rho must be > 1, got {self.rho}")
        if not self.mu0 < self.mu_max:
            raise ConfigError(f"mu0 ({self.mu0}) must be smaller than mu_max ({self.mu_max})")

    def resolve(self, shape) -> "SolverParams":
        """Fill in lambda_s for a window tensor of the given shape."""
        if self.lambda_s is not None:
            return self
        n1, n2, n3 = shape
        return replace(self, lambda_s=self.h_tuning / math.sqrt(max(n1, n2) * n3))


@dataclass(frozen=True)
class SolverState:
    b: tc.Tensor3
    t: tc.Tensor3
    n: tc.Tensor3
    z: tc.Tensor3
    v1: tc.Tensor3
    v2: tc.Tensor3
    v3: tc.Tensor3
    y1: tc.Tensor3
    y2: tc.Tensor3
    y3: tc.Tensor3
    y4: tc.Tensor3
    y5: tc.Tensor3
    mu: float
    k: int = 0
    residual_history: Tuple[float, ...] = field(default_factory=tuple)
    mu_history: Tuple[float, ...] = field(default_factory=tuple)

    @classmethod
    def initial(cls, shape, mu0: float) -> "SolverState":
        z = tc.zeros(*shape)
        return cls(b=z, t=z, n=z, z=z, v1=z, v2=z, v3=z, y1=z, y2=z, y3=z, y4=z, y5=z, mu=mu0)

    def tensors(self):
        return {
            "B": self.b, "T": self.t, "N": self.n, "Z": self.z,
            "V1": self.v1, "V2": self.v2, "V3": self.v3,
            "y1": self.y1, "y2": self.y2, "y3": self.y3, "y4": self.y4, "y5": self.y5,
        }


@dataclass(frozen=True)
class Decomposition:
    background: tc.Tensor3
    target: tc.Tensor3
    noise: tc.Tensor3
    iterations: int
    final_residual: float
    wall_seconds: float
    converged: bool
    residual_history: Tuple[float, ...]
    mu_history: Tuple[float, ...]

    def reconstruction_error(self, k: tc.Tensor3) -> float:
        knorm = tc.norm(k)
        if knorm == 0:
            return tc.norm(self.background + self.target + self.noise)
        return tc.norm(k - self.background - self.target - self.noise) / knorm


def soft_threshold(x: torch.Tensor, level: float) -> torch.Tensor:
    return torch.sign(x) * torch.clamp(x.abs() - level, min=0.0)


# --- Sub-updates ---

def update_z(b: tc.Tensor3, y2: tc.Tensor3, mu: float, p: SolverParams) -> tc.Tensor3:
    # prox of ||.||_{2,1} against (mu/2)||. - (b - y2/mu)||^2 has threshold 1/mu
    return tlnmtqr(
        b - y2 / mu, p.r, 1.0 / mu,
        outer_iters=p.inner_iters, trifactor_iters=p.trifactor_iters, eps=p.trifactor_eps,
    )


def update_b(state: SolverState, k_tensor: tc.Tensor3, spectrum: OperatorSpectrum) -> tc.Tensor3:
    if spectrum.shape != tuple(k_tensor.shape):
        raise ValueError(f"spectrum shape {spectrum.shape} does not match K {tuple(k_tensor.shape)}")
    mu = state.mu
    lk = k_tensor - state.t - state.n + state.y1 / mu + state.z + state.y2 / mu
    theta = (
        diff(state.v1 + state.y3 / mu, Axis.HORIZONTAL, adjoint=True)
        + diff(state.v2 + state.y4 / mu, Axis.VERTICAL, adjoint=True)
        + diff(state.v3 + state.y5 / mu, Axis.TEMPORAL, adjoint=True)
    )
    # Denominator is >= 2 everywhere
    return tc.ifft3(tc.fft3(lk + theta) / (2.0 + spectrum.gram))


def update_t(k_tensor, b, n, y1, mu: float, lambda_s: float) -> tc.Tensor3:
    return soft_threshold(k_tensor - b - n + y1 / mu, lambda_s / mu)


def update_v(b, y3, y4, y5, mu: float, lambda_tv: float, delta: float):
    level = lambda_tv / mu
    v1 = soft_threshold(diff(b, Axis.HORIZONTAL) - y3 / mu, level)
    v2 = soft_threshold(diff(b, Axis.VERTICAL) - y4 / mu, level)
    v3 = soft_threshold(diff(b, Axis.TEMPORAL) - y5 / mu, delta * level)
    return v1, v2, v3


def update_n(k_tensor, b, t, y1, mu: float, lambda3: float) -> tc.Tensor3:
    return (mu * (k_tensor - b - t) + y1) / (mu + 2.0 * lambda3)


def update_multipliers(state: SolverState, k_tensor: tc.Tensor3, p: SolverParams) -> SolverState:
    mu = state.mu
    b = state.b
    return replace(
        state,
        y1=state.y1 + mu * (k_tensor - b - state.t - state.n),
        y2=state.y2 + mu * (state.z - b),
        y3=state.y3 + mu * (state.v1 - diff(b, Axis.HORIZONTAL)),
        y4=state.y4 + mu * (state.v2 - diff(b, Axis.VERTICAL)),
        y5=state.y5 + mu * (state.v3 - diff(b, Axis.TEMPORAL)),
        mu=min(p.rho * mu, p.mu_max),
    )


def convergence_residual(state: SolverState, k_tensor: tc.Tensor3, plain: bool = False) -> float:
    """||K - B - T - N + y1/mu||_F^2 / ||K||_F^2, read before the multiplier update."""
    r = k_tensor - state.b - state.t - state.n
    if not plain:
        r = r + state.y1 / state.mu
    knorm2 = float(torch.linalg.vector_norm(k_tensor) ** 2)
    num = float(torch.linalg.vector_norm(r) ** 2)
    if knorm2 == 0:
        return num
    return num / knorm2


def objective(state: SolverState, k_tensor: tc.Tensor3, p: SolverParams) -> float:
    """Augmented Lagrangian at the current state (p must be resolved)."""
    lambda_s = p.resolve(k_tensor.shape).lambda_s
    b, mu = state.b, state.mu
    gaps = {
        "y1": k_tensor - b - state.t - state.n,
        "y2": state.z - b,
        "y3": state.v1 - diff(b, Axis.HORIZONTAL),
        "y4": state.v2 - diff(b, Axis.VERTICAL),
        "y5": state.v3 - diff(b, Axis.TEMPORAL),
    }
    value = (
        tc.norm(state.z, "l21")
        + lambda_s * tc.norm(state.t, "l1")
        + p.lambda3 * tc.norm(state.n) ** 2
        + p.lambda_tv * (tc.norm(state.v1, "l1") + tc.norm(state.v2, "l1") + p.delta * tc.norm(state.v3, "l1"))
    )
    multipliers = {"y1": state.y1, "y2": state.y2, "y3": state.y3, "y4": state.y4, "y5": state.y5}
    for name, gap in gaps.items():
        value += float((multipliers[name] * gap).sum()) + mu / 2 * tc.norm(gap) ** 2
    return value


def _check_state(state: SolverState) -> None:
    for name, t in state.tensors().items():
        try:
            tc.check_finite(t, name)
        except NonFiniteError as e:
            raise NonFiniteError(f"solver diverged at iteration {state.k}: {e}") from None


def solve(
    k_tensor: tc.Tensor3,
    p: SolverParams,
    callback: Optional[Callable[[SolverState, float], None]] = None,
) -> Decomposition:
    k_tensor = tc.as_tensor3(k_tensor, name="K")
    shape = tuple(k_tensor.shape)
    p = p.resolve(shape)
    spectrum = operator_spectrum(*shape)
    state = SolverState.initial(shape, p.mu0)

    logger.debug(
        f"solve: shape={shape}, r={p.r}, lambda_s={p.lambda_s:.4f}, lambda_tv={p.lambda_tv}, "
        f"lambda3={p.lambda3}, delta={p.delta}, mu0={p.mu0}, rho={p.rho}"
    )
    start = time.perf_counter()
    residual = math.inf
    converged = False
    for _ in range(p.max_outer_iters):
        mu = state.mu
        z = update_z(state.b, state.y2, mu, p)
        state = replace(state, z=z)
        b = update_b(state, k_tensor, spectrum)
        t = update_t(k_tensor, b, state.n, state.y1, mu, p.lambda_s)
        v1, v2, v3 = update_v(b, state.y3, state.y4, state.y5, mu, p.lambda_tv, p.delta)
        n = update_n(k_tensor, b, t, state.y1, mu, p.lambda3)
        state = replace(state, b=b, t=t, v1=v1, v2=v2, v3=v3, n=n)

        residual = convergence_residual(state, k_tensor, plain=p.plain_residual)
        state = update_multipliers(state, k_tensor, p)
        state = replace(
            state,
            k=state.k + 1,
            residual_history=state.residual_history + (residual,),
            mu_history=state.mu_history + (mu,),
        )
        _check_state(state)
        logger.debug(f"iteration {state.k}: residual={residual:.3e}, mu={mu:.3e}")
        if callback is not None:
            callback(state, residual)
        if residual <= p.xi:
            converged = True
            break

    wall = time.perf_counter() - start
    if converged:
        logger.info(f"Converged in {state.k} iterations (residual {residual:.3e}, {wall:.2f}s)")
    else:
        logger.warning(f"Stopped at the iteration cap {state.k} (residual {residual:.3e}, {wall:.2f}s)")

    return Decomposition(
        background=state.b,
        target=state.t,
        noise=state.n,
        iterations=state.k,
        final_residual=residual,
        wall_seconds=wall,
        converged=converged,
        residual_history=state.residual_history,
        mu_history=state.mu_history,
    )
