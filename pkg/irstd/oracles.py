"""Numerical self-checks against slow reference computations.

Each oracle draws random instances from a seeded generator, compares the fast
path with a dense or brute-force reference, and returns the worst error seen.
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
import torch

from . import tensor_core as tc
from .admm_solver import SolverState, soft_threshold, update_b
from .asstv import AXES, diff, operator_spectrum
from .tensor_qr import t_qr
from .tlnm import ShrinkInput, l21_prox_matrix, l21_shrink_core, tlnmtqr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    seconds: float


def _randn(g: torch.Generator, *shape) -> torch.Tensor:
    return torch.randn(*shape, generator=g, dtype=tc.DTYPE)


def _randint(g: torch.Generator, lo: int, hi: int) -> int:
    return int(torch.randint(lo, hi + 1, (1,), generator=g))


def grid_argmin(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, n: int = 2001, levels: int = 4):
    """Minimize a batch of convex scalar functions by repeatedly refined grids.

    ``f`` maps a (batch, n) array of candidates to their values. Resolution
    after ``levels`` rounds is (hi - lo) / (n - 1) ** levels.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    lower, upper = lo, hi
    for _ in range(levels):
        grid = np.linspace(lo, hi, n, axis=-1)
        best = np.argmin(f(grid), axis=-1)
        step = (hi - lo) / (n - 1)
        center = np.take_along_axis(grid, best[:, None], axis=-1)[:, 0]
        lo, hi = np.maximum(center - step, lower), np.minimum(center + step, upper)
    return (lo + hi) / 2


# --- Algebra ---

def t_product_vs_bcirc(g: torch.Generator, trials: int = 100) -> float:
    worst = 0.0
    for _ in range(trials):
        n1, n2, n4 = (_randint(g, 1, 8) for _ in range(3))
        n3 = _randint(g, 1, 5)
        a, b = _randn(g, n1, n2, n3), _randn(g, n2, n4, n3)
        ref = tc.t_product_oracle(a, b)
        err = tc.norm(tc.t_product(a, b) - ref) / max(tc.norm(ref), 1e-300)
        worst = max(worst, err)
    return worst


def parseval(g: torch.Generator, trials: int = 100) -> float:
    worst = 0.0
    for _ in range(trials):
        a = _randn(g, _randint(g, 1, 8), _randint(g, 1, 8), _randint(g, 1, 5))
        n3 = a.shape[2]
        fourier = float(torch.linalg.vector_norm(tc.fft_mode3(a)) ** 2) / n3
        direct = tc.norm(a) ** 2
        worst = max(worst, abs(fourier - direct) / direct)
    return worst


def conj_transpose_vs_bcirc(g: torch.Generator, trials: int = 100) -> float:
    worst = 0.0
    for _ in range(trials):
        a = _randn(g, _randint(g, 1, 6), _randint(g, 1, 6), _randint(g, 1, 5))
        err = float((tc.bcirc_oracle(tc.conj_transpose(a)) - tc.bcirc_oracle(a).T).abs().max())
        worst = max(worst, err)
    return worst


def tqr_reconstruction(g: torch.Generator, trials: int = 100) -> float:
    worst = 0.0
    for _ in range(trials):
        a = _randn(g, _randint(g, 1, 16), _randint(g, 1, 16), _randint(g, 1, 6))
        f = t_qr(a)
        rec = tc.norm(a - tc.t_product(f.q, f.r)) / tc.norm(a)
        s = f.q.shape[1]
        orth = tc.norm(tc.t_product(tc.conj_transpose(f.q), f.q) - tc.identity_tensor(s, a.shape[2]))
        worst = max(worst, rec, orth)
    return worst


# --- Proximal operators ---

def l21_prox_vs_scalar_search(g: torch.Generator, trials: int = 50) -> float:
    worst = 0.0
    for _ in range(trials):
        y = _randn(g, 5, 5)
        tau = float(torch.rand(1, generator=g, dtype=tc.DTYPE)) * 3
        z = l21_prox_matrix(y, tau).numpy()
        norms = np.linalg.norm(y.numpy(), axis=0)
        # column j of the prox is s * y_j with s minimizing tau*s*n + (1-s)^2 n^2 / 2
        s = grid_argmin(
            lambda c: tau * c * norms[:, None] + 0.5 * (1 - c) ** 2 * norms[:, None] ** 2,
            np.zeros(5), np.ones(5),
        )
        worst = max(worst, float(np.abs(z - y.numpy() * s[None, :]).max()))
    return worst


def shrink_round_trip(g: torch.Generator, trials: int = 50) -> float:
    worst = 0.0
    for _ in range(trials):
        d = _randn(g, _randint(g, 1, 8), _randint(g, 1, 8), _randint(g, 1, 5))
        out = l21_shrink_core(ShrinkInput(d, 1e-30))
        worst = max(worst, float((out - d).abs().max()))
    return worst


def soft_threshold_vs_grid(g: torch.Generator, trials: int = 20) -> float:
    worst = 0.0
    for _ in range(trials):
        x = _randn(g, 64).numpy() * 2
        level = float(torch.rand(1, generator=g, dtype=tc.DTYPE))
        fast = soft_threshold(torch.from_numpy(x), level).numpy()
        span = np.abs(x) + 1
        ref = grid_argmin(lambda t: level * np.abs(t) + 0.5 * (t - x[:, None]) ** 2, -span, span)
        worst = max(worst, float(np.abs(fast - ref).max()))
    return worst


def _l21_objective(m: torch.Tensor, x: torch.Tensor, tau: float) -> float:
    return tau * float(torch.linalg.vector_norm(m, dim=0).sum()) + 0.5 * float(torch.linalg.vector_norm(m - x) ** 2)


def tlnmtqr_vs_closed_form(g: torch.Generator, trials: int = 20, tau: float = 0.005) -> float:
    """Worst relative gap of the TLNMTQR objective above the exact prox optimum (n3 = 1, full rank)."""
    worst = 0.0
    for _ in range(trials):
        x = _randn(g, 12, 10)
        approx = tlnmtqr(x.unsqueeze(2), r=10, tau=tau)[:, :, 0]
        exact = l21_prox_matrix(x, tau)
        best = _l21_objective(exact, x, tau)
        worst = max(worst, (_l21_objective(approx, x, tau) - best) / best)
    return worst


# --- Linear solve ---

def dense_difference(n1: int, n2: int, n3: int, axis) -> torch.Tensor:
    """Matrix of the forward difference on vec(a) (row-major flattening)."""
    n = n1 * n2 * n3
    eye = torch.eye(n, dtype=tc.DTYPE)
    cols = [diff(eye[i].reshape(n1, n2, n3), axis).reshape(-1) for i in range(n)]
    return torch.stack(cols, dim=1)


def b_update_vs_dense(g: torch.Generator, trials: int = 20, shape=(8, 8, 3)) -> float:
    n1, n2, n3 = shape
    mats = [dense_difference(n1, n2, n3, ax) for ax in AXES]
    system = 2 * torch.eye(n1 * n2 * n3, dtype=tc.DTYPE) + sum(d.T @ d for d in mats)
    spectrum = operator_spectrum(*shape)
    worst = 0.0
    for _ in range(trials):
        names = ("b", "t", "n", "z", "v1", "v2", "v3", "y1", "y2", "y3", "y4", "y5")
        state = SolverState(**{k: _randn(g, *shape) for k in names}, mu=float(torch.rand(1, generator=g)) + 0.5)
        k = _randn(g, *shape)
        b = update_b(state, k, spectrum)

        mu = state.mu
        rhs = (k - state.t - state.n + state.y1 / mu + state.z + state.y2 / mu).reshape(-1)
        for d, v, y in zip(mats, (state.v1, state.v2, state.v3), (state.y3, state.y4, state.y5)):
            rhs = rhs + d.T @ (v + y / mu).reshape(-1)
        err = float(torch.linalg.vector_norm(system @ b.reshape(-1) - rhs) / torch.linalg.vector_norm(rhs))
        worst = max(worst, err)
    return worst


ORACLES = (
    ("t_product vs bcirc", t_product_vs_bcirc, 1e-10),
    ("Parseval", parseval, 1e-12),
    ("conj_transpose vs bcirc", conj_transpose_vs_bcirc, 1e-12),
    ("t-QR reconstruction/orthogonality", tqr_reconstruction, 1e-10),
    ("L2,1 prox vs scalar search", l21_prox_vs_scalar_search, 1e-6),
    ("core shrink round trip", shrink_round_trip, 1e-12),
    ("soft threshold vs grid", soft_threshold_vs_grid, 1e-6),
    ("TLNMTQR vs closed form (relative)", tlnmtqr_vs_closed_form, 1e-2),
    ("B-update vs dense solve", b_update_vs_dense, 1e-8),
)


def run_all(seed: int = 0) -> List[OracleResult]:
    results = []
    for name, fn, tol in ORACLES:
        g = torch.Generator().manual_seed(seed)
        start = time.perf_counter()
        error = fn(g)
        seconds = time.perf_counter() - start
        passed = bool(error <= tol)
        results.append(OracleResult(name, passed, error, tol, seconds))
        log = logger.info if passed else logger.error
        log(f"{'PASS' if passed else 'FAIL'} {name}: error {error:.3e} (tolerance {tol:.0e}, {seconds:.2f}s)")
    return results
