"""L2,1-norm proximal operators.

The matrix prox is the closed-form column shrinkage. The tensor version
follows the tri-factorization route: fit Z ~ L * D * R with orthogonal L and
R by alternating t-QR steps, shrink the columns of the Fourier-domain core,
and recompose. All factor work happens on Fourier-domain frontal slices
(only the first n3//2+1 are factored, the rest follow by conjugation), with
a single inverse transform at the end.
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import torch

from . import defaults
from . import tensor_core as tc
from .errors import RankOutOfRange
from .tensor_qr import qr_slice

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TriFactor:
    l: tc.Tensor3
    d: tc.Tensor3
    r_fac: tc.Tensor3
    rank: int
    # ||z - l*d*r_fac||_F^2 after each fitting iteration
    residuals: Tuple[float, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class ShrinkInput:
    d_t: tc.Tensor3
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")


def l21_prox_matrix(y: torch.Tensor, tau: float) -> torch.Tensor:
    """argmin_Z tau*||Z||_{2,1} + 1/2*||Z - Y||_F^2, column by column."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    norms = torch.linalg.vector_norm(y, dim=0)
    return y * _column_scale(norms, tau).unsqueeze(0)


def _column_scale(norms: torch.Tensor, tau: float) -> torch.Tensor:
    # max{(n - tau)/n, 0}; zero columns stay zero
    safe = torch.where(norms > 0, norms, torch.ones_like(norms))
    scale = torch.clamp(1.0 - tau / safe, min=0.0)
    return torch.where(norms > 0, scale, torch.zeros_like(scale))


def _check_rank(r: int, n1: int, n2: int) -> None:
    if not 1 <= r <= min(n1, n2):
        raise RankOutOfRange(f"rank r={r} must lie in [1, min(n1, n2)] = [1, {min(n1, n2)}]")


def _conj_t(m: torch.Tensor) -> torch.Tensor:
    return m.transpose(-2, -1).conj()


def _fit_slices(fz: torch.Tensor, r: int, max_iters: int, eps: float):
    """Tri-factorization on Fourier slices fz (n3, n1, n2).

    Returns (fl, fd, fr, residuals) with fl (n3, n1, r), fd (n3, r, r),
    fr (n3, r, n2); residuals are time-domain squared Frobenius errors.
    """
    n3, n1, n2 = fz.shape
    half = tc.half_spectrum(n3)

    # Rectangular identities in the first frontal slice transform to identities in every Fourier slice.
    eye_l = torch.eye(n1, r, dtype=tc.CDTYPE)
    eye_r = torch.eye(r, n2, dtype=tc.CDTYPE)
    fl = eye_l.expand(n3, n1, r).clone()
    fd = torch.eye(r, dtype=tc.CDTYPE).expand(n3, r, r).clone()
    fr = eye_r.expand(n3, r, n2).clone()

    residuals = []
    for it in range(max_iters):
        for k in range(half):
            selfconj = tc.is_self_conjugate(k, n3)
            fl[k], _ = qr_slice(fz[k] @ _conj_t(fr[k]), selfconj)
            q2, r2 = qr_slice(_conj_t(fz[k]) @ fl[k], selfconj)
            fr[k] = _conj_t(q2)
            fd[k] = _conj_t(r2)
        tc.fill_conjugate(fl)
        tc.fill_conjugate(fd)
        tc.fill_conjugate(fr)

        # Parseval: time-domain ||.||_F^2 is the Fourier-domain one divided by n3
        err = float(torch.linalg.vector_norm(fz - fl @ fd @ fr) ** 2) / n3
        residuals.append(err)
        logger.debug(f"trifactor iteration {it + 1}/{max_iters}: fit error {err:.3e}")
        if err <= eps:
            break
    return fl, fd, fr, residuals


def trifactor(
    z: tc.Tensor3,
    r: int,
    max_iters: int = defaults.SOLVER_CONFIG["TRIFACTOR_ITERS"],
    eps: float = defaults.SOLVER_CONFIG["TRIFACTOR_EPS"],
) -> TriFactor:
    n1, n2, _ = z.shape
    _check_rank(r, n1, n2)
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")

    fl, fd, fr, residuals = _fit_slices(tc.to_slices(tc.fft_mode3(z)), r, max_iters, eps)
    return TriFactor(
        l=tc.ifft_mode3(tc.from_slices(fl)),
        d=tc.ifft_mode3(tc.from_slices(fd)),
        r_fac=tc.ifft_mode3(tc.from_slices(fr)),
        rank=r,
        residuals=tuple(residuals),
    )


def _shrink_fourier_core(fd: torch.Tensor, tau: float) -> torch.Tensor:
    # fd: (n3, r, r); column j of slice t is fd[t, :, j]
    norms = torch.linalg.vector_norm(fd, dim=1)
    return fd * _column_scale(norms, tau).unsqueeze(1)


def l21_shrink_core(inp: ShrinkInput) -> tc.Tensor3:
    fd = tc.to_slices(tc.fft_mode3(inp.d_t))
    return tc.ifft_mode3(tc.from_slices(_shrink_fourier_core(fd, inp.tau)))


def tlnmtqr(
    x: tc.Tensor3,
    r: int,
    tau: float,
    outer_iters: int = defaults.SOLVER_CONFIG["INNER_ITERS"],
    trifactor_iters: int = defaults.SOLVER_CONFIG["TRIFACTOR_ITERS"],
    eps: float = defaults.SOLVER_CONFIG["TRIFACTOR_EPS"],
) -> tc.Tensor3:
    """Approximate argmin_M tau*||M||_{2,1} + 1/2*||M - X||_F^2 via L*D*R with a shrunk core."""
    n1, n2, _ = x.shape
    _check_rank(r, n1, n2)
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if outer_iters < 1:
        raise ValueError(f"outer_iters must be >= 1, got {outer_iters}")

    fm = tc.to_slices(tc.fft_mode3(x))
    for p in range(outer_iters):
        fl, fd, fr, residuals = _fit_slices(fm, r, trifactor_iters, eps)
        fd = _shrink_fourier_core(fd, tau)
        fm = fl @ fd @ fr
        logger.debug(f"tlnmtqr pass {p + 1}/{outer_iters}: pre-shrink fit {residuals[-1]:.3e}")
    return tc.ifft_mode3(tc.from_slices(fm))
