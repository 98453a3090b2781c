"""Third-order tensors and the t-product algebra.

Tensors are float64 torch tensors of shape (n1, n2, n3): row i, column j,
frontal slice k. The DFT along mode 3 is unnormalized forward / 1/n3
inverse, so that the Fourier-domain frontal slices are exactly the diagonal
blocks of the block-diagonalized bcirc matrix.
"""
import logging
from typing import Literal

import numpy as np
import torch

from .errors import DimensionMismatch, ImaginaryResidueTooLarge, NonFiniteError

logger = logging.getLogger(__name__)

# Real (n1, n2, n3) float64 tensor
Tensor3 = torch.Tensor
# Complex (n1, n2, n3) complex128 tensor, the mode-3 transform of a Tensor3
CTensor3 = torch.Tensor

DTYPE = torch.float64
CDTYPE = torch.complex128

# Imaginary residue after ifft: silently dropped below DISCARD, warned up to FAIL
IMAG_DISCARD_TOL = 1e-10
IMAG_FAIL_TOL = 1e-6

NormKind = Literal["frobenius", "l1", "l21"]


def as_tensor3(x, name: str = "tensor") -> Tensor3:
    """Validate and convert ``x`` to a finite float64 tensor of order 3."""
    if isinstance(x, torch.Tensor):
        if x.is_complex():
            raise DimensionMismatch(f"{name}: expected a real tensor, got dtype={x.dtype}")
        t = x.detach().to(dtype=DTYPE, device="cpu")
    else:
        arr = np.asarray(x)
        if np.iscomplexobj(arr):
            raise DimensionMismatch(f"{name}: expected a real array, got dtype={arr.dtype}")
        t = torch.as_tensor(arr, dtype=DTYPE)

    if t.ndim != 3:
        raise DimensionMismatch(f"{name}: expected 3 dimensions, got shape={tuple(t.shape)}")
    if min(t.shape) < 1:
        raise DimensionMismatch(f"{name}: every dimension must be >= 1, got shape={tuple(t.shape)}")
    if not torch.isfinite(t).all():
        bad = int((~torch.isfinite(t)).sum())
        raise NonFiniteError(f"{name}: {bad}/{t.numel()} entries are NaN or Inf")
    return t


def check_finite(t: torch.Tensor, name: str) -> None:
    if not torch.isfinite(t).all():
        bad = int((~torch.isfinite(t)).sum())
        raise NonFiniteError(f"{name}: {bad}/{t.numel()} entries are NaN or Inf")


def zeros(n1: int, n2: int, n3: int) -> Tensor3:
    return torch.zeros((n1, n2, n3), dtype=DTYPE)


def rect_identity(n1: int, n2: int, n3: int) -> Tensor3:
    """Ones on the main diagonal of the first frontal slice, zeros elsewhere."""
    out = torch.zeros((n1, n2, n3), dtype=DTYPE)
    k = min(n1, n2)
    idx = torch.arange(k)
    out[idx, idx, 0] = 1.0
    return out


def identity_tensor(n: int, n3: int) -> Tensor3:
    return rect_identity(n, n, n3)


# --- Fourier domain along mode 3 ---

def fft_mode3(a: Tensor3) -> CTensor3:
    return torch.fft.fft(a.to(DTYPE), dim=2)


def ifft_mode3(a: CTensor3) -> Tensor3:
    out = torch.fft.ifft(a, dim=2)
    imag = torch.linalg.vector_norm(out.imag)
    scale = torch.linalg.vector_norm(out.abs())
    if scale > 0:
        residue = float(imag / scale)
        if residue > IMAG_FAIL_TOL:
            raise ImaginaryResidueTooLarge(
                f"inverse transform left a relative imaginary part of {residue:.3e} "
                f"(limit {IMAG_FAIL_TOL:.0e}); the input is not conjugate-symmetric along mode 3"
            )
        if residue > IMAG_DISCARD_TOL:
            logger.warning(f"Discarding imaginary residue {residue:.3e} after ifft_mode3")
    return out.real.contiguous()


def fft3(a: Tensor3) -> CTensor3:
    """Separable 3-D transform over all three modes."""
    return torch.fft.fftn(a.to(DTYPE), dim=(0, 1, 2))


def ifft3(a: CTensor3) -> Tensor3:
    return torch.fft.ifftn(a, dim=(0, 1, 2)).real.contiguous()


def to_slices(a: torch.Tensor) -> torch.Tensor:
    """(n1, n2, n3) -> (n3, n1, n2) batch of frontal slices."""
    return a.permute(2, 0, 1)


def from_slices(a: torch.Tensor) -> torch.Tensor:
    """(n3, n1, n2) batch of frontal slices -> (n1, n2, n3)."""
    return a.permute(1, 2, 0).contiguous()


def half_spectrum(n3: int) -> int:
    """Number of Fourier slices that determine the rest by conjugate symmetry."""
    return n3 // 2 + 1


def fill_conjugate(slices: torch.Tensor) -> torch.Tensor:
    """Complete a (h, ...) batch of the first n3//2+1 Fourier slices to n3 slices.

    ``slices`` is indexed by Fourier index along dim 0 and must already have
    length n3 with the leading half filled; entries n3-k are set to conj(k).
    """
    n3 = slices.shape[0]
    for k in range(half_spectrum(n3), n3):
        slices[k] = slices[n3 - k].conj()
    return slices


def is_self_conjugate(k: int, n3: int) -> bool:
    return k == 0 or 2 * k == n3


# --- t-product algebra ---

def t_product(a: Tensor3, b: Tensor3) -> Tensor3:
    if a.ndim != 3 or b.ndim != 3:
        raise DimensionMismatch(f"t_product needs order-3 tensors, got {tuple(a.shape)} and {tuple(b.shape)}")
    if a.shape[1] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise DimensionMismatch(
            f"t_product: cannot multiply {tuple(a.shape)} by {tuple(b.shape)} "
            f"(need a.n2 == b.n1 and equal n3)"
        )
    fa = to_slices(fft_mode3(a))
    fb = to_slices(fft_mode3(b))
    return ifft_mode3(from_slices(fa @ fb))


def t_product_chain(*tensors: Tensor3) -> Tensor3:
    """t-product of several tensors, carried out in the Fourier domain with one inverse transform."""
    if not tensors:
        raise ValueError("t_product_chain needs at least one tensor")
    acc = to_slices(fft_mode3(tensors[0]))
    for t in tensors[1:]:
        if acc.shape[2] != t.shape[0] or acc.shape[0] != t.shape[2]:
            raise DimensionMismatch(f"t_product_chain: shape {tuple(t.shape)} does not conform")
        acc = acc @ to_slices(fft_mode3(t))
    return ifft_mode3(from_slices(acc))


def conj_transpose(a: Tensor3) -> Tensor3:
    """Transpose every frontal slice and reverse the order of slices 2..n3."""
    at = a.transpose(0, 1)
    order = [0] + list(range(a.shape[2] - 1, 0, -1))
    return at[:, :, order].contiguous()


def unfold(a: Tensor3) -> torch.Tensor:
    """Stack the frontal slices vertically: (n1*n3, n2)."""
    return to_slices(a).reshape(a.shape[2] * a.shape[0], a.shape[1])


def fold(m: torch.Tensor, n1: int, n3: int) -> Tensor3:
    """Inverse of ``unfold``."""
    return from_slices(m.reshape(n3, n1, m.shape[1]))


def bcirc_oracle(a: Tensor3) -> torch.Tensor:
    """Block-circulant matrix of ``a``. Dense and O(n3^2) blocks: tests only."""
    n1, n2, n3 = a.shape
    out = torch.zeros((n1 * n3, n2 * n3), dtype=a.dtype)
    for p in range(n3):
        for q in range(n3):
            out[p * n1:(p + 1) * n1, q * n2:(q + 1) * n2] = a[:, :, (p - q) % n3]
    return out


def t_product_oracle(a: Tensor3, b: Tensor3) -> Tensor3:
    """fold(bcirc(a) @ unfold(b)), the definition of the t-product."""
    return fold(bcirc_oracle(a) @ unfold(b), a.shape[0], a.shape[2])


def norm(a: Tensor3, kind: NormKind = "frobenius") -> float:
    if kind == "frobenius":
        return float(torch.linalg.vector_norm(a))
    if kind == "l1":
        return float(a.abs().sum())
    if kind == "l21":
        # Frobenius norm of every lateral slice a(:, j, :)
        return float(torch.linalg.vector_norm(a, dim=(0, 2)).sum())
    raise ValueError(f"Unknown norm kind: {kind}")
