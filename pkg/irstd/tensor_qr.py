from dataclasses import dataclass

import torch

from . import tensor_core as tc


@dataclass(frozen=True)
class TQrResult:
    """Economy t-QR: a = q * r with q (n1 x s x n3) orthogonal, r (s x n2 x n3), s = min(n1, n2)."""
    q: tc.Tensor3
    r: tc.Tensor3


def _qr_fixed_sign(m: torch.Tensor):
    """Economy QR with a nonnegative real diagonal in R."""
    q, r = torch.linalg.qr(m, mode="reduced")
    d = torch.diagonal(r)
    mag = d.abs()
    safe = torch.where(mag > 0, mag, torch.ones_like(mag))
    phase = torch.where(mag > 0, d / safe, torch.ones_like(d))
    q = q * phase.unsqueeze(0)
    r = phase.conj().unsqueeze(1) * r
    return q, r


def qr_slice(m: torch.Tensor, self_conjugate: bool):
    """QR of one Fourier-domain frontal slice, returned as complex128.

    Slices 0 and n3/2 of a real tensor's transform are real; they are
    factored in real arithmetic so the inverse transform stays exactly real.
    """
    if self_conjugate:
        q, r = _qr_fixed_sign(m.real)
        return q.to(tc.CDTYPE), r.to(tc.CDTYPE)
    return _qr_fixed_sign(m)


def qr_slices(fa: torch.Tensor):
    """Slice-wise QR of a (n3, n1, n2) batch of Fourier slices of a real tensor."""
    n3, n1, n2 = fa.shape
    s = min(n1, n2)
    fq = torch.zeros((n3, n1, s), dtype=tc.CDTYPE)
    fr = torch.zeros((n3, s, n2), dtype=tc.CDTYPE)
    for k in range(tc.half_spectrum(n3)):
        fq[k], fr[k] = qr_slice(fa[k], tc.is_self_conjugate(k, n3))
    return tc.fill_conjugate(fq), tc.fill_conjugate(fr)


def t_qr(a: tc.Tensor3) -> TQrResult:
    fq, fr = qr_slices(tc.to_slices(tc.fft_mode3(a)))
    return TQrResult(q=tc.ifft_mode3(tc.from_slices(fq)), r=tc.ifft_mode3(tc.from_slices(fr)))
