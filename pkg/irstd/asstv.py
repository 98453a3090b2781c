"""Circular difference operators and the asymmetric spatial-temporal TV norm."""
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import torch

from . import tensor_core as tc


class Axis(Enum):
    HORIZONTAL = 0  # along rows index i (mode 1)
    VERTICAL = 1    # along columns index j (mode 2)
    TEMPORAL = 2    # along frontal slices k (mode 3)


AXES = (Axis.HORIZONTAL, Axis.VERTICAL, Axis.TEMPORAL)


def diff(a: tc.Tensor3, axis: Axis, adjoint: bool = False) -> tc.Tensor3:
    """Forward: a(i+1) - a(i), periodic. Adjoint: a(i-1) - a(i), periodic."""
    dim = axis.value
    if adjoint:
        return torch.roll(a, shifts=1, dims=dim) - a
    return torch.roll(a, shifts=-1, dims=dim) - a


def asstv_norm(a: tc.Tensor3, delta: float) -> float:
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    spatial = diff(a, Axis.HORIZONTAL).abs().sum() + diff(a, Axis.VERTICAL).abs().sum()
    return float(spatial + delta * diff(a, Axis.TEMPORAL).abs().sum())


@dataclass(frozen=True)
class OperatorSpectrum:
    """3-D Fourier multipliers of the three forward differences on an n1 x n2 x n3 grid."""
    horizontal: tc.CTensor3
    vertical: tc.CTensor3
    temporal: tc.CTensor3

    def of(self, axis: Axis) -> tc.CTensor3:
        return (self.horizontal, self.vertical, self.temporal)[axis.value]

    @property
    def shape(self):
        return tuple(self.horizontal.shape)

    @cached_property
    def gram(self) -> torch.Tensor:
        """sum_i conj(F(K_i)) * F(K_i), real and nonnegative."""
        return sum(lam.abs() ** 2 for lam in (self.horizontal, self.vertical, self.temporal))


def _axis_eigenvalues(n: int) -> torch.Tensor:
    k = torch.arange(n, dtype=tc.DTYPE)
    return torch.polar(torch.ones(n, dtype=tc.DTYPE), 2 * math.pi * k / n) - 1


def operator_spectrum(n1: int, n2: int, n3: int) -> OperatorSpectrum:
    if min(n1, n2, n3) < 1:
        raise ValueError(f"dimensions must be >= 1, got {(n1, n2, n3)}")
    shape = (n1, n2, n3)
    return OperatorSpectrum(
        horizontal=_axis_eigenvalues(n1).view(n1, 1, 1).expand(shape).contiguous(),
        vertical=_axis_eigenvalues(n2).view(1, n2, 1).expand(shape).contiguous(),
        temporal=_axis_eigenvalues(n3).view(1, 1, n3).expand(shape).contiguous(),
    )
