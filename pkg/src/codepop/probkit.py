"""Exact discrete probability containers and information measures.

All measures are in bits (base-2 logarithms) and are computed by direct
summation over dense probability tensors, with the 0 * log 0 = 0 convention.
Nothing here is sampled or approximated.
"""
from __future__ import annotations

import numpy as np

from .errors import (
    AbsoluteContinuityError,
    DegenerateConditioningError,
    UsageError,
    ValidationError,
)

# Largest tolerated drift of a probability sum away from 1. Constructors
# renormalize drifts below this and reject anything larger.
NORM_TOL = 1e-9


def _validated(values, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-axis array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError("distribution has no outcomes")
    if np.any(arr < 0.0):
        raise ValidationError("negative probability entry")
    total = float(arr.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise ValidationError(f"probabilities sum to {total!r}, not 1")
    return arr / total


def _entropy_bits(p: np.ndarray) -> float:
    pos = p[p > 0.0]
    return float(-(pos * np.log2(pos)).sum())


class Dist1:
    """Distribution over a single finite variable."""

    __slots__ = ("p",)

    def __init__(self, p):
        self.p = _validated(p, 1)

    def __len__(self) -> int:
        return self.p.shape[0]

    def __repr__(self) -> str:
        return f"Dist1({self.p!r})"


class Dist2:
    """Joint distribution over two finite variables."""

    __slots__ = ("p",)

    def __init__(self, p):
        self.p = _validated(p, 2)

    @property
    def shape(self):
        return self.p.shape

    def marginal(self, axis: int) -> Dist1:
        """Marginal of the variable on `axis`; the other axis is summed out."""
        if axis not in (0, 1):
            raise UsageError(f"axis must be 0 or 1, got {axis}")
        return Dist1(self.p.sum(axis=1 - axis))

    def condition(self, axis: int, index: int) -> Dist1:
        """Conditional of the other variable given variable `axis` = `index`."""
        if axis not in (0, 1):
            raise UsageError(f"axis must be 0 or 1, got {axis}")
        slice_ = self.p[index, :] if axis == 0 else self.p[:, index]
        mass = float(slice_.sum())
        if mass <= 0.0:
            raise DegenerateConditioningError(
                f"conditioning on axis {axis} index {index} has zero probability"
            )
        return Dist1(slice_ / mass)

    def __repr__(self) -> str:
        return f"Dist2(shape={self.p.shape})"


class Dist3:
    """Joint distribution over three finite variables."""

    __slots__ = ("p",)

    def __init__(self, p):
        self.p = _validated(p, 3)

    @property
    def shape(self):
        return self.p.shape

    def marginal(self, axis: int) -> Dist1:
        if axis not in (0, 1, 2):
            raise UsageError(f"axis must be 0, 1 or 2, got {axis}")
        keep = [a for a in (0, 1, 2) if a != axis]
        return Dist1(self.p.sum(axis=tuple(keep)))

    def sum_out(self, axis: int) -> Dist2:
        """Marginal pair distribution with `axis` summed out."""
        if axis not in (0, 1, 2):
            raise UsageError(f"axis must be 0, 1 or 2, got {axis}")
        return Dist2(self.p.sum(axis=axis))

    def __repr__(self) -> str:
        return f"Dist3(shape={self.p.shape})"


def entropy(d: Dist1) -> float:
    """Shannon entropy H(X) in bits."""
    return _entropy_bits(d.p)


def mutual_information(j: Dist2) -> float:
    """I(X;Y) = H(X) + H(Y) - H(X,Y) in bits. Never negative."""
    p = j.p
    value = _entropy_bits(p.sum(axis=1)) + _entropy_bits(p.sum(axis=0)) - _entropy_bits(p)
    return max(value, 0.0)


def conditional_mutual_information(j: Dist3, target: int, given: int) -> float:
    """I(target; other | given) in bits, for any assignment of the three axes.

    `target` and `given` select two distinct axes of `j`; the remaining axis
    is the second argument of the mutual information.
    """
    if target not in (0, 1, 2) or given not in (0, 1, 2):
        raise UsageError(f"axes must be in (0, 1, 2), got target={target} given={given}")
    if target == given:
        raise UsageError("target and given axes collide")
    other = 3 - target - given
    p = j.p
    h_tg = _entropy_bits(p.sum(axis=other))
    h_og = _entropy_bits(p.sum(axis=target))
    h_g = _entropy_bits(p.sum(axis=tuple(a for a in (0, 1, 2) if a != given)))
    value = h_tg + h_og - h_g - _entropy_bits(p)
    return max(value, 0.0)


def kl_divergence(a: Dist2, b: Dist2) -> float:
    """D_KL(a || b) in bits. Requires a to be absolutely continuous w.r.t. b."""
    if a.p.shape != b.p.shape:
        raise UsageError(f"shape mismatch: {a.p.shape} vs {b.p.shape}")
    support = a.p > 0.0
    if np.any(b.p[support] <= 0.0):
        raise AbsoluteContinuityError("first distribution has mass where second has none")
    pa = a.p[support]
    pb = b.p[support]
    value = float((pa * np.log2(pa / pb)).sum())
    return max(value, 0.0)


def js_divergence(a: Dist1, b: Dist1) -> float:
    """Jensen-Shannon divergence in bits; symmetric and bounded by 1."""
    if a.p.shape != b.p.shape:
        raise UsageError(f"shape mismatch: {a.p.shape} vs {b.p.shape}")
    mix = 0.5 * (a.p + b.p)
    value = _entropy_bits(mix) - 0.5 * (_entropy_bits(a.p) + _entropy_bits(b.p))
    return max(value, 0.0)
