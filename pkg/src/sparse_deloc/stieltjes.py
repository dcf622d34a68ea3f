"""Stieltjes transforms of the semicircle law and its degree-deformed family.

All evaluators accept a Python/NumPy complex scalar, a NumPy array of complex
values, or a :class:`SpectralParam`, and broadcast over arrays.  The upper
half plane is the only valid domain; real or lower-half-plane arguments raise
``ValueError``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "SpectralParam",
    "TransformValue",
    "as_z",
    "eval_m",
    "eval_m_tilde",
    "eval_m_alpha",
    "gap",
    "m_alpha_identity_residual",
    "boundary_density",
    "transform",
]


@dataclass(frozen=True)
class SpectralParam:
    """A spectral point ``z = re + i*im`` with ``im > 0``."""

    re: float
    im: float

    def __post_init__(self) -> None:
        if not self.im > 0:
            raise ValueError(f"spectral parameter needs im > 0, got {self.im!r}")

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def from_complex(cls, z: complex) -> "SpectralParam":
        return cls(float(np.real(z)), float(np.imag(z)))


ZLike = Union[complex, float, np.ndarray, SpectralParam]


@dataclass(frozen=True)
class TransformValue:
    m: complex
    m_tilde: complex
    gap: float


def as_z(z: ZLike) -> np.ndarray | complex:
    """Coerce to complex and reject anything off the open upper half plane."""
    if isinstance(z, SpectralParam):
        return z.z
    arr = np.asarray(z, dtype=np.complex128)
    if not np.all(arr.imag > 0):
        raise ValueError("Stieltjes transforms are evaluated only for Im z > 0")
    if arr.ndim == 0:
        return complex(arr)
    return arr


def _roots(z):
    # sqrt(z-2)*sqrt(z+2) keeps the cut on [-2, 2]; sqrt(z**2-4) would not.
    sq = np.sqrt(z - 2) * np.sqrt(z + 2)
    # |m_tilde| >= 1, so forming it first avoids cancellation for large |z|.
    big = (-z - sq) / 2
    small = 1 / big
    # Branch guard: swap wherever rounding put the roots on the wrong sheet.
    wrong = np.imag(small) < 0
    if np.ndim(z) == 0:
        if wrong:
            small, big = big, small
        return complex(small), complex(big)
    m = np.where(wrong, big, small)
    m_tilde = np.where(wrong, small, big)
    return m, m_tilde


def eval_m(z: ZLike):
    """Stieltjes transform of the semicircle law, the root of
    ``m = -1/(z + m)`` with positive imaginary part."""
    return _roots(as_z(z))[0]


def eval_m_tilde(z: ZLike):
    """The second root of ``w**2 + z*w + 1 = 0`` (negative imaginary part)."""
    return _roots(as_z(z))[1]


def eval_m_alpha(alpha, z: ZLike):
    """``-1 / (z + alpha*m(z))``.

    This is the Stieltjes transform of the local spectral measure at the root
    of a tree whose root has normalized degree ``alpha``; ``alpha = 1`` gives
    back ``m`` and ``alpha = 0`` gives ``-1/z``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha < 0):
        raise ValueError("alpha must be nonnegative")
    zz = as_z(z)
    out = -1 / (zz + alpha * eval_m(zz))
    return complex(out) if np.ndim(out) == 0 else out


def gap(z: ZLike):
    """``|m(z) - m_tilde(z)| = |sqrt(z**2 - 4)|``."""
    zz = as_z(z)
    out = np.abs(np.sqrt(zz - 2) * np.sqrt(zz + 2))
    return float(out) if np.ndim(out) == 0 else out


def m_alpha_identity_residual(alpha, z: ZLike):
    """``|m_alpha - m - m**2 * m_alpha * (alpha - 1)|``; zero up to rounding.

    Evaluated in extended precision: for small ``Im z`` the two sides are of
    size ``1/Im z`` and cancel, so double precision alone would leave a floor
    of about ``eps / Im z``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha < 0):
        raise ValueError("alpha must be nonnegative")
    zd = as_z(z)
    shape = np.broadcast_shapes(np.shape(zd), alpha.shape)
    zz = np.broadcast_to(np.asarray(zd, dtype=np.clongdouble), shape).reshape(-1)
    a = np.broadcast_to(alpha.astype(np.longdouble), shape).reshape(-1)
    m, _ = _roots(zz)
    ma = -1 / (zz + a * m)
    out = np.abs(ma - m - m**2 * ma * (a - 1)).astype(np.float64).reshape(shape)
    return float(out) if out.ndim == 0 else out


def boundary_density(alpha, E, eta_limit: float = 1e-6):
    """Approximate density ``Im m_alpha(E + i*eta) / pi`` of the measure whose
    Stieltjes transform is ``m_alpha``, at a small but finite ``eta``."""
    if not 0 < eta_limit <= 1e-3:
        raise ValueError("eta_limit must lie in (0, 1e-3]")
    E = np.asarray(E, dtype=np.float64)
    out = np.imag(eval_m_alpha(alpha, E + 1j * eta_limit)) / np.pi
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def transform(z: ZLike) -> TransformValue:
    m, mt = _roots(as_z(z))
    return TransformValue(m=m, m_tilde=mt, gap=float(abs(m - mt)))
