"""Spectral and modular-arithmetic primitives shared by the rest of the package.

The forward DFT uses the kernel ``exp(-i 2 pi n q / size)``. Sub-channel
modulation is therefore ``exp(+i 2 pi n k / K)``, i.e. an inverse-kernel
multiplication, and every other module relies on this single convention.
"""

from __future__ import annotations

import numpy as np

__all__ = ["as_vector", "dft", "idft", "cyclic_convolve", "mod_index", "cyclic_shift"]


def as_vector(v, name: str = "v") -> np.ndarray:
    """Return ``v`` as a finite, non-empty 1-D complex array."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def dft(v, size: int | None = None) -> np.ndarray:
    """Forward DFT with kernel ``exp(-i 2 pi n q / size)``.

    Parameters
    ----------
    v : array_like
        Input vector.
    size : int, optional
        Transform size. Must equal ``len(v)`` when given.

    Returns
    -------
    numpy.ndarray
        Complex spectrum of the same length.
    """
    arr = as_vector(v)
    if size is not None and size != arr.size:
        raise ValueError(f"size {size} does not match vector length {arr.size}")
    return np.fft.fft(arr)


def idft(v, size: int | None = None) -> np.ndarray:
    """Inverse of :func:`dft` (includes the ``1/size`` factor)."""
    arr = as_vector(v)
    if size is not None and size != arr.size:
        raise ValueError(f"size {size} does not match vector length {arr.size}")
    return np.fft.ifft(arr)


def cyclic_convolve(x, y) -> np.ndarray:
    """Cyclic convolution ``out(n) = sum_m x(m) y((n - m) mod M)``."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.size != y.size:
        raise ValueError("cyclic convolution needs equal-length inputs")
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(y))


def mod_index(a: int, b: int) -> int:
    """Non-negative remainder of ``a`` modulo ``b``."""
    if b <= 0:
        raise ValueError("modulus must be positive")
    return int(a) % int(b)


def cyclic_shift(v, a: int) -> np.ndarray:
    """Cyclic shift with ``out[i] = v[(i + a) mod N]``."""
    arr = np.asarray(v)
    return np.roll(arr, -int(a))
