"""Complex numbers as [re, im] pairs in JSON documents."""

import numpy as np


def encode(a):
    """Nested lists of [re, im] pairs for a complex scalar or array."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [encode(x) for x in a]


def decode(obj):
    """Inverse of :func:`encode`; plain real numbers are accepted too."""
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 0:
        return complex(arr)
    if arr.shape[-1] != 2:
        raise ValueError(f"expected [re, im] pairs, got trailing shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def decode_scalar(obj):
    if isinstance(obj, (int, float)):
        return complex(obj)
    val = decode(obj)
    if np.ndim(val) != 0:
        raise ValueError(f"expected a complex scalar, got {obj!r}")
    return complex(val)
