"""Counter-based random number generation.

Every random value in this package is a pure function of (root seed,
stream label, element index), so initializations are reproducible
bit-for-bit from the documented constants below, in any language.

Scheme
------
* 64-bit mixing: the splitmix64 finalizer (constants GAMMA, MIX1, MIX2).
* Stream keys: FNV-1a hash of the label, XORed into the mixed seed.
* Uniforms: top 53 bits of a mixed counter, scaled by 2**-53 -> [0, 1).
* Normals: Box-Muller on two consecutive counter values per element,
  z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_U_GAMMA = np.uint64(GAMMA)
_U_MIX1 = np.uint64(MIX1)
_U_MIX2 = np.uint64(MIX2)
_TWO = np.uint64(2)
_ONE = np.uint64(1)


def mix64_int(z: int) -> int:
    """splitmix64 finalizer on a plain Python integer (mod 2**64)."""
    z = (z + GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z + _U_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


def fnv1a64(label: str) -> int:
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def stream_key(seed: int, label: str) -> int:
    """Derive the counter key for a named sub-stream of a root seed."""
    return mix64_int((seed & _MASK64) ^ fnv1a64(label))


def uniform(key: int, n: int, offset: int = 0) -> np.ndarray:
    """n uniforms in [0, 1) at counters offset .. offset+n-1."""
    idx = np.arange(offset, offset + n, dtype=np.uint64)
    bits = _mix64(np.uint64(key & _MASK64) + idx)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def standard_normal(key: int, n: int) -> np.ndarray:
    """n i.i.d. N(0,1) draws; element k consumes counters 2k and 2k+1."""
    idx = np.arange(n, dtype=np.uint64)
    base = np.uint64(key & _MASK64)
    b1 = _mix64(base + _TWO * idx)
    b2 = _mix64(base + _TWO * idx + _ONE)
    u1 = (b1 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u2 = (b2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log1p(-u1))
    return r * np.cos(2.0 * np.pi * u2)
