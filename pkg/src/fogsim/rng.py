"""Counter-based random streams (splitmix64).

Every stochastic stage in the package derives an independent 64-bit stream
from (seed, pixel x, pixel y, sample/frame index, salt). Draws within a
stream are sequential splitmix64 outputs. Because stream initialization is
a pure hash of the key, results never depend on scheduling or thread
count; the scalar (numba) and vector (numpy) forms below are bit-identical.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_W1 = U64(0xA0761D6478BD642F)
_W2 = U64(0xE7037ED1A0B428DB)
_W3 = U64(0x8EBC6AF09C88C6E3)
_W4 = U64(0x589965CC75374CC3)
_INV2_53 = 1.0 / 9007199254740992.0  # 2**-53

# salts separating independent draw purposes on the same (x, y) key
SALT_PATH = 1
SALT_SENSOR = 2
SALT_FIXED_PATTERN = 3


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def stream_init(seed, a, b, c, salt):
    k = U64(seed) + GOLDEN
    k = mix64(k ^ (U64(a) * _W1))
    k = mix64(k ^ (U64(b) * _W2))
    k = mix64(k ^ (U64(c) * _W3))
    k = mix64(k ^ (U64(salt) * _W4))
    return k


@njit(cache=True, inline="always")
def next_u64(state):
    state = state + GOLDEN
    return state, mix64(state)


@njit(cache=True, inline="always")
def next_f64(state):
    """Advance the stream; returns (state, uniform in [0, 1))."""
    state, z = next_u64(state)
    return state, (z >> U64(11)) * _INV2_53


# --- vectorized forms (numpy uint64, same constants) -----------------------

def mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


_MASK64 = (1 << 64) - 1


def stream_init_vec(seed: int, a, b, c, salt: int) -> np.ndarray:
    """Vector form of stream_init; a, b, c broadcast as uint64 arrays."""
    a = np.atleast_1d(np.asarray(a, dtype=np.uint64))
    b = np.atleast_1d(np.asarray(b, dtype=np.uint64))
    c = np.atleast_1d(np.asarray(c, dtype=np.uint64))
    k0 = U64((int(seed) + int(GOLDEN)) & _MASK64)
    k = mix64_vec(k0 ^ (a * _W1))
    k = mix64_vec(k ^ (b * _W2))
    k = mix64_vec(k ^ (c * _W3))
    salt_w = U64((int(salt) * int(_W4)) & _MASK64)
    return mix64_vec(k ^ salt_w)


def next_f64_vec(state: np.ndarray):
    state = state + GOLDEN
    z = mix64_vec(state)
    return state, (z >> U64(11)) * _INV2_53


def normal_pairs_vec(state: np.ndarray):
    """Two standard-normal fields via Box-Muller; advances state twice."""
    state, u1 = next_f64_vec(state)
    state, u2 = next_f64_vec(state)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # u1 in [0,1) -> 1-u1 in (0,1]
    ang = 2.0 * np.pi * u2
    return state, r * np.cos(ang), r * np.sin(ang)
