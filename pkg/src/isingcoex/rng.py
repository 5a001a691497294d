"""Counter-based random numbers keyed by (seed, stream, sweep, site, slot).

A draw is a pure function of its coordinates, so any schedule of chains,
any backend and any restart point see the same numbers.  The mixing function
is the splitmix64 finaliser applied twice.
"""

from __future__ import annotations

import numpy as np

from ._jit import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
# slots per site and sweep; enough for one bond draw per offset plus extras
SLOTS = 64
INV53 = 1.0 / 9007199254740992.0


def mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * M1) & MASK64
    z = ((z ^ (z >> 27)) * M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int = 0) -> int:
    """64-bit key for one independent stream of a run."""
    return mix_int(mix_int(seed + GOLDEN) ^ ((stream * GOLDEN + M2) & MASK64))


def sweep_key(key: int, sweep: int) -> int:
    return mix_int((key + (sweep + 1) * GOLDEN) & MASK64)


_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_M1 = np.uint64(M1)
_M2 = np.uint64(M2)
_GOLD = np.uint64(GOLDEN)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U30)) * _M1
    z = (z ^ (z >> _U27)) * _M2
    return z ^ (z >> _U31)


def uniforms(skey: int, counters: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) for integer counters ``site * SLOTS + slot``."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        v = _mix_array(np.uint64(skey) ^ _mix_array(c * _GOLD + _M1))
    return (v >> _U11).astype(np.float64) * INV53


@njit
def _mix_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit
def uniform_nb(skey, counter):
    c = np.uint64(counter) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(0xBF58476D1CE4E5B9)
    v = _mix_nb(np.uint64(skey) ^ _mix_nb(c))
    return np.float64(v >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def uniform(skey: int, counter: int) -> float:
    return float(uniforms(skey, np.array([counter]))[0])
