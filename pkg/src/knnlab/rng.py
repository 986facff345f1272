"""Counter-based 64-bit random streams.

Every random quantity in the package is a pure function of a 64-bit key
and a counter, so a trial's stream can be derived from
``(master_seed, trial_index)`` without coordinating with other trials and
any draw can be recomputed in isolation.

Algorithm (``RNG_ALGORITHM`` below, do not change without bumping it):

* the output for ``(key, i)`` is ``mix64(key + (i + 1) * GOLDEN)``, i.e.
  the i-th output of a SplitMix64 generator started at state ``key``;
* ``mix64`` is the SplitMix64 finalizer (Stafford's "Mix13" variant);
* a child key is ``mix64(parent ^ mix64(label + GOLDEN))``;
* a uniform double in [0, 1) keeps the top 53 bits: ``(u >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "splitmix64-counter/1"

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    return z ^ (z >> _S31)


def derive_seed(parent: int, *labels: int) -> int:
    """Derive a child key from ``parent`` by a path of integer labels.

    ``derive_seed(master, trial)`` is the stream for one trial;
    ``derive_seed(seed, 1)`` and ``derive_seed(seed, 2)`` split a seed into
    independent sub-streams.
    """
    if parent < 0 or parent > MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {parent}")
    key = mix64(parent + GOLDEN)
    for label in labels:
        key = mix64(key ^ mix64(int(label) + GOLDEN))
    return key


def derive_seeds(parent: int, labels: np.ndarray) -> np.ndarray:
    """Vectorised ``derive_seed(parent, label)`` over an array of labels."""
    base = np.uint64(derive_seed(parent))
    lab = np.asarray(labels, dtype=np.uint64)
    return _mix64_array(base ^ _mix64_array(lab + _GOLDEN_U))


def derive_child_keys(keys: np.ndarray, label: int) -> np.ndarray:
    """Vectorised ``derive_seed``-style child step: ``mix64(key ^ mix64(label + GOLDEN))``."""
    keys = np.asarray(keys, dtype=np.uint64)
    salt = np.uint64(mix64(int(label) + GOLDEN))
    return _mix64_array(keys ^ salt)


def raw64(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Raw 64-bit outputs for elementwise (key, counter) pairs."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    return _mix64_array(keys + (counters + np.uint64(1)) * _GOLDEN_U)


def uniform(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) for elementwise (key, counter) pairs."""
    return (raw64(keys, counters) >> _S11).astype(np.float64) * _INV53


def uniform_block(key: int, start: int, count: int) -> np.ndarray:
    """``count`` consecutive uniforms of stream ``key`` starting at ``start``."""
    counters = np.arange(start, start + count, dtype=np.uint64)
    return uniform(np.full(count, key, dtype=np.uint64), counters)
