"""Counter-based random streams: SplitMix64 mixing feeding xoshiro256**.

Every lattice site owns an independent stream keyed by
``(base_seed, realization_index, site coordinates)``. Nothing depends on
call order, so realizations can be generated in any order on any worker and
still be bit-identical.

All arithmetic is on ``numpy.uint64`` arrays and wraps modulo 2**64.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U64 = np.uint64


def _rotl(x, k):
    return (x << _U64(k)) | (x >> _U64(64 - k))


def mix64(z):
    """SplitMix64 finalizer (works on Python ints and uint64 arrays)."""
    if isinstance(z, (int, np.integer)):
        z = int(z) & MASK64
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)
    z = np.asarray(z, dtype=_U64)
    z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
    z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
    return z ^ (z >> _U64(31))


def zigzag(coords):
    """Map signed integers to unsigned ones injectively (0, -1, 1, -2, ...)."""
    c = np.asarray(coords, dtype=np.int64)
    return np.where(c >= 0, 2 * c, -2 * c - 1).astype(_U64)


def realization_key(base_seed, realization_index):
    return mix64((int(base_seed) + GOLDEN_GAMMA * (int(realization_index) + 1)) & MASK64)


def stream_seeds(base_seed, realization_index, coords):
    """Per-site stream seeds for integer lattice coordinates of shape (n, d)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    key = _U64(realization_key(base_seed, realization_index))
    s = np.full(coords.shape[0], key, dtype=_U64)
    for axis in range(coords.shape[1]):
        s = mix64(s ^ mix64(zigzag(coords[:, axis]) + _U64(GOLDEN_GAMMA)))
    return s


def xoshiro_outputs(seeds, count):
    """First ``count`` xoshiro256** outputs of each stream.

    The 256-bit state of a stream is filled from a SplitMix64 sequence
    started at its seed. Returns an array of shape ``(len(seeds), count)``.
    """
    seeds = np.asarray(seeds, dtype=_U64)
    with np.errstate(over="ignore"):
        sm = seeds.copy()
        state = []
        for _ in range(4):
            sm = sm + _U64(GOLDEN_GAMMA)
            state.append(mix64(sm))
    return xoshiro256ss(state, count)


def xoshiro256ss(state, count):
    """Run xoshiro256** from explicit state words ``(s0, s1, s2, s3)``."""
    s0, s1, s2, s3 = (np.atleast_1d(np.asarray(w, dtype=_U64)).copy() for w in state)
    out = np.empty((s0.shape[0], count), dtype=_U64)
    with np.errstate(over="ignore"):
        for j in range(count):
            out[:, j] = _rotl(s1 * _U64(5), 7) * _U64(9)
            t = s1 << _U64(17)
            s2 = s2 ^ s0
            s3 = s3 ^ s1
            s1 = s1 ^ s2
            s0 = s0 ^ s3
            s2 = s2 ^ t
            s3 = _rotl(s3, 45)
    return out


def unit_uniform(bits):
    """Top 53 bits of each 64-bit word scaled to [0, 1)."""
    return (np.asarray(bits, dtype=_U64) >> _U64(11)).astype(np.float64) * (1.0 / (1 << 53))


def derive_seed(base_seed, label):
    """Independent 64-bit seed for a named sub-ensemble (e.g. the DOS pre-run)."""
    h = int(base_seed) & MASK64
    for ch in label.encode():
        h = mix64(h ^ ch)
    return mix64(h + GOLDEN_GAMMA)
