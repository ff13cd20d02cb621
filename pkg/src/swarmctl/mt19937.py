"""32-bit Mersenne Twister (MT19937) with numpy-vectorised twisting.

Seeding follows ``init_genrand`` from the reference ``mt19937ar.c``, so a
generator seeded with 5489 reproduces the canonical output sequence.
"""

from __future__ import annotations

import math

import numpy as np

N = 624
M = 397
MATRIX_A = np.uint32(0x9908B0DF)
UPPER_MASK = np.uint32(0x80000000)
LOWER_MASK = np.uint32(0x7FFFFFFF)


def _twist(mt: np.ndarray) -> None:
    # mt[i] reads mt[i + M] which, for i >= N - M, has already been
    # regenerated; the three slices respect that ordering.
    def block(lo: int, hi: int) -> None:
        i = np.arange(lo, hi)
        y = (mt[i] & UPPER_MASK) | (mt[(i + 1) % N] & LOWER_MASK)
        mag = np.where(y & np.uint32(1), MATRIX_A, np.uint32(0))
        mt[lo:hi] = mt[(i + M) % N] ^ (y >> np.uint32(1)) ^ mag

    block(0, N - M)
    block(N - M, 2 * (N - M))
    block(2 * (N - M), N - 1)
    block(N - 1, N)


def _temper(y: np.ndarray) -> np.ndarray:
    y = y ^ (y >> np.uint32(11))
    y = y ^ ((y << np.uint32(7)) & np.uint32(0x9D2C5680))
    y = y ^ ((y << np.uint32(15)) & np.uint32(0xEFC60000))
    return y ^ (y >> np.uint32(18))


class MT19937:
    """Mersenne Twister generator.

    Parameters
    ----------
    seed : int
        32-bit seed; higher bits are discarded.
    """

    def __init__(self, seed: int = 5489):
        self.seed(seed)

    def seed(self, seed: int) -> None:
        mt = [int(seed) & 0xFFFFFFFF]
        for i in range(1, N):
            prev = mt[-1]
            mt.append((1812433253 * (prev ^ (prev >> 30)) + i) & 0xFFFFFFFF)
        self.state = np.array(mt, dtype=np.uint32)
        self.index = N
        self._spare_normal: float | None = None

    def get_state(self) -> tuple[np.ndarray, int]:
        return self.state.copy(), self.index

    def set_state(self, state: tuple[np.ndarray, int]) -> None:
        words, index = state
        words = np.asarray(words, dtype=np.uint32)
        if words.shape != (N,) or not 0 <= index <= N:
            raise ValueError("MT19937 state must be 624 words and an index in [0, 624]")
        self.state = words.copy()
        self.index = int(index)
        self._spare_normal = None

    def uint32(self, size: int | None = None):
        """Next raw 32-bit output(s)."""
        if size is None:
            return int(self.uint32(1)[0])
        out = np.empty(size, dtype=np.uint32)
        filled = 0
        while filled < size:
            if self.index >= N:
                _twist(self.state)
                self.index = 0
            take = min(size - filled, N - self.index)
            out[filled:filled + take] = _temper(self.state[self.index:self.index + take])
            self.index += take
            filled += take
        return out

    def random(self, size: int | None = None):
        """Uniform doubles on [0, 1) with 53-bit resolution (``genrand_res53``)."""
        if size is None:
            return float(self.random(1)[0])
        words = self.uint32(2 * size).reshape(size, 2)
        a = (words[:, 0] >> np.uint32(5)).astype(np.float64)
        b = (words[:, 1] >> np.uint32(6)).astype(np.float64)
        return (a * 67108864.0 + b) / 9007199254740992.0

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.random() * n), n - 1)

    def normal(self, size: int | None = None, sigma: float = 1.0):
        """Gaussian deviates via Box-Muller on pairs of 53-bit uniforms."""
        if size is None:
            if self._spare_normal is not None:
                z, self._spare_normal = self._spare_normal, None
                return sigma * z
            u1, u2 = self.random(2)
            r = math.sqrt(-2.0 * math.log1p(-u1))
            self._spare_normal = r * math.sin(2.0 * math.pi * u2)
            return sigma * r * math.cos(2.0 * math.pi * u2)
        pairs = (size + 1) // 2
        u = self.random(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()
        return sigma * z[:size]
