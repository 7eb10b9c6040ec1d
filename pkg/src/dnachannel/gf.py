"""GF(2^w) arithmetic and a systematic Reed-Solomon erasure codec.

Field elements are integers 0..2^w-1; multiplication goes through log/exp
tables built from a fixed primitive polynomial per width, vectorized with
numpy so whole codewords are processed at once.

The Reed-Solomon code evaluates the degree-(k-1) polynomial interpolating
the k data symbols at points 0..n-1, so the first k codeword symbols are
the data itself.  Decoding from erasures re-interpolates from any k
surviving symbols (Lagrange in log space); any n-k erasures are
recoverable, one more is not, which is reported by raising
:class:`TooManyErasures`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["GF2w", "ReedSolomonErasure", "TooManyErasures"]

# Primitive polynomials (with the x^w term) making x a generator of GF(2^w)*.
_PRIMITIVE_POLY = {
    2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11D,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x4443,
    15: 0x8003, 16: 0x1100B,
}


class TooManyErasures(Exception):
    """Raised when an erasure pattern exceeds the code's n - k budget."""


@lru_cache(maxsize=None)
def GF2w(w: int) -> "_Field":
    """The (cached) field GF(2^w), 2 <= w <= 16."""
    return _Field(w)


class _Field:
    def __init__(self, w: int):
        if w not in _PRIMITIVE_POLY:
            raise ValueError(f"field width must be in {sorted(_PRIMITIVE_POLY)}, got {w}")
        self.w = w
        self.order = 1 << w
        self.q = self.order - 1  # multiplicative group order
        poly = _PRIMITIVE_POLY[w]
        exp = np.zeros(self.q, dtype=np.int64)
        log = np.zeros(self.order, dtype=np.int64)
        x = 1
        for i in range(self.q):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= poly
        if x != 1:
            raise AssertionError(f"polynomial {poly:#x} is not primitive for w={w}")
        self.exp = exp
        self.log = log

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = self.exp[(self.log[a] + self.log[b]) % self.q]
        return np.where((a == 0) | (b == 0), 0, out)

    def inv(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if (a == 0).any():
            raise ZeroDivisionError("inverse of 0 in GF(2^w)")
        return self.exp[(self.q - self.log[a]) % self.q]


class ReedSolomonErasure:
    """Systematic [n, k] Reed-Solomon code over GF(2^w), erasure decoding only."""

    def __init__(self, n: int, k: int, w: int):
        field = GF2w(w)
        if not 1 <= k <= n:
            raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
        if n > field.order:
            raise ValueError(f"n={n} exceeds 2^w={field.order} evaluation points")
        self.n = n
        self.k = k
        self.field = field
        # Parity generator: parity[t] = sum_i basis[t, i] * data[i], where
        # basis[t, i] is the Lagrange polynomial through data points 0..k-1
        # evaluated at point k+t.  Stored in log domain (k == n means no parity).
        if n > k:
            self._parity_log = self._lagrange_log(
                np.arange(k, dtype=np.int64), np.arange(k, n, dtype=np.int64)
            )

    def _lagrange_log(self, base: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Log-domain Lagrange basis values l_i(x_t) for targets off the base."""
        f = self.field
        diff = targets[:, None] ^ base[None, :]  # (t, i): x_t - x_i, never 0
        logdiff = f.log[diff]
        row_all = logdiff.sum(axis=1)  # log prod_j (x_t - x_j)
        pair = base[:, None] ^ base[None, :]  # (i, j): x_i - x_j
        logpair = f.log[np.where(pair == 0, 1, pair)]  # diagonal -> log 1 = 0
        denom = logpair.sum(axis=1)  # log prod_{j != i} (x_i - x_j)
        return (row_all[:, None] - logdiff - denom[None, :]) % f.q

    def _apply_log_matrix(self, basis_log: np.ndarray, values: np.ndarray) -> np.ndarray:
        f = self.field
        terms = f.exp[(basis_log + f.log[values][None, :]) % f.q]
        terms = np.where(values[None, :] == 0, 0, terms)
        return np.bitwise_xor.reduce(terms, axis=1)

    def encode(self, data: np.ndarray) -> np.ndarray:
        """Map k data symbols to the n-symbol codeword (systematic)."""
        data = np.asarray(data, dtype=np.int64)
        if data.shape != (self.k,):
            raise ValueError(f"expected {self.k} data symbols, got shape {data.shape}")
        if (data < 0).any() or (data >= self.field.order).any():
            raise ValueError("data symbols out of field range")
        if self.n == self.k:
            return data.copy()
        parity = self._apply_log_matrix(self._parity_log, data)
        return np.concatenate([data, parity])

    def decode_erasures(self, symbols: np.ndarray, erased: np.ndarray) -> np.ndarray:
        """Recover the k data symbols given a codeword with erased positions.

        ``symbols`` values at erased positions are ignored.  Raises
        :class:`TooManyErasures` when more than n - k positions are erased.
        """
        symbols = np.asarray(symbols, dtype=np.int64)
        erased = np.asarray(erased, dtype=bool)
        if symbols.shape != (self.n,) or erased.shape != (self.n,):
            raise ValueError(f"expected {self.n} symbols and erasure flags")
        n_erased = int(erased.sum())
        if n_erased > self.n - self.k:
            raise TooManyErasures(
                f"{n_erased} erasures exceed redundancy n-k={self.n - self.k}"
            )
        data = symbols[: self.k].copy()
        missing = np.flatnonzero(erased[: self.k])
        if missing.size == 0:
            return data
        avail = np.flatnonzero(~erased)[: self.k]
        basis_log = self._lagrange_log(avail, missing)
        data[missing] = self._apply_log_matrix(basis_log, symbols[avail])
        return data
