"""Index-based concatenated coding for the shuffling-sampling channel.

Each molecule carries a unique ceil(log2 M)-bit index followed by payload
bits, protected per-molecule by a pluggable inner code and across molecules
by a systematic Reed-Solomon erasure code of block length M.  The decoder
inner-decodes every read, uses the indices to sort and deduplicate, erases
missing or conflicting indices, and erasure-decodes the outer code.

Also provides the short-molecule scheme for L < log2(M): index almost the
whole molecule, store one data bit per index, and rely on massive natural
replication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .channel import ChannelOutput, CodewordSet
from .gf import ReedSolomonErasure, TooManyErasures

__all__ = [
    "ConfigError",
    "InnerCodeSpec",
    "CodecConfig",
    "DecodeReport",
    "inner_encode",
    "inner_decode",
    "outer_encode",
    "outer_decode",
    "encode_message",
    "decode_output",
    "achieved_rate",
    "random_message",
    "short_molecule_encode",
    "short_molecule_decode",
    "dump_reads",
    "parse_reads",
    "write_reads_file",
    "read_reads_file",
]


class ConfigError(ValueError):
    """Inconsistent codec configuration."""


def int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Big-endian bit expansion of integers along a trailing axis."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_int(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`int_to_bits` (big-endian, last axis)."""
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[-1]
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits @ weights


# ---------------------------------------------------------------------------
# Inner codes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InnerCodeSpec:
    """Per-molecule code choice.

    * ``identity``: rate 1, no protection.
    * ``repetition``: each info bit repeated r times (r odd), majority decode.
    * ``table_ml``: random codebook of 2^k_info length-L words drawn from a
      seeded stream, decoded to the nearest codeword in Hamming distance
      (ties resolved to the lowest codeword index).
    """

    kind: str
    r: int = 0
    k_info: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind == "identity":
            pass
        elif self.kind == "repetition":
            if self.r < 1 or self.r % 2 == 0:
                raise ConfigError(f"repetition factor must be odd >= 1, got {self.r}")
        elif self.kind == "table_ml":
            if not 1 <= self.k_info <= 20:
                raise ConfigError(f"table code needs 1 <= k_info <= 20, got {self.k_info}")
        else:
            raise ConfigError(f"unknown inner code kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "InnerCodeSpec":
        return cls(kind="identity")

    @classmethod
    def repetition(cls, r: int) -> "InnerCodeSpec":
        return cls(kind="repetition", r=r)

    @classmethod
    def table_ml(cls, k_info: int, seed: int) -> "InnerCodeSpec":
        return cls(kind="table_ml", k_info=k_info, seed=seed)

    def rate(self) -> Fraction:
        if self.kind == "identity":
            return Fraction(1)
        if self.kind == "repetition":
            return Fraction(1, self.r)
        raise ConfigError("table_ml rate depends on L; use info_bits(L) / L")

    def info_bits(self, L: int) -> int:
        """floor(L * r_inner): info bits carried per length-L molecule."""
        if self.kind == "identity":
            return L
        if self.kind == "repetition":
            if L % self.r != 0:
                raise ConfigError(f"repetition({self.r}) needs r | L, got L={L}")
            return L // self.r
        return self.k_info


class _InnerCode:
    """Inner spec bound to a molecule length; does the actual bit work."""

    def __init__(self, spec: InnerCodeSpec, L: int):
        self.spec = spec
        self.L = L
        self.k = spec.info_bits(L)
        if self.k > L:
            raise ConfigError(f"inner info bits {self.k} exceed molecule length {L}")
        if spec.kind == "table_ml":
            rng = np.random.Generator(
                np.random.Philox(seed=np.random.SeedSequence(spec.seed))
            )
            book = rng.integers(0, 2, size=(1 << self.k, L), dtype=np.uint8)
            uniq = np.unique(book, axis=0)
            if uniq.shape[0] != book.shape[0]:
                raise ConfigError(
                    f"table_ml seed {spec.seed} produced duplicate codewords "
                    f"for k={self.k}, L={L}; pick another seed"
                )
            self.codebook = book

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Encode (..., k) info bits into (..., L) code bits."""
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1] != self.k:
            raise ConfigError(f"expected {self.k} info bits, got {info.shape[-1]}")
        if self.spec.kind == "identity":
            return info.copy()
        if self.spec.kind == "repetition":
            return np.repeat(info, self.spec.r, axis=-1)
        return self.codebook[bits_to_int(info)]

    def decode(self, reads: np.ndarray) -> np.ndarray:
        """Decode (..., L) reads back to (..., k) info bits."""
        reads = np.atleast_2d(np.asarray(reads, dtype=np.uint8))
        if reads.shape[-1] != self.L:
            raise ConfigError(f"expected length-{self.L} reads, got {reads.shape[-1]}")
        if self.spec.kind == "identity":
            return reads.copy()
        if self.spec.kind == "repetition":
            r = self.spec.r
            groups = reads.reshape(reads.shape[0], self.k, r)
            return (groups.sum(axis=2) * 2 > r).astype(np.uint8)
        # Nearest codeword; argmin takes the first minimum, i.e. lowest index.
        dists = (reads[:, None, :] ^ self.codebook[None, :, :]).sum(axis=2)
        best = np.argmin(dists, axis=1)
        return int_to_bits(best, self.k)


@lru_cache(maxsize=None)
def _inner_code(spec: InnerCodeSpec, L: int) -> _InnerCode:
    return _InnerCode(spec, L)


def inner_encode(info: np.ndarray, spec: InnerCodeSpec, L: int) -> np.ndarray:
    """Encode one info word (or a batch) to length-L molecules."""
    return _inner_code(spec, L).encode(info)


def inner_decode(read: np.ndarray, spec: InnerCodeSpec, L: int) -> np.ndarray:
    """Decode one read (or a batch) back to info bits."""
    code = _inner_code(spec, L)
    read = np.asarray(read, dtype=np.uint8)
    single = read.ndim == 1
    out = code.decode(read)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Outer code (thin wrappers over the Reed-Solomon erasure codec)
# ---------------------------------------------------------------------------

def outer_encode(symbols: np.ndarray, n: int, k: int, w: int) -> np.ndarray:
    """Systematic RS encoding of k symbols to an n-symbol codeword over GF(2^w)."""
    return ReedSolomonErasure(n, k, w).encode(symbols)


def outer_decode(symbols: np.ndarray, erased: np.ndarray, n: int, k: int, w: int) -> np.ndarray:
    """Recover the k data symbols; raises TooManyErasures past the MDS bound."""
    return ReedSolomonErasure(n, k, w).decode_erasures(symbols, erased)


# ---------------------------------------------------------------------------
# Full scheme
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodecConfig:
    """Full scheme parameters: molecule count/length, inner code, outer code.

    ``field_width`` defaults to the smallest w with 2^w >= M that divides
    the per-molecule payload (payload bits = inner info bits - index bits);
    each molecule then carries payload_bits / w outer symbols, outer
    codewords being interleaved across molecules.
    """

    M: int
    L: int
    inner: InnerCodeSpec
    outer_k: int
    field_width: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError(f"M must be >= 2, got {self.M}")
        if not 1 <= self.outer_k <= self.M:
            raise ConfigError(f"need 1 <= outer_k <= M, got outer_k={self.outer_k}")
        if self.payload_bits < 1:
            raise ConfigError(
                f"no payload room: inner info bits {self.info_bits} <= "
                f"index bits {self.index_bits}"
            )
        if self.field_width == 0:
            object.__setattr__(self, "field_width", self._auto_field_width())
        w = self.field_width
        if (1 << w) < self.M:
            raise ConfigError(f"field GF(2^{w}) too small for M={self.M} symbols")
        if self.payload_bits % w != 0:
            raise ConfigError(
                f"field width {w} must divide payload bits {self.payload_bits}"
            )

    def _auto_field_width(self) -> int:
        for w in range(self.index_bits, self.payload_bits + 1):
            if self.payload_bits % w == 0 and w <= 16:
                return w
        raise ConfigError(
            f"no field width w in [{self.index_bits}, 16] divides "
            f"payload bits {self.payload_bits}"
        )

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.M)))

    @property
    def info_bits(self) -> int:
        return self.inner.info_bits(self.L)

    @property
    def payload_bits(self) -> int:
        return self.info_bits - self.index_bits

    @property
    def symbols_per_molecule(self) -> int:
        return self.payload_bits // self.field_width

    @property
    def message_bits(self) -> int:
        return self.outer_k * self.payload_bits


@dataclass(frozen=True)
class DecodeReport:
    """Outcome of one decode: recovered message (or None), and diagnostics.

    ``collisions`` counts indices observed with conflicting payloads (all
    erased); ``undetected_risk`` flags that some read decoded to an index
    >= M, i.e. a certain inner-decode error was discarded.
    """

    message: np.ndarray | None
    erasures: int
    collisions: int
    undetected_risk: bool

    @property
    def ok(self) -> bool:
        return self.message is not None


def random_message(cfg: CodecConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random message of the exact length the config encodes."""
    return rng.integers(0, 2, size=cfg.message_bits, dtype=np.uint8)


def achieved_rate(cfg: CodecConfig) -> Fraction:
    """Exact data rate in bits per stored base: (k/M) * (info - index) / L."""
    return Fraction(cfg.outer_k, cfg.M) * Fraction(cfg.payload_bits, cfg.L)


def encode_message(msg: np.ndarray, cfg: CodecConfig) -> CodewordSet:
    """Encode message bits into M distinct molecules (outer RS, index, inner)."""
    msg = np.asarray(msg, dtype=np.uint8)
    if msg.shape != (cfg.message_bits,):
        raise ConfigError(
            f"message must be exactly {cfg.message_bits} bits, got {msg.shape}"
        )
    s, w = cfg.symbols_per_molecule, cfg.field_width
    rs = ReedSolomonErasure(cfg.M, cfg.outer_k, w)
    # (outer_k, s) data symbols, one column per interleaved outer codeword.
    data = bits_to_int(msg.reshape(cfg.outer_k, s, w))
    payload_syms = np.empty((cfg.M, s), dtype=np.int64)
    for j in range(s):
        payload_syms[:, j] = rs.encode(data[:, j])
    payload = int_to_bits(payload_syms, w).reshape(cfg.M, cfg.payload_bits)
    index = int_to_bits(np.arange(cfg.M), cfg.index_bits)
    info = np.concatenate([index, payload], axis=1)
    return CodewordSet(molecules=inner_encode(info, cfg.inner, cfg.L))


def decode_output(out: ChannelOutput, cfg: CodecConfig) -> DecodeReport:
    """Decode a channel output: sort by index, erase conflicts, RS-decode."""
    if out.N > 0 and out.L != cfg.L:
        raise ConfigError(f"reads have length {out.L}, config says {cfg.L}")
    s, w = cfg.symbols_per_molecule, cfg.field_width

    undetected_risk = False
    seen: dict[int, bytes | None] = {}  # index -> payload bytes, None = conflict
    payload_of: dict[int, np.ndarray] = {}
    if out.N > 0:
        info = _inner_code(cfg.inner, cfg.L).decode(out.reads)
        indices = bits_to_int(info[:, : cfg.index_bits])
        payloads = info[:, cfg.index_bits:]
        for i in range(out.N):
            idx = int(indices[i])
            if idx >= cfg.M:
                undetected_risk = True
                continue
            key = payloads[i].tobytes()
            if idx not in seen:
                seen[idx] = key
                payload_of[idx] = payloads[i]
            elif seen[idx] is not None and seen[idx] != key:
                seen[idx] = None  # conflicting duplicates: erase this index
                del payload_of[idx]

    collisions = sum(1 for v in seen.values() if v is None)
    erasures = cfg.M - len(payload_of)
    if erasures > cfg.M - cfg.outer_k:
        return DecodeReport(None, erasures, collisions, undetected_risk)

    symbols = np.zeros((cfg.M, s), dtype=np.int64)
    erased = np.ones(cfg.M, dtype=bool)
    for idx, bits in payload_of.items():
        symbols[idx] = bits_to_int(bits.reshape(s, w))
        erased[idx] = False

    rs = ReedSolomonErasure(cfg.M, cfg.outer_k, w)
    data = np.empty((cfg.outer_k, s), dtype=np.int64)
    try:
        for j in range(s):
            data[:, j] = rs.decode_erasures(symbols[:, j], erased)
    except TooManyErasures:  # unreachable given the count check above
        return DecodeReport(None, erasures, collisions, undetected_risk)
    msg = int_to_bits(data, w).reshape(cfg.message_bits)
    return DecodeReport(msg, erasures, collisions, undetected_risk)


# ---------------------------------------------------------------------------
# Short-molecule scheme (beta < 1)
# ---------------------------------------------------------------------------

def short_molecule_encode(bits: np.ndarray, M: int, L: int) -> CodewordSet:
    """Store 2^(L-1) bits on M short molecules by replication.

    Molecule layout is an (L-1)-bit segment index followed by that segment's
    single data bit.  Each of the K = 2^(L-1) segments is emitted
    ceil(M / K) times, interleaved round-robin and truncated to exactly M
    molecules so every segment keeps at least floor(M / K) >= 1 copies.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    K = 1 << (L - 1)
    if bits.shape != (K,):
        raise ConfigError(f"need exactly 2^(L-1)={K} bits, got {bits.shape}")
    if M < K:
        raise ConfigError(f"need M >= 2^(L-1)={K}, got M={M}")
    copies = math.ceil(M / K)
    order = np.tile(np.arange(K), copies)[:M]
    molecules = np.concatenate(
        [int_to_bits(order, L - 1), bits[order][:, None]], axis=1
    )
    return CodewordSet(molecules=molecules)


def short_molecule_decode(out: ChannelOutput, L: int) -> np.ndarray:
    """Majority-vote the data bit of each observed segment index.

    Returns an int8 array of length 2^(L-1): 0/1 where recovered, -1 for
    segments never observed.
    """
    K = 1 << (L - 1)
    result = np.full(K, -1, dtype=np.int8)
    if out.N == 0:
        return result
    if out.L != L:
        raise ConfigError(f"reads have length {out.L}, expected {L}")
    idx = bits_to_int(out.reads[:, : L - 1])
    ones = np.bincount(idx, weights=out.reads[:, -1].astype(float), minlength=K)
    total = np.bincount(idx, minlength=K)
    observed = total > 0
    result[observed] = (2 * ones[observed] > total[observed]).astype(np.int8)
    return result


# ---------------------------------------------------------------------------
# Wire format: newline-delimited 0/1 strings with an "M=<rows> L=<cols>" header
# ---------------------------------------------------------------------------

def dump_reads(bits: np.ndarray) -> str:
    """Serialize an (N, L) bit array to the delimited text format."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    rows, cols = bits.shape
    lines = [f"M={rows} L={cols}"]
    ascii_rows = (bits + ord("0")).astype(np.uint8)
    lines.extend(r.tobytes().decode("ascii") for r in ascii_rows)
    return "\n".join(lines) + "\n"


def parse_reads(text: str) -> np.ndarray:
    """Parse the delimited text format back to an (N, L) uint8 bit array."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty reads file")
    header = lines[0].split()
    try:
        fields = dict(part.split("=") for part in header)
        rows, cols = int(fields["M"]), int(fields["L"])
    except (ValueError, KeyError) as e:
        raise ValueError(f"bad header line {lines[0]!r}") from e
    body = [ln for ln in lines[1:] if ln]
    if len(body) != rows:
        raise ValueError(f"header says {rows} reads, file has {len(body)}")
    out = np.empty((rows, cols), dtype=np.uint8)
    for i, ln in enumerate(body):
        if len(ln) != cols or set(ln) - {"0", "1"}:
            raise ValueError(f"line {i + 2} is not a {cols}-bit 0/1 string")
        out[i] = np.frombuffer(ln.encode("ascii"), dtype=np.uint8) - ord("0")
    return out


def write_reads_file(path, bits: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dump_reads(bits))


def read_reads_file(path) -> np.ndarray:
    with open(path) as fh:
        return parse_reads(fh.read())
