"""Complex-matrix primitives shared by the simulators.

Seeded sampling uses a counter-based generator: every (seed, stream id) pair
names an independent Philox-4x64 stream, so trial ``t`` of an experiment always
sees the same draws no matter how the trial range is split between workers.
``philox4x64`` evaluates the same function as :class:`numpy.random.Philox`, but
vectorised over many counters at once, which is what the batch samplers use.

All log-determinants are natural logs unless the name says ``bits``.
Differential entropies are reported WITHOUT the ``d*ln(2*pi*e)`` constant;
only entropy differences are ever exposed, so the constant cancels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch, SingularMatrix

LN2 = np.log(2.0)
PD_RTOL = 1e-12
HERMITIAN_ATOL = 1e-12

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
_PHILOX_M1 = np.uint64(0xCA5A826395121157)
_PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
_PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_U53 = 2.0 ** -53


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def _mulhilo64(a: np.ndarray, b: np.uint64) -> tuple[np.ndarray, np.ndarray]:
    a0 = a & _MASK32
    a1 = a >> _SHIFT32
    b0 = b & _MASK32
    b1 = b >> _SHIFT32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> _SHIFT32) + (p01 & _MASK32) + (p10 & _MASK32)
    hi = p11 + (p01 >> _SHIFT32) + (p10 >> _SHIFT32) + (mid >> _SHIFT32)
    return hi, a * b


def philox4x64(ctr: tuple[np.ndarray, ...], key: tuple[int, int], rounds: int = 10):
    """Philox-4x64 block function over broadcastable counter arrays.

    ``ctr`` is four uint64 arrays (lowest word first); returns four uint64
    arrays with the generator output words in stream order.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in ctr)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(key[0])
    k1 = np.uint64(key[1])
    with np.errstate(over="ignore"):
        for i in range(rounds):
            if i:
                k0 = np.uint64((int(k0) + int(_PHILOX_W0)) & 0xFFFFFFFFFFFFFFFF)
                k1 = np.uint64((int(k1) + int(_PHILOX_W1)) & 0xFFFFFFFFFFFFFFFF)
            hi0, lo0 = _mulhilo64(c0, _PHILOX_M0)
            hi1, lo1 = _mulhilo64(c2, _PHILOX_M1)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@dataclass(frozen=True)
class RngStream:
    """An independent, reproducible random stream named by ``(seed, stream_id)``.

    The stream is Philox-4x64 keyed by ``seed`` with the stream id in the second
    counter word, so distinct ids never overlap. Being a plain value, a stream
    always replays from its start.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2 ** 64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def bit_generator(self) -> np.random.Philox:
        return np.random.Philox(key=[self.seed, 0], counter=[0, self.stream_id, 0, 0])

    def generator(self) -> np.random.Generator:
        return np.random.Generator(self.bit_generator())


def _words_to_cn(words: np.ndarray, n: int) -> np.ndarray:
    # word 2j -> radius, word 2j+1 -> phase; |z|^2 = -ln(U) ~ Exp(1)
    w = words[..., : 2 * n]
    u_r = (w[..., 0::2] >> np.uint64(11)).astype(np.float64) * _U53
    u_p = (w[..., 1::2] >> np.uint64(11)).astype(np.float64) * _U53
    radius = np.sqrt(-np.log1p(-u_r))
    return radius * np.exp(2j * np.pi * u_p)


def cn_draws(rng: RngStream, n: int) -> np.ndarray:
    """First ``n`` CN(0, 1) samples of a stream."""
    words = rng.bit_generator().random_raw(2 * n)
    return _words_to_cn(np.asarray(words, dtype=np.uint64), n)


def cn_draws_batch(seed: int, first_stream: int, count: int, n: int) -> np.ndarray:
    """``cn_draws(RngStream(seed, s), n)`` for ``s`` in ``[first_stream, first_stream+count)``.

    Shape ``(count, n)``. Bit-identical to the per-stream path.
    """
    nblocks = -(-2 * n // 4)
    streams = np.arange(first_stream, first_stream + count, dtype=np.uint64)[:, None]
    blocks = np.arange(1, nblocks + 1, dtype=np.uint64)[None, :]
    zero = np.uint64(0)
    out = philox4x64((blocks, streams, zero, zero), (seed, 0))
    words = np.stack(out, axis=-1).reshape(count, 4 * nblocks)
    return _words_to_cn(words, n)


def sample_cn_matrix(rows: int, cols: int, rng: RngStream) -> np.ndarray:
    """i.i.d. CN(0, 1) matrix, filled row-major from the start of ``rng``."""
    if rows < 1 or cols < 1:
        raise DimensionMismatch(f"matrix shape must be positive, got {rows}x{cols}")
    return cn_draws(rng, rows * cols).reshape(rows, cols)


# ---------------------------------------------------------------------------
# Determinants and mutual information
# ---------------------------------------------------------------------------

def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def logdet_hermitian(a) -> float | np.ndarray:
    """``ln det(A)`` for Hermitian positive-definite ``A`` (stacks allowed).

    Raises SingularMatrix when the smallest eigenvalue is not above
    ``1e-12`` times the largest.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"square matrix expected, got shape {a.shape}")
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-2]) if a.ndim > 2 else 0.0
    w = np.linalg.eigvalsh(hermitian_part(a))
    wmax = w[..., -1]
    wmin = w[..., 0]
    if not np.all(np.isfinite(w)) or np.any(wmin <= PD_RTOL * np.maximum(wmax, 0.0)) or np.any(wmax <= 0):
        raise SingularMatrix("matrix is not numerically positive definite")
    out = np.sum(np.log(w), axis=-1)
    return float(out) if out.ndim == 0 else out


def mutual_info_bits(snr, m) -> float | np.ndarray:
    """``log2 det(I + snr * M M^H)``; ``M`` may carry leading batch axes."""
    m = np.asarray(m)
    if m.ndim < 2:
        raise DimensionMismatch(f"matrix expected, got shape {m.shape}")
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be nonnegative")
    rows, cols = m.shape[-2:]
    if min(rows, cols) == 1:
        g = np.sum(np.abs(m) ** 2, axis=(-1, -2))
        out = np.log2(1.0 + snr * g)
    else:
        # Sylvester: use the smaller Gram matrix
        mh = np.conj(np.swapaxes(m, -1, -2))
        gram = mh @ m if cols < rows else m @ mh
        k = gram.shape[-1]
        s = snr[..., None, None] if snr.ndim else snr
        out = logdet_hermitian(np.eye(k) + s * gram) / LN2
    out = np.maximum(np.asarray(out), 0.0)  # eigen round-off at tiny snr
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Jointly Gaussian vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JointGaussianCov:
    """Covariance of a concatenation of named complex Gaussian blocks.

    ``blocks`` maps a name to its contiguous index span; ``cov`` has shape
    ``(..., D, D)`` so a whole batch of realisations can share one layout.
    """

    blocks: Mapping[str, slice]
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        dim = self.cov.shape[-1]
        if self.cov.shape[-2] != dim:
            raise DimensionMismatch("covariance must be square")
        covered = sorted((s.start, s.stop) for s in self.blocks.values())
        pos = 0
        for start, stop in covered:
            if start != pos or stop < start:
                raise DimensionMismatch("block spans must partition the index range")
            pos = stop
        if pos != dim:
            raise DimensionMismatch(f"block spans cover {pos} of {dim} indices")

    @classmethod
    def from_sizes(cls, sizes: Iterable[tuple[str, int]], cov: np.ndarray) -> "JointGaussianCov":
        blocks = {}
        pos = 0
        for name, size in sizes:
            blocks[name] = slice(pos, pos + size)
            pos += size
        return cls(blocks, cov)

    def index(self, names: Iterable[str]) -> np.ndarray:
        idx = [np.arange(self.blocks[n].start, self.blocks[n].stop) for n in names]
        return np.concatenate(idx) if idx else np.zeros(0, dtype=int)


def _as_names(names) -> list[str]:
    if isinstance(names, str):
        return [names]
    return list(names)


def conditional_cov(j: JointGaussianCov, target, given) -> np.ndarray:
    t = j.index(_as_names(target))
    g = j.index(_as_names(given))
    c = j.cov
    ctt = c[..., t[:, None], t[None, :]]
    if g.size == 0:
        return ctt
    ctg = c[..., t[:, None], g[None, :]]
    cgg = c[..., g[:, None], g[None, :]]
    gt = np.conj(np.swapaxes(ctg, -1, -2))
    try:
        x = np.linalg.solve(cgg, gt)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("conditioning covariance is singular") from exc
    return ctt - ctg @ x


def conditional_entropy(j: JointGaussianCov, target, given=()) -> float | np.ndarray:
    """``ln det`` of the conditional covariance of ``target`` given ``given`` (nats)."""
    target = _as_names(target)
    given = _as_names(given)
    if set(target) & set(given):
        raise ValueError("target and given block sets must be disjoint")
    return logdet_hermitian(conditional_cov(j, target, given))


def gaussian_cmi(j: JointGaussianCov, a, b, c=()) -> float | np.ndarray:
    """``I(A; B | C)`` in bits, clamped at zero."""
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("block sets must be pairwise disjoint")
    if not a or not b:
        shape = j.cov.shape[:-2]
        return np.zeros(shape) if shape else 0.0
    nats = (conditional_entropy(j, a, c) + conditional_entropy(j, b, c)
            - conditional_entropy(j, a + b, c))
    out = np.maximum(np.asarray(nats) / LN2, 0.0)
    return float(out) if out.ndim == 0 else out
