"""Block-fading channel draws for a relay topology and per-path effective channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .numerics import RngStream, cn_draws, cn_draws_batch, mutual_info_bits
from .topology import RelayTopology


@dataclass(frozen=True)
class SnrPoint:
    """Aggregate SNR, with the per-stage amplification gains folded in."""

    snr_db: float

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @classmethod
    def from_linear(cls, snr_linear: float) -> "SnrPoint":
        if snr_linear < 0:
            raise ValueError("snr must be nonnegative")
        return cls(10.0 * np.log10(snr_linear) if snr_linear > 0 else -np.inf)


@dataclass(frozen=True)
class ChannelSet:
    """Per-hop matrices; ``hops[n]`` has shape ``(..., M_{n+1}, M_n)``.

    A leading batch axis is allowed, in which case every hop carries it.
    """

    hops: tuple[np.ndarray, ...]

    @property
    def batched(self) -> bool:
        return self.hops[0].ndim == 3


def draws_per_realization(t: RelayTopology) -> int:
    m = t.stage_antennas
    return sum(a * b for a, b in zip(m, m[1:]))


def _split_hops(t: RelayTopology, z: np.ndarray) -> ChannelSet:
    m = t.stage_antennas
    hops = []
    pos = 0
    lead = z.shape[:-1]
    for n in range(t.hops):
        size = m[n + 1] * m[n]
        hops.append(z[..., pos:pos + size].reshape(*lead, m[n + 1], m[n]))
        pos += size
    return ChannelSet(tuple(hops))


def sample_channels(t: RelayTopology, rng: RngStream) -> ChannelSet:
    """One realisation; hop 0 is filled first, each matrix row-major."""
    return _split_hops(t, cn_draws(rng, draws_per_realization(t)))


def sample_channels_batch(t: RelayTopology, seed: int, first_trial: int, count: int) -> ChannelSet:
    """Realisations for trials ``first_trial .. first_trial+count-1`` (stream id = trial)."""
    return _split_hops(t, cn_draws_batch(seed, first_trial, count, draws_per_realization(t)))


def _stage_sets(p) -> tuple[tuple[int, ...], ...]:
    return p.subsets


def path_product(c: ChannelSet, p) -> np.ndarray:
    """Effective channel of a path: ``H^{N-1}_sub ... H^0_sub``.

    ``p`` is a :class:`~relay_dmt.topology.Path` or a
    :class:`~relay_dmt.topology.P2Chain`; for the latter the factors are
    rectangular.
    """
    sets = _stage_sets(p)
    if len(sets) != len(c.hops) + 1:
        raise DimensionMismatch(f"path has {len(sets)} stages, channel has {len(c.hops)} hops")
    prod = None
    for n, h in enumerate(c.hops):
        rx, tx = sets[n + 1], sets[n]
        if max(rx) >= h.shape[-2] or max(tx) >= h.shape[-1]:
            raise DimensionMismatch(f"path subsets exceed hop {n} shape {h.shape[-2:]}")
        sub = h[..., list(rx), :][..., list(tx)]
        prod = sub if prod is None else sub @ prod
    return prod


def path_mutual_info(c: ChannelSet, p, s: SnrPoint) -> float | np.ndarray:
    return mutual_info_bits(s.snr_linear, path_product(c, p))


@dataclass(frozen=True)
class RateSpec:
    """Target rate: ``scaled`` means ``r * log2(snr)`` bits, ``fixed`` a constant ``R`` bits."""

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("scaled", "fixed"):
            raise ValueError(f"unknown rate mode {self.mode!r}")
        if self.value < 0:
            raise ValueError("rate parameter must be nonnegative")

    @classmethod
    def scaled(cls, r: float) -> "RateSpec":
        return cls("scaled", float(r))

    @classmethod
    def fixed(cls, bits: float) -> "RateSpec":
        return cls("fixed", float(bits))

    def threshold_bits(self, s: SnrPoint) -> float:
        if self.mode == "fixed":
            return self.value
        if self.value == 0:
            return 0.0
        return self.value * np.log2(s.snr_linear)

    @property
    def multiplexing_gain(self) -> float:
        return self.value if self.mode == "scaled" else 0.0
