"""Outage-probability estimation over SNR grids and diversity-exponent fits.

Trial ``t`` of an experiment always draws its channel from stream
``(seed, t)``. Trials are processed in fixed chunks of ``CHUNK`` consecutive
indices whatever the worker count, so counts are bit-identical for any
parallelism. A sweep reuses the same trials at every SNR point (common random
numbers): draws are generated once and evaluated on the whole grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Protocol, Sequence

import numpy as np

from .cf import CfScenario, cf_rate_batch, sample_cf_batch
from .channel import RateSpec, SnrPoint, path_product, sample_channels_batch
from .errors import RequiresMtGeMr
from .jeemas import SelectionPolicy, candidate_paths
from .topology import P2Chain, Path, RelayTopology

CHUNK = 1 << 15
CF_CHUNK = 1 << 13
MIN_EVENTS = 50
MIN_POINTS = 3
CONFIDENCE = 0.95


# -- strategies -------------------------------------------------------------

class Strategy(Protocol):
    chunk: int

    def outage_batch(self, seed: int, first: int, count: int, snrs: Sequence[SnrPoint],
                     rate: RateSpec) -> np.ndarray:
        """Outage indicators of shape ``(len(snrs), count)``."""


def _gram_eigs(prod: np.ndarray) -> np.ndarray:
    """Eigenvalues of the smaller Gram matrix of each effective channel."""
    rows, cols = prod.shape[-2:]
    if min(rows, cols) == 1:
        return np.sum(np.abs(prod) ** 2, axis=(-1, -2))[..., None]
    ph = np.conj(np.swapaxes(prod, -1, -2))
    gram = ph @ prod if cols < rows else prod @ ph
    return np.maximum(np.linalg.eigvalsh(gram), 0.0)


def _best_mi(eigs: list[np.ndarray], s: SnrPoint) -> np.ndarray:
    snr = s.snr_linear
    mis = [np.sum(np.log2(1.0 + snr * e), axis=-1) for e in eigs]
    return np.max(np.stack(mis, axis=-1), axis=-1)


def _outage_from_eigs(eigs, snrs, rate: RateSpec) -> np.ndarray:
    return np.stack([_best_mi(eigs, s) <= rate.threshold_bits(s) for s in snrs])


@dataclass(frozen=True)
class JeemasStrategy:
    """Pick the candidate path of largest mutual information each realisation."""

    topology: RelayTopology
    policy: SelectionPolicy
    chunk: int = CHUNK

    def outage_batch(self, seed, first, count, snrs, rate):
        cands = candidate_paths(self.topology, self.policy, rate.multiplexing_gain)
        ch = sample_channels_batch(self.topology, seed, first, count)
        eigs = [_gram_eigs(path_product(ch, p)) for p in cands]
        return _outage_from_eigs(eigs, snrs, rate)


@dataclass(frozen=True)
class FixedPathStrategy:
    """Always use one given path (no selection)."""

    topology: RelayTopology
    path: Path | P2Chain
    chunk: int = CHUNK

    def outage_batch(self, seed, first, count, snrs, rate):
        ch = sample_channels_batch(self.topology, seed, first, count)
        return _outage_from_eigs([_gram_eigs(path_product(ch, self.path))], snrs, rate)


@dataclass(frozen=True)
class P2pStrategy:
    """``nt x nr`` link; with ``selection`` the best ``nr`` transmit antennas are used."""

    nt: int
    nr: int
    selection: bool = False
    chunk: int = CHUNK

    def __post_init__(self):
        if self.nt < 1 or self.nr < 1:
            raise ValueError("antenna counts must be positive")
        if self.selection and self.nt < self.nr:
            raise RequiresMtGeMr(f"selection needs Nt >= Nr, got Nt={self.nt}, Nr={self.nr}")

    @property
    def topology(self) -> RelayTopology:
        return RelayTopology((self.nt, self.nr))

    def outage_batch(self, seed, first, count, snrs, rate):
        t = self.topology
        if self.selection:
            return JeemasStrategy(t, SelectionPolicy("exhaustive", "fixed", self.nr)).outage_batch(
                seed, first, count, snrs, rate)
        ch = sample_channels_batch(t, seed, first, count)
        return _outage_from_eigs([_gram_eigs(ch.hops[0])], snrs, rate)


@dataclass(frozen=True)
class CfStrategy:
    """Distributed compress-and-forward; infeasible noise counts as outage."""

    scenario: CfScenario
    chunk: int = CF_CHUNK

    def outage_batch(self, seed, first, count, snrs, rate):
        re = sample_cf_batch(self.scenario, seed, first, count)
        out = []
        for s in snrs:
            sc = self.scenario.with_snr(s)
            r, _, _, _ = cf_rate_batch(sc, re)
            out.append(r <= rate.threshold_bits(s))
        return np.stack(out)


# -- estimates --------------------------------------------------------------

def wilson_interval(events: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = events / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials))
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


@dataclass(frozen=True)
class OutageEstimate:
    snr: SnrPoint
    trials: int
    outage_events: int
    p_hat: float
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, snr: SnrPoint, trials: int, events: int) -> "OutageEstimate":
        if trials < 1 or not 0 <= events <= trials:
            raise ValueError(f"need 0 <= events <= trials, trials >= 1; got {events}/{trials}")
        lo, hi = wilson_interval(events, trials)
        return cls(snr, int(trials), int(events), events / trials, lo, hi)

    @property
    def stderr(self) -> float:
        """Half-width of the interval divided by z."""
        z = NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)
        return (self.ci_high - self.ci_low) / (2 * z)


def _chunks(trials: int, size: int):
    return [(a, min(size, trials - a)) for a in range(0, trials, size)]


def count_outages(strategy: Strategy, snrs: Sequence[SnrPoint], rate: RateSpec, trials: int,
                  seed: int, workers: int = 1) -> np.ndarray:
    """Outage counts per SNR over trials ``0 .. trials-1``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = _chunks(trials, strategy.chunk)

    def run(job):
        first, count = job
        return np.sum(strategy.outage_batch(seed, first, count, snrs, rate), axis=-1)

    if workers == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    return np.sum(parts, axis=0).astype(np.int64)


def estimate_outage(strategy: Strategy, snr: SnrPoint, rate: RateSpec, trials: int, seed: int,
                    workers: int = 1) -> OutageEstimate:
    events = count_outages(strategy, [snr], rate, trials, seed, workers)[0]
    return OutageEstimate.from_counts(snr, trials, int(events))


def sweep(strategy: Strategy, grid: Sequence[SnrPoint], rate: RateSpec, trials: int, seed: int,
          workers: int = 1) -> list[OutageEstimate]:
    db = [s.snr_db for s in grid]
    if any(b <= a for a, b in zip(db, db[1:])):
        raise ValueError("snr grid must be strictly ascending")
    events = count_outages(strategy, list(grid), rate, trials, seed, workers)
    return [OutageEstimate.from_counts(s, trials, int(e)) for s, e in zip(grid, events)]


# -- exponent fit -----------------------------------------------------------

@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    r_squared: float
    points_used: int
    reliable: bool

    @property
    def diversity(self) -> float:
        return -self.slope

    def as_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "r_squared": self.r_squared,
                "points_used": self.points_used, "reliable": self.reliable}


def fit_exponent(estimates: Sequence[OutageEstimate], window: tuple[float, float] | None = None
                 ) -> ExponentFit:
    """Weighted least squares of ``log10 p_hat`` on ``log10 snr``.

    Points in ``window`` (dB, inclusive) with fewer than ``MIN_EVENTS`` events
    are dropped and mark the fit unreliable. Weights are the inverse squared
    relative interval widths.
    """
    if window is None:
        window = (estimates[0].snr.snr_db, estimates[-1].snr.snr_db)
    lo, hi = window
    inside = [e for e in estimates if lo - 1e-9 <= e.snr.snr_db <= hi + 1e-9]
    used = [e for e in inside if e.outage_events >= MIN_EVENTS]
    starved = len(used) < len(inside)
    n = len(used)
    if n < 2:
        return ExponentFit(float("nan"), float("nan"), float("nan"), n, False)
    x = np.log10([e.snr.snr_linear for e in used])
    y = np.log10([e.p_hat for e in used])
    w = np.array([(e.p_hat / (e.ci_high - e.ci_low)) ** 2 for e in used])
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    resid = y - ym - slope * (x - xm)
    ss_res = np.sum(w * resid ** 2)
    ss_tot = np.sum(w * (y - ym) ** 2)
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else float("nan")
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(slope), float(stderr), float(r2), n, bool(n >= MIN_POINTS and not starved))


def sweep_and_fit(strategy: Strategy, grid: Sequence[SnrPoint], rate: RateSpec, trials: int,
                  seed: int, window: tuple[float, float] | None = None, workers: int = 1):
    if window is not None:
        if window[0] > window[1] or window[0] < grid[0].snr_db - 1e-9 or window[1] > grid[-1].snr_db + 1e-9:
            raise ValueError("fit window must lie inside the snr grid")
    est = sweep(strategy, grid, rate, trials, seed, workers)
    return est, fit_exponent(est, window)


def snr_grid(start_db: float, stop_db: float, step_db: float) -> list[SnrPoint]:
    """Inclusive dB grid; points are computed as ``start + i * step`` to avoid drift."""
    if step_db <= 0 or stop_db < start_db:
        raise ValueError("need step > 0 and stop >= start")
    n = int(math.floor((stop_db - start_db) / step_db + 1e-9)) + 1
    return [SnrPoint(float(round(start_db + i * step_db, 10))) for i in range(n)]
