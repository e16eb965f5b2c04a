"""Joint end-to-end antenna subset selection over amplify-and-forward paths.

The destination evaluates the mutual information of every candidate path and
feeds back the index of the best one. Candidates are either every subset chain
(``exhaustive``) or the hopwise-independent family plus the leftover chain
(``independent``), which is all the diversity analysis needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, RateSpec, SnrPoint, path_product
from .numerics import mutual_info_bits
from .topology import (P2Chain, Path, RelayTopology, build_independent_paths,
                       build_p2_chain, enumerate_paths)


@dataclass(frozen=True)
class SelectionPolicy:
    candidate_mode: str = "exhaustive"
    m_policy: str = "fixed"
    m: int | None = None
    cap: int = 100_000

    def __post_init__(self):
        if self.candidate_mode not in ("exhaustive", "independent"):
            raise ValueError(f"unknown candidate mode {self.candidate_mode!r}")
        if self.m_policy not in ("fixed", "hybrid"):
            raise ValueError(f"unknown m policy {self.m_policy!r}")
        if self.m_policy == "fixed" and self.m is None:
            raise ValueError("fixed m policy needs m")

    def subset_size(self, t: RelayTopology, r: float) -> int:
        if self.m_policy == "hybrid":
            return 1 if r == 0 else t.min_antennas
        t.check_subset_size(self.m)
        return self.m


@dataclass(frozen=True)
class SelectionResult:
    chosen: Path | P2Chain
    mi_bits: float
    candidate_count: int

    @property
    def feedback_bits(self) -> float:
        return math.log2(self.candidate_count)


def candidate_paths(t: RelayTopology, pol: SelectionPolicy, r: float = 0.0) -> list[Path | P2Chain]:
    m = pol.subset_size(t, r)
    if pol.candidate_mode == "exhaustive":
        return enumerate_paths(t, m, pol.cap)
    cands: list[Path | P2Chain] = list(build_independent_paths(t, m))
    p2 = build_p2_chain(t, m)
    if p2 is not None:
        cands.append(p2)
    return sorted(cands, key=lambda p: p.subsets)


def candidate_mis(c: ChannelSet, cands, s: SnrPoint) -> np.ndarray:
    """MI of each candidate, stacked on the last axis."""
    return np.stack([np.asarray(mutual_info_bits(s.snr_linear, path_product(c, p)))
                     for p in cands], axis=-1)


def select_path(c: ChannelSet, t: RelayTopology, s: SnrPoint, pol: SelectionPolicy,
                r: float = 0.0) -> SelectionResult:
    cands = candidate_paths(t, pol, r)
    mis = candidate_mis(c, cands, s)
    best = int(np.argmax(mis))  # first maximum = lexicographic tie-break
    return SelectionResult(cands[best], float(mis[best]), len(cands))


def outage_indicator(sel: SelectionResult, s: SnrPoint, rate: RateSpec) -> bool:
    return bool(sel.mi_bits <= rate.threshold_bits(s))
