"""Antenna structure of a layered relay network and the paths through it.

Antenna indices are 0-based throughout. Stage 0 is the source, stage ``N`` the
destination, and hop ``n`` connects stage ``n`` to stage ``n + 1``.

Two notions of path independence are provided. ``stagewise`` asks the subsets
of two paths to be disjoint at every stage. ``hopwise`` only asks that, at each
hop, the two paths use disjoint sets of channel coefficients (the index
products ``S_n x S_{n+1}`` do not meet). The packing count
``min_n floor(M_n/m) floor(M_{n+1}/m)`` is reachable only under the hopwise
notion: for ``M = (1, 2, 1)`` and ``m = 1`` two paths exist but any two share
the single source antenna.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

from .errors import DimensionMismatch, InvalidSubsetSize, TooManyPaths

Independence = Literal["stagewise", "hopwise"]


@dataclass(frozen=True)
class RelayTopology:
    stage_antennas: tuple[int, ...]
    relay_split: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "stage_antennas", tuple(int(m) for m in self.stage_antennas))
        if len(self.stage_antennas) < 2:
            raise ValueError("a topology needs at least a source and a destination stage")
        if any(m < 1 for m in self.stage_antennas):
            raise ValueError(f"every stage needs at least one antenna: {self.stage_antennas}")
        if self.relay_split is not None:
            split = tuple(tuple(int(a) for a in s) for s in self.relay_split)
            object.__setattr__(self, "relay_split", split)
            if len(split) != len(self.stage_antennas):
                raise ValueError("relay_split needs one entry per stage")
            for n, (parts, total) in enumerate(zip(split, self.stage_antennas)):
                if any(a < 1 for a in parts) or sum(parts) != total:
                    raise ValueError(f"relay split of stage {n} does not sum to {total}")

    @property
    def hops(self) -> int:
        return len(self.stage_antennas) - 1

    @property
    def min_antennas(self) -> int:
        return min(self.stage_antennas)

    def check_subset_size(self, m: int) -> None:
        if not 1 <= m <= self.min_antennas:
            raise InvalidSubsetSize(
                f"subset size {m} outside [1, {self.min_antennas}] for {self.stage_antennas}")


@dataclass(frozen=True)
class Path:
    """One antenna subset per stage, all of the same size ``m``."""

    subsets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        subsets = tuple(tuple(sorted(int(i) for i in s)) for s in self.subsets)
        object.__setattr__(self, "subsets", subsets)
        sizes = {len(s) for s in subsets}
        if len(subsets) < 2 or len(sizes) != 1 or 0 in sizes:
            raise DimensionMismatch("a path needs >= 2 stages with equal, nonzero subset sizes")
        if any(len(set(s)) != len(s) or min(s) < 0 for s in subsets):
            raise DimensionMismatch("subset indices must be distinct and nonnegative")

    @property
    def m(self) -> int:
        return len(self.subsets[0])

    def fits(self, t: RelayTopology) -> bool:
        return (len(self.subsets) == len(t.stage_antennas)
                and all(max(s) < mn for s, mn in zip(self.subsets, t.stage_antennas)))

    def hop_cells(self, n: int) -> set[tuple[int, int]]:
        """Channel coefficients (tx antenna, rx antenna) this path uses on hop ``n``."""
        return set(itertools.product(self.subsets[n], self.subsets[n + 1]))


@dataclass(frozen=True)
class P2Chain:
    """Leftover chain alternating ``m`` antennas (even stages) and ``beta_n`` (odd stages)."""

    dims: tuple[int, ...]
    subsets: tuple[tuple[int, ...], ...]

    def hop_cells(self, n: int) -> set[tuple[int, int]]:
        return set(itertools.product(self.subsets[n], self.subsets[n + 1]))


@dataclass(frozen=True)
class PathFamily:
    paths: tuple[Path, ...]
    independence_mode: Independence = "hopwise"

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[Path]:
        return iter(self.paths)

    def is_independent(self) -> bool:
        check = hopwise_disjoint if self.independence_mode == "hopwise" else stagewise_disjoint
        return all(check(p, q) for p, q in itertools.combinations(self.paths, 2))


def stagewise_disjoint(p, q) -> bool:
    return all(not set(a) & set(b) for a, b in zip(p.subsets, q.subsets))


def hopwise_disjoint(p, q) -> bool:
    # S_p x T_p meets S_q x T_q iff both coordinates meet
    for n in range(len(p.subsets) - 1):
        if set(p.subsets[n]) & set(q.subsets[n]) and set(p.subsets[n + 1]) & set(q.subsets[n + 1]):
            return False
    return True


def max_independent_paths(t: RelayTopology, m: int) -> int:
    t.check_subset_size(m)
    groups = [mn // m for mn in t.stage_antennas]
    return min(a * b for a, b in zip(groups, groups[1:]))


def build_independent_paths(t: RelayTopology, m: int) -> PathFamily:
    """Hopwise-independent family of ``max_independent_paths(t, m)`` paths.

    Each stage is cut into ``floor(M_n/m)`` consecutive groups of ``m``
    antennas. Paths start on stage-0 groups round-robin; at every later stage
    the paths are ordered by their current group and dealt to the next stage's
    groups cyclically. A group carries at most ``ceil(alpha/a_n) <= a_{n+1}``
    paths, so consecutive dealing never repeats a (group, group) hop pair.
    """
    kappa = max_independent_paths(t, m)
    groups = [mn // m for mn in t.stage_antennas]
    assign = [[p % groups[0] for p in range(kappa)]]
    for n in range(1, len(groups)):
        prev = assign[-1]
        order = sorted(range(kappa), key=lambda p: (prev[p], p))
        cur = [0] * kappa
        for j, p in enumerate(order):
            cur[p] = j % groups[n]
        assign.append(cur)
    paths = []
    for p in range(kappa):
        subsets = tuple(tuple(range(g[p] * m, g[p] * m + m)) for g in assign)
        paths.append(Path(subsets))
    return PathFamily(tuple(paths), "hopwise")


def build_p2_chain(t: RelayTopology, m: int) -> P2Chain | None:
    """Leftover-antenna chain, or ``None`` when an odd stage has no leftover antennas."""
    t.check_subset_size(m)
    dims = []
    subsets = []
    for n, mn in enumerate(t.stage_antennas):
        if n % 2 == 0:
            dims.append(m)
            subsets.append(tuple(range(mn - m, mn)))
        else:
            beta = mn - (mn // m) * m
            if beta == 0:
                return None
            dims.append(beta)
            subsets.append(tuple(range(mn - beta, mn)))
    return P2Chain(tuple(dims), tuple(subsets))


def count_paths(t: RelayTopology, m: int) -> int:
    return math.prod(math.comb(mn, m) for mn in t.stage_antennas)


def enumerate_paths(t: RelayTopology, m: int, cap: int = 100_000) -> list[Path]:
    """Every chain of size-``m`` subsets, in lexicographic order."""
    t.check_subset_size(m)
    total = count_paths(t, m)
    if total > cap:
        raise TooManyPaths(f"{total} candidate paths exceed the cap of {cap}")
    per_stage = [list(itertools.combinations(range(mn), m)) for mn in t.stage_antennas]
    return [Path(c) for c in itertools.product(*per_stage)]


def family_cells(paths: Sequence[Path | P2Chain], n: int) -> set[tuple[int, int]]:
    cells: set[tuple[int, int]] = set()
    for p in paths:
        cells |= p.hop_cells(n)
    return cells
