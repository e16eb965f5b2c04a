"""Closed-form diversity-multiplexing tradeoff curves.

Every curve is piecewise linear in the multiplexing gain ``r`` between its
vertices and zero past the last vertex. The formulas are stated at integer
``r``; non-integer gains interpolate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import RequiresMtGeMr
from .topology import RelayTopology, build_p2_chain, max_independent_paths

_TOL = 1e-12


@dataclass(frozen=True)
class DmtCurve:
    """Piecewise-linear ``d(r)``.

    ``d0`` optionally overrides the value at exactly ``r = 0`` when the curve
    drops discontinuously there (the two-mode hybrid strategy); ``vertices``
    then describe the right limit.
    """

    vertices: tuple[tuple[float, float], ...]
    d0: float | None = None

    def __post_init__(self):
        verts = tuple((float(r), float(d)) for r, d in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if not verts or verts[0][0] != 0.0:
            raise ValueError("a curve starts at r = 0")
        rs = [r for r, _ in verts]
        ds = [d for _, d in verts]
        if any(b <= a for a, b in zip(rs, rs[1:])):
            raise ValueError("vertex r values must be strictly increasing")
        if any(d < -_TOL for d in ds) or any(b > a + 1e-9 for a, b in zip(ds, ds[1:])):
            raise ValueError(f"d must be nonnegative and nonincreasing: {verts}")
        if abs(ds[-1]) > 1e-9:
            raise ValueError("the final vertex must have d = 0")
        if self.d0 is not None and self.d0 < ds[0]:
            raise ValueError("d0 may only exceed the right limit at r = 0")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "DmtCurve":
        """Curve with vertices ``(k, values[k])`` at integer ``k``."""
        return cls(tuple((float(k), float(v)) for k, v in enumerate(values)))

    @property
    def r_max(self) -> float:
        return self.vertices[-1][0]

    def points(self) -> list[tuple[float, float]]:
        """Vertex list as presented, with the ``r = 0`` value from ``d0`` if set."""
        pts = list(self.vertices)
        if self.d0 is not None:
            pts[0] = (0.0, float(self.d0))
        return pts

    def __call__(self, r):
        return curve_eval(self, r)


def curve_eval(c: DmtCurve, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("r must be nonnegative")
    rs = np.array([v[0] for v in c.vertices])
    ds = np.array([v[1] for v in c.vertices])
    out = np.interp(r_arr, rs, ds, right=0.0)
    if c.d0 is not None:
        out = np.where(r_arr == 0.0, c.d0, out)
    return float(out) if out.ndim == 0 else out


def _combine(curves: Sequence[DmtCurve], op: Callable, reduce_range: Callable) -> DmtCurve:
    end = reduce_range(c.r_max for c in curves)
    grid = sorted({r for c in curves for r, _ in c.vertices if r <= end} | {end})
    pts = set(grid)
    for a, b in zip(grid, grid[1:]):
        ya = [curve_eval(c, a) if a > 0 else c.vertices[0][1] for c in curves]
        yb = [curve_eval(c, b) for c in curves]
        for i in range(len(curves)):
            for j in range(i + 1, len(curves)):
                da = ya[i] - ya[j]
                db = yb[i] - yb[j]
                if da * db < 0:
                    pts.add(a + (b - a) * da / (da - db))
    rs = sorted(pts)
    verts = []
    for r in rs:
        vals = [curve_eval(c, r) if r > 0 else c.vertices[0][1] for c in curves]
        verts.append((r, op(vals)))
    d0 = None
    if any(c.d0 is not None for c in curves):
        d0 = op([curve_eval(c, 0.0) for c in curves])
        if d0 <= verts[0][1]:
            d0 = None
    return DmtCurve(tuple(verts), d0)


def pointwise_min(curves: Iterable[DmtCurve]) -> DmtCurve:
    return _combine(list(curves), min, min)


def pointwise_max(curves: Iterable[DmtCurve]) -> DmtCurve:
    return _combine(list(curves), max, max)


def dmt_mimo(nt: int, nr: int) -> DmtCurve:
    """Point-to-point ``nt x nr`` Rayleigh channel: ``(nt - r)(nr - r)``."""
    if nt < 1 or nr < 1:
        raise ValueError("antenna counts must be positive")
    return DmtCurve.from_values([(nt - r) * (nr - r) for r in range(min(nt, nr) + 1)])


def dmt_upper_bound(t: RelayTopology) -> DmtCurve:
    """Cut-set bound: the weakest hop's full-cooperation MIMO tradeoff."""
    m = t.stage_antennas
    return pointwise_min(dmt_mimo(a, b) for a, b in zip(m, m[1:]))


def chain_value(m: int, n_hops: int, r: int) -> int:
    """Outage exponent of an ``n_hops``-hop chain of ``m x m`` Rayleigh matrices, integer ``r``."""
    if r >= m:
        return 0
    a, b = divmod(m - r, n_hops)
    twice = (m - r) * (m + 1 - r) + a * ((a - 1) * n_hops + 2 * b)
    return twice // 2


def dmt_chain(m: int, n_hops: int) -> DmtCurve:
    if m < 1 or n_hops < 1:
        raise ValueError("m and the hop count must be positive")
    return DmtCurve.from_values([chain_value(m, n_hops, r) for r in range(m + 1)])


def mixed_chain_value(dims: Sequence[int], r: int) -> int:
    """Exponent of a product chain whose stages have the given dimensions, integer ``r``."""
    beta = sorted(dims)
    n_hops = len(beta) - 1
    prefix = np.cumsum(beta)
    total = 0
    for k in range(r + 1, beta[0] + 1):
        inner = min((int(prefix[n]) - k) // n for n in range(1, n_hops + 1))
        total += 1 - k + inner
    return total


def dmt_chain_mixed(dims: Sequence[int]) -> DmtCurve:
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError("need at least two stages, all with positive dimension")
    return DmtCurve.from_values([mixed_chain_value(dims, r) for r in range(min(dims) + 1)])


def dmt_jeemas(t: RelayTopology, m: int) -> DmtCurve:
    """Achievable tradeoff of subset selection with ``m`` antennas per stage.

    ``kappa`` independent ``m``-chains multiply their outage probabilities;
    the leftover chain, when it exists, contributes its own exponent on top.
    """
    kappa = max_independent_paths(t, m)
    p2 = build_p2_chain(t, m)
    values = []
    for r in range(m + 1):
        extra = max(mixed_chain_value(p2.dims, r), 0) if p2 is not None else 0
        values.append(kappa * chain_value(m, t.hops, r) + extra)
    return DmtCurve.from_values(values)


def dmt_hybrid(t: RelayTopology, envelope: bool = False) -> DmtCurve:
    """Two-mode selection: ``m = 1`` at ``r = 0``, ``m = min_n M_n`` for ``r > 0``.

    With ``envelope`` the result is instead the pointwise maximum over every
    admissible ``m``, which is continuous at the origin.
    """
    top = t.min_antennas
    if envelope:
        return pointwise_max(dmt_jeemas(t, m) for m in range(1, top + 1))
    wide = dmt_jeemas(t, top)
    d0 = dmt_jeemas(t, 1).vertices[0][1]
    if d0 <= wide.vertices[0][1]:
        return wide
    return DmtCurve(wide.vertices, d0)


def dmt_p2p_selection(mt: int, mr: int) -> DmtCurve:
    """Transmit antenna selection: the best ``mr`` of ``mt`` antennas feed ``mr`` receive antennas."""
    if not mt >= mr >= 1:
        raise RequiresMtGeMr(f"need Mt >= Mr >= 1, got Mt={mt}, Mr={mr}")
    alpha, beta = divmod(mt, mr)
    return DmtCurve.from_values(
        [alpha * (mr - r) ** 2 + max((beta - r) * (mr - r), 0) for r in range(mr + 1)])


def dmt_cf_upper(m0: int, m1: int, m2: int) -> DmtCurve:
    """Two-hop bound: co-locate relays with the destination, or with the source."""
    if min(m0, m1, m2) < 1:
        raise ValueError("antenna counts must be positive")
    return pointwise_min([dmt_mimo(m0, m1 + m2), dmt_mimo(m0 + m1, m2)])
