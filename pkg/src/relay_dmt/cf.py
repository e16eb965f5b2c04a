"""Distributed compress-and-forward over a two-hop relay channel with a direct link.

Signal model, with ``P`` the linear SNR::

    y   = H_sd x + sum_k G_k x_k + n
    y_k = H_k x + sum_{l != k} F_kl x_l + n_k
    yh_k = y_k + q_k,        q_k ~ CN(0, N_k I)

where ``x ~ CN(0, P/M0 I)``, ``x_k ~ CN(0, P/m_k I)`` and all noises are unit
variance. Each relay quantises its observation (``yh_k``) without decoding the
others; the destination rate is ``I(x; y, yh_1..yh_K | x_1..x_K)`` subject to a
compression constraint for every nonempty relay subset.

Every function accepts realisations with an optional leading batch axis and
vectorises over it; the per-realisation results are identical either way.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import RateSpec, SnrPoint
from .errors import NoFeasibleNoise, SingularMatrix
from .numerics import JointGaussianCov, RngStream, cn_draws, cn_draws_batch, gaussian_cmi

DAMPING = 0.5
MAX_FIXED_POINT_ITERS = 200
FIXED_POINT_RTOL = 1e-9
INFLATION = 1.1
MAX_INFLATIONS = 500


@dataclass(frozen=True)
class CfScenario:
    m0: int
    relay_antennas: tuple[int, ...]
    m2: int
    snr: SnrPoint = SnrPoint(10.0)

    def __post_init__(self):
        object.__setattr__(self, "relay_antennas", tuple(int(a) for a in self.relay_antennas))
        if self.m0 < 1 or self.m2 < 1 or not self.relay_antennas or min(self.relay_antennas) < 1:
            raise ValueError("need at least one relay and positive antenna counts")

    @property
    def k(self) -> int:
        return len(self.relay_antennas)

    @property
    def m1(self) -> int:
        return sum(self.relay_antennas)

    @property
    def power(self) -> float:
        return self.snr.snr_linear

    def with_snr(self, snr: SnrPoint) -> "CfScenario":
        return CfScenario(self.m0, self.relay_antennas, self.m2, snr)

    def subsets(self) -> list[tuple[int, ...]]:
        ks = range(self.k)
        return [s for size in range(1, self.k + 1) for s in itertools.combinations(ks, size)]


@dataclass(frozen=True)
class CfRealization:
    h_sd: np.ndarray
    h: tuple[np.ndarray, ...]
    g: tuple[np.ndarray, ...]
    f: dict = field(default_factory=dict)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.h_sd.shape[:-2]

    def scaled(self, factor: float) -> "CfRealization":
        return CfRealization(self.h_sd * factor, tuple(a * factor for a in self.h),
                             tuple(a * factor for a in self.g),
                             {key: a * factor for key, a in self.f.items()})

    def take(self, idx) -> "CfRealization":
        return CfRealization(self.h_sd[idx], tuple(a[idx] for a in self.h),
                             tuple(a[idx] for a in self.g),
                             {key: a[idx] for key, a in self.f.items()})


@dataclass(frozen=True)
class CompressionNoise:
    nhat: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.nhat) < 0):
            raise ValueError("quantisation noise variances must be nonnegative")


@dataclass(frozen=True)
class CfRateResult:
    rate_bits: float
    nhat: CompressionNoise
    constraints_ok: bool
    binding_subset: tuple[int, ...] | None


# -- sampling ---------------------------------------------------------------

def _layout(sc: CfScenario) -> list[tuple[str, tuple[int, int]]]:
    m = sc.relay_antennas
    out = [("h_sd", (sc.m2, sc.m0))]
    out += [(f"h{k}", (m[k], sc.m0)) for k in range(sc.k)]
    out += [(f"g{k}", (sc.m2, m[k])) for k in range(sc.k)]
    out += [(f"f{k},{l}", (m[k], m[l])) for k in range(sc.k) for l in range(sc.k) if k != l]
    return out


def draws_per_realization(sc: CfScenario) -> int:
    return sum(r * c for _, (r, c) in _layout(sc))


def _assemble(sc: CfScenario, z: np.ndarray) -> CfRealization:
    lead = z.shape[:-1]
    mats = {}
    pos = 0
    for name, (r, c) in _layout(sc):
        mats[name] = z[..., pos:pos + r * c].reshape(*lead, r, c)
        pos += r * c
    f = {(k, l): mats[f"f{k},{l}"] for k in range(sc.k) for l in range(sc.k) if k != l}
    return CfRealization(mats["h_sd"], tuple(mats[f"h{k}"] for k in range(sc.k)),
                         tuple(mats[f"g{k}"] for k in range(sc.k)), f)


def sample_cf(sc: CfScenario, rng: RngStream) -> CfRealization:
    """All matrices i.i.d. CN(0, 1), filled in the order H_sd, H_k, G_k, F_kl."""
    return _assemble(sc, cn_draws(rng, draws_per_realization(sc)))


def sample_cf_batch(sc: CfScenario, seed: int, first_trial: int, count: int) -> CfRealization:
    return _assemble(sc, cn_draws_batch(seed, first_trial, count, draws_per_realization(sc)))


# -- covariance -------------------------------------------------------------

def _h(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def block_names(k: int) -> dict[str, list[str]]:
    return {"x": ["x"], "xr": [f"x{i}" for i in range(k)], "y": ["y"],
            "yr": [f"y{i}" for i in range(k)], "yh": [f"yh{i}" for i in range(k)]}


def assemble_cf_covariance(sc: CfScenario, re: CfRealization, nz: CompressionNoise) -> JointGaussianCov:
    """Joint covariance of ``(x, x_1..x_K, y, y_1..y_K, yh_1..yh_K)``."""
    k = sc.k
    m = sc.relay_antennas
    p = sc.power
    lead = re.batch_shape
    nhat = np.broadcast_to(np.asarray(nz.nhat, dtype=float), lead + (k,))
    sizes = ([("x", sc.m0)] + [(f"x{i}", m[i]) for i in range(k)] + [("y", sc.m2)]
             + [(f"y{i}", m[i]) for i in range(k)] + [(f"yh{i}", m[i]) for i in range(k)])
    dim = sum(s for _, s in sizes)
    layout = JointGaussianCov.from_sizes(sizes, np.zeros((dim, dim)))
    b = layout.blocks
    # independent sources share the output layout: x, x_k, n, n_k, q_k
    src = {"x": b["x"], **{f"x{i}": b[f"x{i}"] for i in range(k)}, "n": b["y"],
           **{f"n{i}": b[f"y{i}"] for i in range(k)}, **{f"q{i}": b[f"yh{i}"] for i in range(k)}}
    a = np.zeros(lead + (dim, dim), dtype=complex)
    var = np.zeros(lead + (dim,))

    def put(out_blk, src_blk, mat):
        a[..., out_blk, src_blk] = mat

    put(b["x"], src["x"], np.eye(sc.m0))
    var[..., src["x"]] = p / sc.m0
    for i in range(k):
        put(b[f"x{i}"], src[f"x{i}"], np.eye(m[i]))
        var[..., src[f"x{i}"]] = p / m[i]
    put(b["y"], src["x"], re.h_sd)
    for i in range(k):
        put(b["y"], src[f"x{i}"], re.g[i])
    put(b["y"], src["n"], np.eye(sc.m2))
    var[..., src["n"]] = 1.0
    for i in range(k):
        rows = [b[f"y{i}"], b[f"yh{i}"]]
        for out_blk in rows:
            put(out_blk, src["x"], re.h[i])
            for l in range(k):
                if l != i:
                    put(out_blk, src[f"x{l}"], re.f[(i, l)])
            put(out_blk, src[f"n{i}"], np.eye(m[i]))
        var[..., src[f"n{i}"]] = 1.0
        put(b[f"yh{i}"], src[f"q{i}"], np.eye(m[i]))
        var[..., src[f"q{i}"]] = nhat[..., i:i + 1]
    cov = (a * var[..., None, :]) @ _h(a)
    return JointGaussianCov(b, cov)


# -- closed-form determinants ----------------------------------------------

def _det(a: np.ndarray) -> np.ndarray:
    return np.linalg.det(a).real


def _nhat(sc: CfScenario, re: CfRealization, nz) -> np.ndarray:
    arr = nz.nhat if isinstance(nz, CompressionNoise) else nz
    return np.broadcast_to(np.asarray(arr, dtype=float), re.batch_shape + (sc.k,))


def _eye_scaled(n: int, s: np.ndarray) -> np.ndarray:
    return np.asarray(s)[..., None, None] * np.eye(n)


def closed_form_ls(sc, re, nz) -> np.ndarray:
    p = sc.power
    nh = _nhat(sc, re, nz)
    stack = np.concatenate((re.h_sd,) + re.h, axis=-2)
    diag = np.concatenate([np.ones(re.batch_shape + (sc.m2,))]
                          + [np.repeat(nh[..., i:i + 1] + 1.0, sc.relay_antennas[i], axis=-1)
                             for i in range(sc.k)], axis=-1)
    mat = (p / sc.m0) * stack @ _h(stack) + diag[..., None, :] * np.eye(diag.shape[-1])
    return _det(mat)


def closed_form_lsd(sc, re) -> np.ndarray:
    return _det((sc.power / sc.m0) * re.h_sd @ _h(re.h_sd) + np.eye(sc.m2))


def closed_form_ld(sc, re) -> np.ndarray:
    """Determinant with every transmitter active (a determinant, not its log)."""
    p = sc.power
    mat = (p / sc.m0) * re.h_sd @ _h(re.h_sd) + np.eye(sc.m2)
    for i in range(sc.k):
        mat = mat + (p / sc.relay_antennas[i]) * re.g[i] @ _h(re.g[i])
    return _det(mat)


def closed_form_lskd(sc, re, k: int) -> np.ndarray:
    p = sc.power
    mat = ((p / sc.m0) * re.h_sd @ _h(re.h_sd)
           + (p / sc.relay_antennas[k]) * re.g[k] @ _h(re.g[k]) + np.eye(sc.m2))
    return _det(mat)


def closed_form_lsk(sc, re, nz, k: int) -> np.ndarray:
    nh = _nhat(sc, re, nz)[..., k]
    mk = sc.relay_antennas[k]
    return _det((sc.power / sc.m0) * re.h[k] @ _h(re.h[k]) + _eye_scaled(mk, nh + 1.0))


def closed_form_ls_exk(sc, re, nz, k: int) -> np.ndarray:
    """Relay ``k``'s observation covariance determinant with the other relays' inputs unknown."""
    p = sc.power
    nh = _nhat(sc, re, nz)[..., k]
    mk = sc.relay_antennas[k]
    mat = (p / sc.m0) * re.h[k] @ _h(re.h[k]) + _eye_scaled(mk, nh + 1.0)
    for l in range(sc.k):
        if l != k:
            mat = mat + (p / sc.relay_antennas[l]) * re.f[(k, l)] @ _h(re.f[(k, l)])
    return _det(mat)


def closed_form_ls_hatk(sc, re, nz, k: int) -> np.ndarray:
    p = sc.power
    nh = _nhat(sc, re, nz)[..., k]
    mk = sc.relay_antennas[k]
    stack = np.concatenate([re.h[k], re.h_sd], axis=-2)
    diag = np.concatenate([np.repeat((nh + 1.0)[..., None], mk, axis=-1),
                           np.ones(re.batch_shape + (sc.m2,))], axis=-1)
    mat = (p / sc.m0) * stack @ _h(stack) + diag[..., None, :] * np.eye(mk + sc.m2)
    return _det(mat)


def singleton_noise_ratio(sc, re, nz, k: int) -> np.ndarray:
    """Right-hand side of the single-relay compression bound ``N_k^{m_k} >= ratio``."""
    return (closed_form_ls_exk(sc, re, nz, k) * closed_form_ls_hatk(sc, re, nz, k)
            / (closed_form_lskd(sc, re, k) * closed_form_lsk(sc, re, nz, k)))


def closed_form_singleton_gap(sc, re, nz, k: int) -> np.ndarray:
    """Single-relay constraint slack from the determinant formulas (bits).

    Exact for ``K = 1``. For more relays the ``yh_k`` term ignores the
    conditioning on the other relays' quantised outputs.
    """
    mk = sc.relay_antennas[k]
    nh = _nhat(sc, re, nz)[..., k]
    lsd = closed_form_lsd(sc, re)
    rhs = np.log2(closed_form_lskd(sc, re, k) / lsd)
    t2 = np.log2(closed_form_ls_exk(sc, re, nz, k) / closed_form_lsk(sc, re, nz, k))
    t3 = np.log2(closed_form_ls_hatk(sc, re, nz, k) / lsd) - mk * np.log2(nh)
    return rhs - t2 - t3


def closed_form_rate(sc, re, nz) -> np.ndarray:
    nh = _nhat(sc, re, nz)
    denom = sum(sc.relay_antennas[i] * np.log2(nh[..., i] + 1.0) for i in range(sc.k))
    return np.log2(closed_form_ls(sc, re, nz)) - denom


# -- constraints via covariance --------------------------------------------

def covariance_rate(sc, re, nz) -> np.ndarray:
    j = assemble_cf_covariance(sc, re, _as_noise(nz))
    names = block_names(sc.k)
    return gaussian_cmi(j, names["x"], names["y"] + names["yh"], names["xr"])


def _as_noise(nz) -> CompressionNoise:
    return nz if isinstance(nz, CompressionNoise) else CompressionNoise(np.asarray(nz, dtype=float))


def _gap_from_cov(j: JointGaussianCov, k: int, subset) -> np.ndarray:
    names = block_names(k)
    t = list(subset)
    tc = [i for i in range(k) if i not in subset]
    rhs = gaussian_cmi(j, [f"x{i}" for i in t], ["y"], [f"x{i}" for i in tc])
    lhs = gaussian_cmi(j, [f"yh{i}" for i in t], [f"y{i}" for i in t],
                       names["xr"] + [f"yh{i}" for i in tc] + ["y"])
    for i in t:
        others = [f"x{l}" for l in range(k) if l != i]
        lhs = lhs + gaussian_cmi(j, [f"yh{i}"], others, [f"x{i}"])
    return rhs - lhs


def constraint_gap(sc: CfScenario, re: CfRealization, nz, subset) -> float | np.ndarray:
    """Compression slack of relay subset ``subset`` in bits (>= 0 means satisfied)."""
    subset = tuple(sorted(subset))
    if not subset or subset[-1] >= sc.k or subset[0] < 0:
        raise ValueError(f"subset must be a nonempty subset of range({sc.k})")
    return _gap_from_cov(assemble_cf_covariance(sc, re, _as_noise(nz)), sc.k, subset)


def all_gaps(sc: CfScenario, re: CfRealization, nz) -> np.ndarray:
    """Slack of every nonempty subset, stacked on the last axis in ``sc.subsets()`` order."""
    j = assemble_cf_covariance(sc, re, _as_noise(nz))
    return np.stack([np.asarray(_gap_from_cov(j, sc.k, s)) for s in sc.subsets()], axis=-1)


# -- solver -----------------------------------------------------------------

def _singleton_spectra(sc: CfScenario, re: CfRealization):
    """Per relay, the pieces that make the single-relay ratio a polynomial in ``N``.

    Every determinant in the ratio has the form ``c * prod_i(lam_i + N + 1)``;
    ``(N + 1) I + S`` with ``S = (P/M0) H_k (I + (P/M0) H_sd^H H_sd)^-1 H_k^H``
    is the Schur complement behind the ``yh_k``-and-``y`` term.
    """
    p = sc.power
    g = p / sc.m0
    lsd = closed_form_lsd(sc, re)
    w = np.linalg.inv(np.eye(sc.m0) + g * _h(re.h_sd) @ re.h_sd)
    out = []
    for k in range(sc.k):
        hk = re.h[k]
        own = g * hk @ _h(hk)
        ext = own
        for l in range(sc.k):
            if l != k:
                ext = ext + (p / sc.relay_antennas[l]) * re.f[(k, l)] @ _h(re.f[(k, l)])
        schur = g * hk @ w @ _h(hk)
        out.append((np.linalg.eigvalsh(ext), np.linalg.eigvalsh(schur), np.linalg.eigvalsh(own),
                    lsd / closed_form_lskd(sc, re, k)))
    return out


def _singleton_fixed_point(sc: CfScenario, re: CfRealization) -> np.ndarray:
    spectra = _singleton_spectra(sc, re)
    lead = re.batch_shape
    nh = np.ones(lead + (sc.k,))
    active = np.ones(lead + (sc.k,), dtype=bool)
    for _ in range(MAX_FIXED_POINT_ITERS):
        if not np.any(active):
            break
        new = np.empty_like(nh)
        for k, (ext, schur, own, const) in enumerate(spectra):
            q = nh[..., k, None] + 1.0
            ratio = const * np.prod((ext + q) * (schur + q) / (own + q), axis=-1)
            new[..., k] = (1 - DAMPING) * nh[..., k] + DAMPING * ratio ** (1.0 / sc.relay_antennas[k])
        step = np.abs(new - nh) <= FIXED_POINT_RTOL * np.abs(new)
        nh = np.where(active, new, nh)
        active &= ~step
    return nh


def _gaps_isolating_failures(sc, re, nh):
    """``all_gaps`` over a batch; entries whose covariance is singular come back flagged."""
    try:
        return all_gaps(sc, re, nh), np.zeros(len(nh), dtype=bool)
    except SingularMatrix:
        pass
    gaps = np.full((len(nh), 2 ** sc.k - 1), -np.inf)
    broken = np.zeros(len(nh), dtype=bool)
    for i in range(len(nh)):
        try:
            gaps[i] = all_gaps(sc, re.take(slice(i, i + 1)), nh[i:i + 1])[0]
        except SingularMatrix:
            broken[i] = True
    return gaps, broken


def solve_compression_noise_batch(sc: CfScenario, re: CfRealization):
    """Vectorised solver; returns ``(nhat, feasible, binding_index)``.

    ``binding_index`` points into ``sc.subsets()`` at the tightest constraint.
    Infeasible entries (inflation cap reached) keep their last noise levels.
    """
    nh = np.atleast_2d(_singleton_fixed_point(sc, re))
    batched = bool(re.batch_shape)
    re_b = re if batched else re.take(np.newaxis)
    n = nh.shape[0]
    feasible = np.zeros(n, dtype=bool)
    binding = np.zeros(n, dtype=int)
    pending = np.arange(n)
    for step in range(MAX_INFLATIONS + 1):
        gaps, broken = _gaps_isolating_failures(sc, re_b.take(pending), nh[pending])
        ok = np.all(gaps >= 0.0, axis=-1) & ~broken
        if broken.any():
            # numerically degenerate: as infeasible as running out of inflations
            pending = np.delete(pending, np.flatnonzero(broken))
            gaps, ok = gaps[~broken], ok[~broken]
        binding[pending] = np.argmin(gaps, axis=-1)
        feasible[pending[ok]] = True
        pending = pending[~ok]
        if pending.size == 0 or step == MAX_INFLATIONS:
            break
        nh[pending] *= INFLATION
    if not batched:
        return nh[0], bool(feasible[0]), int(binding[0])
    return nh, feasible, binding


def solve_compression_noise(sc: CfScenario, re: CfRealization) -> CompressionNoise:
    """Quantisation noise meeting every subset constraint for one realisation.

    Each ``N_k`` starts at the damped fixed point of its single-relay bound,
    then all are inflated together by 10% until every subset has nonnegative
    slack.
    """
    nh, ok, _ = solve_compression_noise_batch(sc, re)
    if not ok:
        raise NoFeasibleNoise(f"no feasible noise after {MAX_INFLATIONS} inflations")
    return CompressionNoise(nh)


def cf_rate_batch(sc: CfScenario, re: CfRealization):
    """Rates (bits) for a batch; infeasible realisations get rate 0."""
    nh, ok, binding = solve_compression_noise_batch(sc, re)
    rate = np.where(ok, closed_form_rate(sc, re, nh), 0.0)
    return rate, nh, ok, binding


def cf_rate(sc: CfScenario, re: CfRealization) -> CfRateResult:
    nh, ok, binding = solve_compression_noise_batch(sc, re)
    if not ok:
        return CfRateResult(0.0, CompressionNoise(nh), False, None)
    rate = float(closed_form_rate(sc, re, nh))
    return CfRateResult(rate, CompressionNoise(nh), True, sc.subsets()[binding])


def cf_outage_indicator(sc: CfScenario, re: CfRealization, rate: RateSpec) -> bool:
    return bool(cf_rate(sc, re).rate_bits <= rate.threshold_bits(sc.snr))


# -- universality of the noise levels ---------------------------------------

@dataclass(frozen=True)
class NoiseCheckReport:
    snr_db: tuple[float, ...]
    levels: np.ndarray            # (snr, draw, relay) smallest integer l_k; -1 when flagged
    flagged: np.ndarray           # (snr, draw) degenerate or infeasible draws
    max_level: tuple[int, ...]
    median_level: tuple[float, ...]
    trend_slope: float

    @property
    def stable(self) -> bool:
        return abs(self.trend_slope) < 0.1


def universal_noise_check(sc: CfScenario, draws: CfRealization, snrs) -> NoiseCheckReport:
    """Smallest integers ``l_k`` with ``N_k <= l_k((L_s/L_d)^(1/M1) + 1)`` at each SNR.

    ``draws`` is a batch of realisations reused at every SNR. The trend slope
    regresses ``log10`` of the median level on ``log10`` SNR.
    """
    snrs = [s if isinstance(s, SnrPoint) else SnrPoint(float(s)) for s in snrs]
    levels = []
    flagged = []
    for s in snrs:
        sc_s = sc.with_snr(s)
        with np.errstate(all="ignore"):
            nh, ok, _ = solve_compression_noise_batch(sc_s, draws)
            scale = (closed_form_ls(sc_s, draws, nh) / closed_form_ld(sc_s, draws)) ** (1.0 / sc.m1) + 1.0
            lev = np.ceil(nh / scale[..., None])
        bad = ~ok | ~np.all(np.isfinite(lev), axis=-1)
        lev = np.where(bad[..., None], -1, np.maximum(lev, 1)).astype(np.int64)
        levels.append(lev)
        flagged.append(bad)
    levels = np.stack(levels)
    flagged = np.stack(flagged)
    max_level = []
    median_level = []
    for lev, bad in zip(levels, flagged):
        good = lev[~bad]
        max_level.append(int(good.max()) if good.size else -1)
        median_level.append(float(np.median(good.max(axis=-1))) if good.size else float("nan"))
    x = np.log10([s.snr_linear for s in snrs])
    y = np.log10(median_level)
    slope = float(np.polyfit(x, y, 1)[0]) if len(snrs) > 1 and np.all(np.isfinite(y)) else float("nan")
    return NoiseCheckReport(tuple(s.snr_db for s in snrs), levels, flagged,
                            tuple(max_level), tuple(median_level), slope)
