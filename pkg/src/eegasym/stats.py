"""Nonparametric tests, effect size, regression and influence diagnostics.

Rank statistics use mid-ranks for ties everywhere. The Wilcoxon tests switch
between an exact null distribution (computed by convolution over the rank
values, identical to enumerating every sign assignment or group split) and a
tie-adjusted normal approximation with continuity correction for larger
samples. Distribution tail functions are delegated to scipy's Cephes-backed
special functions and are cross-checked against high-precision oracles in the
test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as spc

from .core import PHASE_ORDER, REGION_ORDER, Phase, Region

SIGNED_RANK_EXACT_MAX_N = 25
RANK_SUM_EXACT_MAX_N = 20


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class KwResult:
    """Kruskal-Wallis omnibus result: tie-corrected H and its chi-squared p."""

    h: float
    df: int
    p: float
    group_sizes: tuple[int, ...]


@dataclass(frozen=True)
class PairwiseResult:
    statistic: float
    p: float
    method: str  # "signed_rank" or "rank_sum"
    exact: bool
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class RegressionResult:
    """Simple linear fit y = intercept + slope * x with Student-t inference."""

    intercept: float
    slope: float
    standardized_slope: float
    t: float
    df: int
    p: float
    n_used: int
    excluded_indices: tuple[int, ...] = ()
    cooks_distances: tuple[float, ...] = ()
    perfect_fit: bool = False


# ---------------------------------------------------------------------------
# distribution tails


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution.

    For df = 2 this equals exp(-x/2) exactly.
    """
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x < 0:
        raise ValueError("chi-squared statistic must be >= 0")
    return float(spc.chdtrc(df, x))


def student_t_sf(t: float, df: int) -> float:
    """One-tailed upper probability P(T > t) for Student's t with df degrees."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    return float(spc.stdtr(df, -t))


def student_t_two_tailed(t: float, df: int) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(t), df))


def _normal_sf(z: float) -> float:
    return float(spc.ndtr(-z))


def phi_effect_size(chi2: float, n: int) -> float:
    """Effect size sqrt(chi2 / n); 0.5 and above is conventionally large."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if chi2 < 0:
        raise ValueError("chi2 must be >= 0")
    return math.sqrt(chi2 / n)


# ---------------------------------------------------------------------------
# ranking helpers


def midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties replaced by the mean rank of the tied block."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_term(values: np.ndarray) -> float:
    """sum(t^3 - t) over groups of tied values."""
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    t = counts.astype(float)
    return float(np.sum(t**3 - t))


# ---------------------------------------------------------------------------
# Kruskal-Wallis


def kruskal_wallis(groups: list[np.ndarray]) -> KwResult:
    """Rank-based k-group omnibus test across independent groups.

    H is computed from pooled mid-ranks and divided by the tie correction
    1 - sum(t^3 - t) / (N^3 - N). The p-value uses the chi-squared
    approximation with k - 1 degrees of freedom. If every observation is
    identical the statistic is 0 and p is 1.
    """
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(arrays) < 2:
        raise ValueError("need at least two groups")
    for g in arrays:
        if g.size == 0:
            raise ValueError("empty group")
    pooled = np.concatenate(arrays)
    n_total = pooled.size
    if n_total < 3:
        raise ValueError("need at least 3 observations in total")
    sizes = tuple(int(g.size) for g in arrays)
    df = len(arrays) - 1
    if np.all(pooled == pooled[0]):
        return KwResult(h=0.0, df=df, p=1.0, group_sizes=sizes)
    ranks = midranks(pooled)
    h = 0.0
    offset = 0
    for size in sizes:
        r_sum = ranks[offset : offset + size].sum()
        h += r_sum * r_sum / size
        offset += size
    h = 12.0 / (n_total * (n_total + 1)) * h - 3.0 * (n_total + 1)
    correction = 1.0 - _tie_term(pooled) / (n_total**3 - n_total)
    h = h / correction
    h = max(h, 0.0)
    return KwResult(h=float(h), df=df, p=chi2_sf(h, df), group_sizes=sizes)


# ---------------------------------------------------------------------------
# Wilcoxon tests


def _shift_convolve(dist: np.ndarray, step: int) -> np.ndarray:
    """Account for one item contributing either 0 or `step` to the sum."""
    out = dist.copy()
    out[step:] += dist[: dist.size - step]
    return out


def _signed_rank_null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Counts of sign assignments per doubled positive-rank sum W+."""
    total = int(doubled_ranks.sum())
    dist = np.zeros(total + 1, dtype=float)
    dist[0] = 1.0
    for r in doubled_ranks:
        dist = _shift_convolve(dist, int(r))
    return dist


def wilcoxon_signed_rank(a: np.ndarray, b: np.ndarray) -> PairwiseResult:
    """Paired signed-rank test on a - b, two-tailed.

    Zero differences are dropped. The statistic is W = min(W+, W-) over
    mid-ranks of |d|. Exact p enumerates the 2^n sign assignments (via the
    rank-sum convolution, which counts the same set) for n <= 25, otherwise a
    tie-adjusted normal approximation with 0.5 continuity correction is used.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return PairwiseResult(0.0, 1.0, "signed_rank", True, 0, degenerate=True)
    ranks = midranks(np.abs(d))
    w_pos = float(ranks[d > 0].sum())
    w_neg = float(ranks[d < 0].sum())
    w = min(w_pos, w_neg)
    degenerate = n < 2
    if n <= SIGNED_RANK_EXACT_MAX_N:
        doubled = np.rint(2.0 * ranks).astype(int)
        counts = _signed_rank_null_counts(doubled)
        total2 = int(doubled.sum())
        w2 = int(round(2.0 * w))
        low = counts[: w2 + 1].sum()
        high = counts[total2 - w2 :].sum()
        if w2 >= total2 - w2:
            p = 1.0
        else:
            p = (low + high) / counts.sum()
        return PairwiseResult(w, min(1.0, float(p)), "signed_rank", True, n, degenerate)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(np.abs(d)) / 48.0
    if var <= 0:
        return PairwiseResult(w, 1.0, "signed_rank", False, n, degenerate=True)
    z = (w - mean + 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * _normal_sf(-z))
    return PairwiseResult(w, p, "signed_rank", False, n, degenerate)


def _rank_sum_null_counts(doubled_ranks: np.ndarray, n_a: int) -> np.ndarray:
    """Counts of size-n_a subsets of the pooled ranks per doubled rank sum."""
    total = int(doubled_ranks.sum())
    dist = np.zeros((n_a + 1, total + 1), dtype=float)
    dist[0, 0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        for k in range(n_a, 0, -1):
            dist[k, r:] += dist[k - 1, : total + 1 - r]
    return dist[n_a]


def wilcoxon_rank_sum(a: np.ndarray, b: np.ndarray) -> PairwiseResult:
    """Independent two-sample test, two-tailed, reporting U = min(U_a, U_b).

    Exact p enumerates every split of the pooled mid-ranks when the combined
    sample size is at most 20, otherwise the tie-adjusted normal approximation
    with continuity correction is used.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = a.size, b.size
    n = n_a + n_b
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    r_a = float(ranks[:n_a].sum())
    u_a = r_a - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    u = min(u_a, u_b)
    if n <= RANK_SUM_EXACT_MAX_N:
        doubled = np.rint(2.0 * ranks).astype(int)
        counts = _rank_sum_null_counts(doubled, n_a)
        # P(U_a <= u) + P(U_a >= n_a*n_b - u) through the rank-sum distribution
        shift = n_a * (n_a + 1)  # doubled rank-sum offset for U_a = 0
        u2 = int(round(2.0 * u))
        hi2 = int(round(2.0 * (n_a * n_b - u)))
        low = counts[: shift + u2 + 1].sum()
        high = counts[shift + hi2 :].sum()
        if u2 >= hi2:
            p = 1.0
        else:
            p = (low + high) / counts.sum()
        return PairwiseResult(u, min(1.0, float(p)), "rank_sum", True, n)
    mean = n_a * n_b / 2.0
    tie = _tie_term(pooled)
    var = n_a * n_b / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return PairwiseResult(u, 1.0, "rank_sum", False, n, degenerate=True)
    z = (u - mean + 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * _normal_sf(-z))
    return PairwiseResult(u, p, "rank_sum", False, n)


# ---------------------------------------------------------------------------
# regression and influence


def ols_regression(x: np.ndarray, y: np.ndarray) -> RegressionResult:
    """Least-squares line with two-tailed Student-t inference on the slope.

    A perfect fit (zero residual sum of squares) is flagged and reported with
    p = 0 rather than failing.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 points")
    x_mean = x.mean()
    y_mean = y.mean()
    sxx = float(np.sum((x - x_mean) ** 2))
    if sxx == 0.0:
        raise ValueError("x is constant: slope is undefined")
    sxy = float(np.sum((x - x_mean) * (y - y_mean)))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    resid = y - (intercept + slope * x)
    sse = float(np.sum(resid**2))
    df = n - 2
    sd_x = math.sqrt(sxx / (n - 1))
    syy = float(np.sum((y - y_mean) ** 2))
    sd_y = math.sqrt(syy / (n - 1)) if syy > 0 else 0.0
    std_slope = slope * sd_x / sd_y if sd_y > 0 else 0.0
    cooks = tuple(float(v) for v in cooks_distances(x, y))
    if sse == 0.0:
        return RegressionResult(
            intercept=float(intercept),
            slope=float(slope),
            standardized_slope=float(std_slope),
            t=math.inf if slope != 0 else 0.0,
            df=df,
            p=0.0 if slope != 0 else 1.0,
            n_used=n,
            cooks_distances=cooks,
            perfect_fit=True,
        )
    se_slope = math.sqrt(sse / df / sxx)
    t = slope / se_slope
    p = student_t_two_tailed(t, df)
    return RegressionResult(
        intercept=float(intercept),
        slope=float(slope),
        standardized_slope=float(std_slope),
        t=float(t),
        df=df,
        p=float(p),
        n_used=n,
        cooks_distances=cooks,
    )


def cooks_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cook's distance per observation for the straight-line fit.

    D_i = (e_i^2 / (2 s^2)) * h_ii / (1 - h_ii)^2 with 2 fitted parameters and
    s^2 the residual mean square. Zero residual variance gives all zeros.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 points")
    x_mean = x.mean()
    sxx = float(np.sum((x - x_mean) ** 2))
    if sxx == 0.0:
        raise ValueError("x is constant: leverage is undefined")
    slope = float(np.sum((x - x_mean) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x_mean)
    resid = y - (intercept + slope * x)
    sse = float(np.sum(resid**2))
    if sse == 0.0:
        return np.zeros(n)
    s2 = sse / (n - 2)
    h = 1.0 / n + (x - x_mean) ** 2 / sxx
    return (resid**2 / (2.0 * s2)) * h / (1.0 - h) ** 2


def cooks_cutoff(n: int) -> float:
    """Outlier threshold 4/N."""
    return 4.0 / n


def cooks_exclude(
    x: np.ndarray, y: np.ndarray, cutoff: float | None = None
) -> tuple[np.ndarray, RegressionResult]:
    """Flag influential points on the full-data fit, then refit without them.

    The cutoff defaults to 4/N. Exclusion is a single pass: distances are not
    recomputed after removal. Returns the kept indices and the refit result,
    whose excluded_indices and cooks_distances refer to the original points.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 points")
    if cutoff is None:
        cutoff = cooks_cutoff(n)
    d = cooks_distances(x, y)
    keep = np.flatnonzero(d <= cutoff)
    excluded = np.flatnonzero(d > cutoff)
    if keep.size < 3:
        raise ValueError(
            f"only {keep.size} points survive the Cook's distance cutoff {cutoff:g}"
        )
    base = ols_regression(x[keep], y[keep])
    result = RegressionResult(
        intercept=base.intercept,
        slope=base.slope,
        standardized_slope=base.standardized_slope,
        t=base.t,
        df=base.df,
        p=base.p,
        n_used=base.n_used,
        excluded_indices=tuple(int(i) for i in excluded),
        cooks_distances=tuple(float(v) for v in d),
        perfect_fit=base.perfect_fit,
    )
    return keep, result


# ---------------------------------------------------------------------------
# omnibus driver over a feature matrix


PAIR_ORDER: tuple[tuple[Phase, Phase], ...] = (
    (Phase.PRE_B, Phase.VRX),
    (Phase.VRX, Phase.POST_B),
    (Phase.PRE_B, Phase.POST_B),
)


@dataclass(frozen=True)
class OmnibusRow:
    region: Region
    band: str
    kw: KwResult
    phi: float
    phi_n: int


@dataclass(frozen=True)
class PairwiseRow:
    region: Region
    band: str
    phase_a: Phase
    phase_b: Phase
    signed_rank: PairwiseResult | None
    rank_sum: PairwiseResult | None


@dataclass(frozen=True)
class OmnibusResults:
    omnibus: tuple[OmnibusRow, ...]
    pairwise: tuple[PairwiseRow, ...]
    alpha: float


def omnibus_analysis(
    feature_matrix,
    *,
    alpha: float = 0.05,
    wilcoxon: str = "both",
    phi_n_mode: str = "participants",
) -> OmnibusResults:
    """Kruskal-Wallis across phases for every (region, band), then pairwise tests.

    Pairwise comparisons run only where the omnibus p is below alpha, over the
    three phase pairs, with the signed-rank and rank-sum variants selectable
    via `wilcoxon` ("signed-rank", "rank-sum" or "both").
    """
    if wilcoxon not in ("signed-rank", "rank-sum", "both"):
        raise ValueError(f"unknown wilcoxon method {wilcoxon!r}")
    if phi_n_mode not in ("participants", "observations"):
        raise ValueError(f"unknown phi_n_mode {phi_n_mode!r}")
    omnibus: list[OmnibusRow] = []
    pairwise: list[PairwiseRow] = []
    n_participants = len(feature_matrix.participants)
    for region in REGION_ORDER:
        for band in feature_matrix.band_names:
            groups = [feature_matrix.phase_values(ph, region, band) for ph in PHASE_ORDER]
            kw = kruskal_wallis(groups)
            phi_n = n_participants if phi_n_mode == "participants" else sum(kw.group_sizes)
            omnibus.append(
                OmnibusRow(region, band, kw, phi_effect_size(kw.h, phi_n), phi_n)
            )
            if kw.p < alpha:
                values = {ph: feature_matrix.phase_values(ph, region, band) for ph in PHASE_ORDER}
                for pa, pb in PAIR_ORDER:
                    sr = (
                        wilcoxon_signed_rank(values[pa], values[pb])
                        if wilcoxon in ("signed-rank", "both")
                        else None
                    )
                    rs = (
                        wilcoxon_rank_sum(values[pa], values[pb])
                        if wilcoxon in ("rank-sum", "both")
                        else None
                    )
                    pairwise.append(PairwiseRow(region, band, pa, pb, sr, rs))
    return OmnibusResults(tuple(omnibus), tuple(pairwise), alpha)


@dataclass(frozen=True)
class RegressionRow:
    """One empathy-versus-asymmetry regression, with the points that fed it."""

    predictor: str  # "PreB", "VRX" or "VRX_minus_PreB"
    participants: tuple[str, ...]
    x: tuple[float, ...]  # asymmetry predictor values
    y: tuple[float, ...]  # empathy totals
    cutoff: float
    result: RegressionResult


def empathy_regression(
    feature_matrix,
    totals_by_participant: dict[str, int],
    *,
    region: Region = Region.FRONTAL,
    band: str = "Alpha",
    cutoff: float | None = None,
) -> list[RegressionRow]:
    """Regress empathy on the region/band asymmetry for PreB, VRX and VRX - PreB.

    Influential observations are removed once via Cook's distance (cutoff 4/N
    unless overridden) before the reported fit.
    """
    pids = feature_matrix.participants
    missing = [p for p in pids if p not in totals_by_participant]
    if missing:
        raise ValueError(f"no empathy total for participants: {missing}")
    y = np.array([float(totals_by_participant[p]) for p in pids])
    pre = feature_matrix.phase_values(Phase.PRE_B, region, band)
    vrx = feature_matrix.phase_values(Phase.VRX, region, band)
    predictors = {
        "PreB": pre,
        "VRX": vrx,
        "VRX_minus_PreB": vrx - pre,
    }
    rows: list[RegressionRow] = []
    for name, x in predictors.items():
        used_cutoff = cooks_cutoff(x.size) if cutoff is None else cutoff
        _, result = cooks_exclude(x, y, used_cutoff)
        rows.append(
            RegressionRow(
                predictor=name,
                participants=tuple(pids),
                x=tuple(float(v) for v in x),
                y=tuple(float(v) for v in y),
                cutoff=used_cutoff,
                result=result,
            )
        )
    return rows
