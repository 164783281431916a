"""Quantitative evaluation: MAPE, RBF-MMD, PRD curves, stability statistics,
correlation and frequency scans, and full-factorial DOE with three-way ANOVA.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc
from sklearn.cluster import KMeans

from .errors import ConfigError, DataError, DesignError, MetricError, ShapeError


def mape(values, target) -> float:
    """Mean absolute percentage error of `values` against a scalar target."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise MetricError("MAPE needs at least one value")
    if target == 0:
        raise MetricError("MAPE undefined for target 0")
    return float(np.mean(np.abs(values - target) / abs(target)) * 100.0)


# --- maximum mean discrepancy -------------------------------------------------


@dataclass
class MmdResult:
    value: float
    bandwidth: float
    n_a: int
    n_b: int


def _sq_dists(a, b):
    aa = np.sum(a * a, axis=1)
    bb = np.sum(b * b, axis=1)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _kernel_mean(a, b, bandwidth):
    # Sort before summing so the result is invariant to argument order.
    k = np.exp(-_sq_dists(a, b) / (2.0 * bandwidth**2))
    return np.sort(k, axis=None).sum() / k.size


def median_pairwise_distance(x):
    """Median distance over distinct pairs; the default MMD bandwidth."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d2 = _sq_dists(x, x)
    iu = np.triu_indices(x.shape[0], k=1)
    dists = np.sqrt(d2[iu])
    if dists.size == 0:
        raise MetricError("need at least two points for the bandwidth heuristic")
    med = float(np.median(dists))
    if med == 0.0:
        raise MetricError("median pairwise distance is zero; pass a bandwidth")
    return med


def mmd_rbf(a, b, bandwidth=None) -> MmdResult:
    """Biased (V-statistic) MMD with the Gaussian RBF kernel.

    The biased estimator makes identical sets score exactly zero; the square
    root of the clamped squared estimate is returned. Bandwidth defaults to
    the median pairwise distance of the pooled samples.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise MetricError("MMD needs nonempty sample sets")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if bandwidth is None:
        bandwidth = median_pairwise_distance(np.vstack([a, b]))
    if bandwidth <= 0:
        raise MetricError(f"bandwidth must be positive, got {bandwidth}")
    mmd2 = (
        _kernel_mean(a, a, bandwidth)
        + _kernel_mean(b, b, bandwidth)
        - 2.0 * _kernel_mean(a, b, bandwidth)
    )
    return MmdResult(float(np.sqrt(max(mmd2, 0.0))), float(bandwidth), a.shape[0], b.shape[0])


# --- precision/recall for distributions ---------------------------------------


@dataclass
class PrdCurve:
    """(precision, recall) pairs ordered by non-decreasing recall."""

    precision: np.ndarray
    recall: np.ndarray
    k: int

    def points(self):
        return list(zip(self.precision.tolist(), self.recall.tolist()))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("precision,recall\n")
            for p, r in zip(self.precision, self.recall):
                fh.write(f"{p!r},{r!r}\n")


def prd(real, generated, k=20, grid_size=1001, seed=0) -> PrdCurve:
    """Cluster-histogram precision/recall curve.

    Pools both sets, k-means clusters them (10 restarts, best inertia), forms
    cluster histograms p (real) and q (generated), and sweeps lambda = tan(theta)
    over a uniform angular grid:

        precision(lambda) = sum_i min(lambda p_i, q_i)
        recall(lambda)    = precision(lambda) / lambda
    """
    real = np.atleast_2d(np.asarray(real, dtype=float))
    generated = np.atleast_2d(np.asarray(generated, dtype=float))
    if real.shape[1] != generated.shape[1]:
        raise ShapeError("real/generated dimension mismatch")
    if real.shape[0] < k or generated.shape[0] < k:
        raise ConfigError(f"both sets need at least k={k} points")
    pooled = np.vstack([real, generated])
    km = KMeans(n_clusters=k, n_init=10, random_state=seed).fit(pooled)
    labels = km.labels_
    p = np.bincount(labels[: real.shape[0]], minlength=k) / real.shape[0]
    q = np.bincount(labels[real.shape[0] :], minlength=k) / generated.shape[0]
    return prd_from_histograms(p, q, grid_size=grid_size, k=k)


def prd_from_histograms(p, q, grid_size=1001, k=None, epsilon=1e-10):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    angles = np.linspace(epsilon, np.pi / 2 - epsilon, grid_size)
    lam = np.tan(angles)
    precision = np.minimum(lam[:, None] * p[None, :], q[None, :]).sum(axis=1)
    recall = precision / lam
    # histogram renormalization can overshoot 1 by an ulp; keep the unit square
    precision = np.clip(precision, 0.0, 1.0)
    recall = np.clip(recall, 0.0, 1.0)
    # lambda descending: precision non-increasing, recall non-decreasing
    order = np.argsort(-lam)
    return PrdCurve(precision[order], recall[order], k if k is not None else p.size)


# --- F distribution and friends ------------------------------------------------


def f_cdf(x, d1, d2):
    """CDF of the F(d1, d2) distribution via the regularized incomplete beta."""
    if np.isinf(x):
        return 1.0
    if x <= 0:
        return 0.0
    z = d1 * x / (d1 * x + d2)
    return float(betainc(d1 / 2.0, d2 / 2.0, z))


def t_two_sided_p(t, df):
    """Two-sided p for a t statistic, using t^2 ~ F(1, df)."""
    if np.isnan(t):
        return float("nan")
    return 1.0 - f_cdf(t * t, 1, df)


# --- correlation and frequency scans --------------------------------------------


@dataclass
class CorrelationScan:
    r: np.ndarray
    p: np.ndarray
    valid: np.ndarray  # False where a column had zero variance

    def significant(self, alpha=0.05):
        return self.valid & (self.p < alpha)


def correlation_scan(x, perf) -> CorrelationScan:
    """Per-column Pearson r against `perf`, with two-sided t-test p-values."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(perf, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < 3:
        raise DataError("correlation scan needs at least 3 rows")
    if y.size != n:
        raise ShapeError("perf length does not match rows")
    yc = y - y.mean()
    sy = np.sqrt(np.sum(yc * yc))
    rs = np.full(x.shape[1], np.nan)
    ps = np.full(x.shape[1], np.nan)
    valid = np.zeros(x.shape[1], dtype=bool)
    for j in range(x.shape[1]):
        xc = x[:, j] - x[:, j].mean()
        sx = np.sqrt(np.sum(xc * xc))
        if sx == 0.0 or sy == 0.0:
            continue
        r = float(np.dot(xc, yc) / (sx * sy))
        r = min(1.0, max(-1.0, r))
        valid[j] = True
        rs[j] = r
        if abs(r) == 1.0:
            ps[j] = 0.0
        else:
            t = r * np.sqrt((n - 2) / (1.0 - r * r))
            ps[j] = t_two_sided_p(t, n - 2)
    return CorrelationScan(rs, ps, valid)


@dataclass
class FrequencyResult:
    counts: np.ndarray
    edges: np.ndarray
    high_bin: int
    low_bin: int

    @property
    def high_midpoint(self):
        return float((self.edges[self.high_bin] + self.edges[self.high_bin + 1]) / 2.0)

    @property
    def low_midpoint(self):
        return float((self.edges[self.low_bin] + self.edges[self.low_bin + 1]) / 2.0)


def frequency_analysis(values, bounds, bins=20) -> FrequencyResult:
    """Equal-width histogram over the feasible range; ties break to the lowest bin."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise DataError("frequency analysis needs a nonempty dataset")
    lo, hi = float(bounds[0]), float(bounds[1])
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return FrequencyResult(counts, edges, int(np.argmax(counts)), int(np.argmin(counts)))


# --- stability ------------------------------------------------------------------


@dataclass
class StabilityResult:
    mape_mean: float
    mape_std: float
    feasibility_mean: float
    feasibility_std: float
    repeats: int


def stability_run(generator, repeats) -> StabilityResult:
    """Repeat a seeded generation closure and report population std of its metrics.

    `generator(i)` runs repeat i and returns (mape, feasibility_rate).
    """
    if repeats < 2:
        raise ConfigError(f"need repeats >= 2, got {repeats}")
    mapes, rates = [], []
    for i in range(repeats):
        try:
            m, r = generator(i)
        except Exception as exc:
            raise MetricError(f"generator failed after {i} completed runs: {exc}") from exc
        mapes.append(float(m))
        rates.append(float(r))
    mapes = np.asarray(mapes)
    rates = np.asarray(rates)
    return StabilityResult(
        float(mapes.mean()), float(mapes.std()), float(rates.mean()), float(rates.std()), repeats
    )


# --- design of experiments / ANOVA -----------------------------------------------


@dataclass
class DoePlan:
    """Full factorial plan; every factor has two levels, every cell >= 2 replicates."""

    factors: dict  # name -> (low, high)
    replicates: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 2:
            raise DesignError("need >= 2 replicates per cell for a nonzero error df")
        for name, levels in self.factors.items():
            if len(levels) != 2:
                raise DesignError(f"factor {name!r} must have exactly 2 levels")

    def cells(self):
        names = list(self.factors)
        for combo in itertools.product(*(self.factors[n] for n in names)):
            yield dict(zip(names, combo))

    def run_order(self):
        """Randomized (cell, replicate) order with per-run seeds, recorded."""
        runs = [
            {"factors": cell, "replicate": r}
            for cell in self.cells()
            for r in range(self.replicates)
        ]
        rng = np.random.default_rng(self.seed)
        order = rng.permutation(len(runs))
        out = []
        for pos, idx in enumerate(order):
            run = dict(runs[idx])
            run["run"] = pos
            run["seed"] = int(self.seed * 100003 + idx)
            out.append(run)
        return out


def default_doe_plan(replicates=2, seed=0):
    return DoePlan(
        {"lambda": (0.3, 0.7), "gamma": (0.3, 0.7), "U": (20, 30)},
        replicates=replicates,
        seed=seed,
    )


def doe_run(plan: DoePlan, experiment):
    """Execute `experiment(factors_dict, seed) -> float` for every planned run.

    Failures are recorded per run (response None, failed True) rather than
    aborting the table.
    """
    rows = []
    for run in plan.run_order():
        row = dict(run)
        try:
            row["response"] = float(experiment(run["factors"], run["seed"]))
            row["failed"] = False
        except Exception as exc:
            row["response"] = None
            row["failed"] = True
            row["error"] = str(exc)
        rows.append(row)
    return rows


@dataclass
class AnovaRow:
    source: str
    ss: float
    df: int
    ms: float
    f: float
    p: float
    significant: bool
    note: str = ""


@dataclass
class AnovaTable:
    rows: list
    ss_error: float
    df_error: int
    ss_total: float
    df_total: int
    alpha: float = 0.05

    def row(self, source):
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    def partition_gap(self):
        """Relative difference between SS_total and the sum of all components."""
        total = sum(r.ss for r in self.rows) + self.ss_error
        scale = max(abs(self.ss_total), 1e-300)
        return abs(total - self.ss_total) / scale

    def to_json(self):
        return {
            "alpha": self.alpha,
            "rows": [
                {
                    "source": r.source,
                    "ss": r.ss,
                    "df": r.df,
                    "ms": r.ms,
                    "F": r.f,
                    "p": r.p,
                    "significant": r.significant,
                    "note": r.note,
                }
                for r in self.rows
            ],
            "error": {"ss": self.ss_error, "df": self.df_error},
            "total": {"ss": self.ss_total, "df": self.df_total},
        }


def anova3(rows, alpha=0.05) -> AnovaTable:
    """Three-way fixed-effects ANOVA of a balanced replicated factorial.

    `rows` are doe_run rows (dicts with "factors" and "response"). Reports the
    three main effects, the three two-way interactions, and the three-way
    interaction, each tested against the within-cell error.
    """
    rows = [r for r in rows if not r.get("failed")]
    if not rows:
        raise DesignError("no successful runs")
    names = sorted(rows[0]["factors"])
    if len(names) != 3:
        raise DesignError(f"anova3 needs exactly 3 factors, got {names}")
    levels = {n: sorted({r["factors"][n] for r in rows}) for n in names}
    shape = tuple(len(levels[n]) for n in names)
    cell_lists = {}
    for r in rows:
        key = tuple(levels[n].index(r["factors"][n]) for n in names)
        cell_lists.setdefault(key, []).append(float(r["response"]))
    n_rep = {len(v) for v in cell_lists.values()}
    if len(cell_lists) != int(np.prod(shape)) or len(n_rep) != 1:
        raise DesignError("unbalanced design: every cell needs the same replicate count")
    reps = n_rep.pop()
    if reps < 2:
        raise DesignError("need >= 2 replicates per cell")
    y = np.empty(shape + (reps,))
    for key, vals in cell_lists.items():
        y[key] = vals

    grand = y.mean()
    a, b, c = shape
    cell_mean = y.mean(axis=3)

    def eff(axis_keep):
        m = y.mean(axis=tuple(i for i in range(4) if i not in axis_keep))
        return m

    m_a, m_b, m_c = eff((0,)), eff((1,)), eff((2,))
    m_ab, m_ac, m_bc = eff((0, 1)), eff((0, 2)), eff((1, 2))

    ss = {}
    ss[names[0]] = b * c * reps * float(np.sum((m_a - grand) ** 2))
    ss[names[1]] = a * c * reps * float(np.sum((m_b - grand) ** 2))
    ss[names[2]] = a * b * reps * float(np.sum((m_c - grand) ** 2))
    ss[f"{names[0]}:{names[1]}"] = c * reps * float(
        np.sum((m_ab - m_a[:, None] - m_b[None, :] + grand) ** 2)
    )
    ss[f"{names[0]}:{names[2]}"] = b * reps * float(
        np.sum((m_ac - m_a[:, None] - m_c[None, :] + grand) ** 2)
    )
    ss[f"{names[1]}:{names[2]}"] = a * reps * float(
        np.sum((m_bc - m_b[:, None] - m_c[None, :] + grand) ** 2)
    )
    ss[f"{names[0]}:{names[1]}:{names[2]}"] = reps * float(
        np.sum(
            (
                cell_mean
                - m_ab[:, :, None]
                - m_ac[:, None, :]
                - m_bc[None, :, :]
                + m_a[:, None, None]
                + m_b[None, :, None]
                + m_c[None, None, :]
                - grand
            )
            ** 2
        )
    )
    df = {
        names[0]: a - 1,
        names[1]: b - 1,
        names[2]: c - 1,
        f"{names[0]}:{names[1]}": (a - 1) * (b - 1),
        f"{names[0]}:{names[2]}": (a - 1) * (c - 1),
        f"{names[1]}:{names[2]}": (b - 1) * (c - 1),
        f"{names[0]}:{names[1]}:{names[2]}": (a - 1) * (b - 1) * (c - 1),
    }
    ss_error = float(np.sum((y - cell_mean[..., None]) ** 2))
    df_error = a * b * c * (reps - 1)
    ss_total = float(np.sum((y - grand) ** 2))
    df_total = y.size - 1
    ms_error = ss_error / df_error

    out_rows = []
    for source in ss:
        ms = ss[source] / df[source] if df[source] else 0.0
        note = ""
        if ms_error == 0.0:
            if ss[source] == 0.0:
                f_val, p_val, sig, note = 0.0, 1.0, False, "no variance"
            else:
                f_val, p_val, sig, note = float("inf"), 0.0, True, "zero error variance"
        else:
            f_val = ms / ms_error
            p_val = 1.0 - f_cdf(f_val, df[source], df_error)
            sig = p_val < alpha
        out_rows.append(AnovaRow(source, ss[source], df[source], ms, f_val, p_val, sig, note))
    return AnovaTable(out_rows, ss_error, df_error, ss_total, df_total, alpha)
