import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from diffdesign import evalkit as ek
from diffdesign.errors import ConfigError, DataError, DesignError, MetricError, ShapeError


class TestMape:
    def test_exact_match(self):
        assert ek.mape([0.3, 0.3], 0.3) == 0.0

    def test_hand_arithmetic(self):
        assert ek.mape([0.00033, 0.00027], 0.0003) == pytest.approx(10.0)

    def test_zero_target(self):
        with pytest.raises(MetricError):
            ek.mape([1.0], 0.0)

    def test_empty(self):
        with pytest.raises(MetricError):
            ek.mape([], 1.0)


def brute_force_mmd2(a, b, bw):
    """Independent double-loop V-statistic."""
    def k(x, y):
        return math.exp(-float(np.sum((x - y) ** 2)) / (2 * bw * bw))

    saa = sum(k(x, y) for x in a for y in a) / (len(a) ** 2)
    sbb = sum(k(x, y) for x in b for y in b) / (len(b) ** 2)
    sab = sum(k(x, y) for x in a for y in b) / (len(a) * len(b))
    return saa + sbb - 2 * sab


class TestMmd:
    def test_identical_sets_zero(self):
        a = np.random.default_rng(0).standard_normal((10, 3))
        assert ek.mmd_rbf(a, a.copy()).value == 0.0

    def test_hand_two_points(self):
        # A={0}, B={2}, bw=1: mmd^2 = 2 - 2 exp(-2)
        res = ek.mmd_rbf(np.array([[0.0]]), np.array([[2.0]]), bandwidth=1.0)
        assert res.value == pytest.approx(math.sqrt(2.0 - 2.0 * math.exp(-2.0)), abs=1e-12)

    def test_symmetry_bit_exact(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((8, 2))
        b = rng.standard_normal((13, 2)) + 0.5
        assert ek.mmd_rbf(a, b).value == ek.mmd_rbf(b, a).value

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.standard_normal((int(rng.integers(1, 6)), 2))
            b = rng.standard_normal((int(rng.integers(1, 6)), 2))
            bw = float(rng.uniform(0.5, 2.0))
            got = ek.mmd_rbf(a, b, bandwidth=bw).value
            want2 = brute_force_mmd2(a, b, bw)
            assert got == pytest.approx(math.sqrt(max(want2, 0.0)), abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            ek.mmd_rbf(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_identical_pooled_points_bandwidth_error(self):
        with pytest.raises(MetricError):
            ek.mmd_rbf(np.zeros((4, 2)), np.zeros((4, 2)))

    def test_orders_farther_sets_higher(self):
        rng = np.random.default_rng(3)
        ref = rng.standard_normal((200, 2))
        near = rng.standard_normal((200, 2)) * 1.05
        far = rng.standard_normal((200, 2)) + 2.0
        bw = ek.median_pairwise_distance(ref)
        assert ek.mmd_rbf(far, ref, bw).value > ek.mmd_rbf(near, ref, bw).value


class TestPrd:
    def test_identical_sets_corner(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((60, 2))
        curve = ek.prd(a, a.copy(), k=5)
        best = np.argmin(np.abs(curve.precision - curve.recall))
        assert curve.precision[best] >= 0.999 and curve.recall[best] >= 0.999

    def test_disjoint_histograms_zero(self):
        curve = ek.prd_from_histograms([1.0, 0.0], [0.0, 1.0])
        assert np.all(curve.precision <= 1e-9)

    def test_hand_half_overlap(self):
        curve = ek.prd_from_histograms([0.5, 0.5], [1.0, 0.0], grid_size=1001)
        at_one = np.argmin(np.abs(curve.recall - curve.precision))
        assert curve.precision[at_one] == pytest.approx(0.5, abs=1e-3)

    def test_monotone_curve(self):
        rng = np.random.default_rng(5)
        p = rng.random(20)
        p /= p.sum()
        q = rng.random(20)
        q /= q.sum()
        curve = ek.prd_from_histograms(p, q)
        assert np.all(np.diff(curve.precision) <= 1e-12)
        assert np.all(np.diff(curve.recall) >= -1e-12)
        assert np.all((curve.precision >= 0) & (curve.precision <= 1))
        assert np.all((curve.recall >= 0) & (curve.recall <= 1))

    def test_k_too_large(self):
        with pytest.raises(ConfigError):
            ek.prd(np.zeros((3, 2)), np.zeros((50, 2)), k=5)

    def test_curve_csv(self, tmp_path):
        curve = ek.prd_from_histograms([0.5, 0.5], [0.5, 0.5], grid_size=11)
        path = tmp_path / "prd.csv"
        curve.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "precision,recall" and len(lines) == 12


class TestFCdf:
    def test_spot_value_f_1_10(self):
        assert ek.f_cdf(4.96, 1, 10) == pytest.approx(0.95, abs=5e-3)

    def test_quadrature_oracle(self):
        """Numerical integration of the F density as the independent route."""
        def f_pdf(x, d1, d2):
            num = (d1 / d2) ** (d1 / 2) * x ** (d1 / 2 - 1)
            den = (1 + d1 * x / d2) ** ((d1 + d2) / 2)
            beta = gamma_fn(d1 / 2) * gamma_fn(d2 / 2) / gamma_fn((d1 + d2) / 2)
            return num / den / beta

        for d1, d2, x in ((1, 10, 4.96), (3, 14, 2.5), (2, 8, 1.1)):
            want, _ = integrate.quad(f_pdf, 0, x, args=(d1, d2))
            assert ek.f_cdf(x, d1, d2) == pytest.approx(want, abs=1e-9)

    def test_edges(self):
        assert ek.f_cdf(0.0, 2, 5) == 0.0
        assert ek.f_cdf(float("inf"), 2, 5) == 1.0


class TestCorrelation:
    def test_perfect_linearity(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        scan = ek.correlation_scan(x, np.array([2.0, 4.0, 6.0, 8.0]))
        assert scan.r[0] == pytest.approx(1.0)
        assert scan.p[0] == pytest.approx(0.0, abs=1e-12)

    def test_constant_column_flagged(self):
        x = np.column_stack([np.ones(10), np.arange(10.0)])
        scan = ek.correlation_scan(x, np.arange(10.0))
        assert not scan.valid[0] and scan.valid[1]

    def test_independent_column(self):
        rng = np.random.default_rng(10)
        hits = 0
        for s in range(20):
            x = rng.standard_normal((1000, 1))
            y = rng.standard_normal(1000)
            scan = ek.correlation_scan(x, y)
            if abs(scan.r[0]) < 0.1 and scan.p[0] > 0.05:
                hits += 1
        assert hits >= 18

    def test_false_positive_rate(self):
        """Under independence the p < 0.05 rate sits near 0.05."""
        rng = np.random.default_rng(11)
        n_trials = 1000
        fp = 0
        for _ in range(n_trials):
            x = rng.standard_normal((30, 1))
            y = rng.standard_normal(30)
            fp += int(ek.correlation_scan(x, y).p[0] < 0.05)
        assert 0.03 <= fp / n_trials <= 0.07

    def test_needs_three_rows(self):
        with pytest.raises(DataError):
            ek.correlation_scan(np.zeros((2, 1)), np.zeros(2))


class TestFrequency:
    def test_bin_midpoint_arithmetic(self):
        res = ek.frequency_analysis(np.array([0.1]), (0.0, 20.0), bins=20)
        assert res.edges[1] - res.edges[0] == pytest.approx(1.0)
        assert res.high_midpoint == pytest.approx(0.5)

    def test_all_identical_values(self):
        res = ek.frequency_analysis(np.full(50, 7.3), (0.0, 20.0), bins=20)
        assert res.edges[res.high_bin] <= 7.3 <= res.edges[res.high_bin + 1]
        assert res.low_bin == 0  # tie break to the lowest empty bin

    def test_uniform_data_counts(self):
        rng = np.random.default_rng(12)
        n = 20_000
        res = ek.frequency_analysis(rng.uniform(0, 1, n), (0.0, 1.0), bins=20)
        margin = 3 * math.sqrt(n / 20)
        assert np.all(np.abs(res.counts - n / 20) < margin)

    def test_tie_breaks_lowest_index(self):
        values = np.array([0.05, 0.15])  # bins 0 and 1 tie at one count each
        res = ek.frequency_analysis(values, (0.0, 1.0), bins=10)
        assert res.high_bin == 0 and res.low_bin == 2


class TestStability:
    def test_deterministic_generator(self):
        res = ek.stability_run(lambda i: (5.0, 1.0), repeats=5)
        assert res.mape_std == 0.0 and res.feasibility_std == 0.0

    def test_hand_two_run(self):
        vals = [(4.0, 1.0), (6.0, 0.5)]
        res = ek.stability_run(lambda i: vals[i], repeats=2)
        assert res.mape_mean == pytest.approx(5.0)
        assert res.mape_std == pytest.approx(1.0)  # population std

    def test_failure_reports_completed(self):
        def gen(i):
            if i == 3:
                raise RuntimeError("boom")
            return 1.0, 1.0

        with pytest.raises(MetricError, match="3 completed"):
            ek.stability_run(gen, repeats=10)

    def test_needs_two(self):
        with pytest.raises(ConfigError):
            ek.stability_run(lambda i: (0, 0), repeats=1)


class TestDoe:
    def test_counts(self):
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: 1.0)
        assert len(rows) == 16
        assert all(not r["failed"] for r in rows)

    def test_constant_closure(self):
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: 2.5)
        assert {r["response"] for r in rows} == {2.5}

    def test_closure_sees_factors(self):
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: f["gamma"] * 10)
        for r in rows:
            assert r["response"] == pytest.approx(r["factors"]["gamma"] * 10)

    def test_failures_marked(self):
        plan = ek.default_doe_plan(replicates=2)

        def bad(f, s):
            if f["U"] == 30:
                raise RuntimeError("nope")
            return 1.0

        rows = ek.doe_run(plan, bad)
        assert sum(r["failed"] for r in rows) == 8

    def test_replicates_floor(self):
        with pytest.raises(DesignError):
            ek.DoePlan({"a": (0, 1), "b": (0, 1), "c": (0, 1)}, replicates=1)


class TestAnova:
    def test_all_equal_responses(self):
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: 3.0)
        table = ek.anova3(rows)
        assert table.ss_total == 0.0
        for r in table.rows:
            assert r.f == 0.0 and r.note == "no variance"

    def test_single_effect_hand_sums(self):
        """gamma = +-1 responses: SS_gamma = 16, everything else 0, F infinite."""
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: 1.0 if f["gamma"] == 0.7 else -1.0)
        table = ek.anova3(rows)
        g = table.row("gamma")
        assert g.ss == pytest.approx(16.0, abs=1e-12)
        assert math.isinf(g.f) and g.significant
        for r in table.rows:
            if r.source != "gamma":
                assert r.ss == pytest.approx(0.0, abs=1e-12)
        assert table.ss_error == pytest.approx(0.0, abs=1e-12)

    def test_partition_identity_random(self):
        rng = np.random.default_rng(13)
        for trial in range(10):
            plan = ek.default_doe_plan(replicates=int(rng.integers(2, 5)), seed=trial)
            rows = ek.doe_run(plan, lambda f, s: float(rng.standard_normal()))
            table = ek.anova3(rows)
            assert table.partition_gap() < 1e-9
            assert table.df_total == sum(r.df for r in table.rows) + table.df_error

    def test_known_f_statistic(self):
        """Pure main effect plus noise: F matches a direct variance-ratio computation."""
        rng = np.random.default_rng(14)
        plan = ek.default_doe_plan(replicates=4)
        rows = ek.doe_run(plan, lambda f, s: f["U"] / 10.0 + 0.01 * rng.standard_normal())
        table = ek.anova3(rows)
        u_row = table.row("U")
        assert u_row.significant
        assert table.row("lambda").p > 0.05

    def test_unbalanced_rejected(self):
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: 1.0)
        with pytest.raises(DesignError):
            ek.anova3(rows[:-1])

    def test_json_layout(self):
        plan = ek.default_doe_plan(replicates=2)
        rows = ek.doe_run(plan, lambda f, s: s % 5)
        doc = ek.anova3(rows).to_json()
        sources = {r["source"] for r in doc["rows"]}
        assert {"U", "gamma", "lambda", "gamma:lambda", "U:gamma", "U:lambda",
                "U:gamma:lambda"} == sources
        assert set(doc["rows"][0]) >= {"source", "ss", "df", "ms", "F", "p", "significant"}
