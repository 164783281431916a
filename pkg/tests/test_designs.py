import numpy as np
import pytest

from diffdesign import designs as dz
from diffdesign.errors import DataError, GeometryError, IngestionError, MaskSpecError, ParseError


@pytest.fixture
def schema3():
    return dz.DesignSchema(("a", "b", "c"), ((0.0, 1.0), (0.0, 2.0), (-1.0, 1.0)))


class TestTabularIO:
    def test_empty_data_section(self, tmp_path, schema3):
        path = tmp_path / "empty.csv"
        path.write_text("a,b,c,perf\n")
        ds = dz.load_tabular(path, schema3)
        assert len(ds) == 0 and ds.out_of_bounds_rows == []

    def test_three_row_echo(self, tmp_path, schema3):
        path = tmp_path / "d.csv"
        path.write_text(
            "a,b,c,perf\n"
            "0.1,0.2,0.3,1.5\n"
            "0.4,1.5,-0.5,2.5\n"
            "0.9,0.1,0.0,3.5\n"
        )
        ds = dz.load_tabular(path, schema3)
        np.testing.assert_array_equal(ds.x[1], [0.4, 1.5, -0.5])
        np.testing.assert_array_equal(ds.perf, [1.5, 2.5, 3.5])

    def test_out_of_bounds_flagged_not_dropped(self, tmp_path, schema3):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c,perf\n0.5,0.5,0.0,1.0\n2.0,0.5,0.0,1.0\n")
        ds = dz.load_tabular(path, schema3)
        assert len(ds) == 2
        assert ds.out_of_bounds_rows == [1]

    def test_bad_numeric_reports_row(self, tmp_path, schema3):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c,perf\n0.5,0.5,0.0,1.0\n0.5,oops,0.0,1.0\n")
        with pytest.raises(IngestionError, match="row 3"):
            dz.load_tabular(path, schema3)

    def test_missing_column(self, tmp_path, schema3):
        path = tmp_path / "d.csv"
        path.write_text("a,b,perf\n0.5,0.5,1.0\n")
        with pytest.raises(IngestionError, match="missing"):
            dz.load_tabular(path, schema3)

    def test_save_load_bit_exact(self, tmp_path, schema3):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 3))
        perf = rng.standard_normal(5)
        path = tmp_path / "d.csv"
        dz.save_tabular(path, schema3, x, perf=perf)
        ds = dz.load_tabular(path, schema3)
        assert np.array_equal(ds.x, x)
        assert np.array_equal(ds.perf, perf)


class TestNormalization:
    def test_roundtrip_identity(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((50, 4)) * [1e-4, 1.0, 333.0, 42.0] + [0.0003, 0, 300, 40]
        stats = dz.fit_normalization(x)
        np.testing.assert_allclose(dz.denormalize(dz.normalize(x, stats), stats), x, atol=1e-12)

    def test_constant_column_guarded(self):
        x = np.ones((10, 2))
        mean, std = dz.fit_normalization(x)
        assert np.all(std == 1.0)


SYMMETRIC_FOIL = """symmetric test foil
1.0  0.0
0.5  0.1
0.0  0.0
0.5 -0.1
1.0  0.0
"""


class TestSelig:
    def test_symmetric_foil_mirrors(self, tmp_path):
        path = tmp_path / "foil.dat"
        path.write_text(SYMMETRIC_FOIL)
        geom = dz.parse_selig(path)
        assert geom.name == "symmetric test foil"
        np.testing.assert_allclose(geom.upper[:, 1], -geom.lower[:, 1], atol=1e-12)
        np.testing.assert_allclose(geom.upper[:, 0], geom.lower[:, 0], atol=1e-12)
        # leading -> trailing ordering after normalization
        assert geom.upper[0, 0] == 0.0 and geom.upper[-1, 0] == 1.0

    def test_chord_normalized(self, tmp_path):
        path = tmp_path / "foil.dat"
        path.write_text("wide foil\n2.0 0.0\n1.0 0.2\n0.0 0.0\n1.0 -0.2\n2.0 0.0\n")
        geom = dz.parse_selig(path)
        assert geom.upper[:, 0].max() == pytest.approx(1.0)
        assert geom.upper[:, 0].min() == pytest.approx(0.0)

    def test_public_convention_61_points(self, tmp_path):
        """NACA-style 61-point file in the database convention parses cleanly."""
        x = (1.0 - np.cos(np.linspace(0, np.pi, 31))) / 2.0
        yt = 0.6 * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 - 0.1036 * x**4)
        lines = ["NACA 0012 (constructed)"]
        for xi, yi in zip(x[::-1], yt[::-1]):
            lines.append(f"{xi:.6f} {yi:.6f}")
        for xi, yi in zip(x[1:], -yt[1:]):
            lines.append(f"{xi:.6f} {yi:.6f}")
        path = tmp_path / "naca.dat"
        path.write_text("\n".join(lines) + "\n")
        geom = dz.parse_selig(path)
        assert geom.n_points == 62  # LE point appears on both surfaces
        assert geom.upper[:, 0].min() >= 0.0 and geom.upper[:, 0].max() <= 1.0

    def test_malformed_traversal(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_text("zigzag\n1.0 0.0\n0.2 0.1\n0.7 0.2\n0.0 0.0\n1.0 -0.1\n")
        with pytest.raises(ParseError):
            dz.parse_selig(path)


class TestResample:
    def test_cosine_stations_three(self):
        np.testing.assert_allclose(dz.cosine_stations(3), [0.0, 0.5, 1.0], atol=1e-15)

    def test_flat_plate_zero_vector(self, tmp_path):
        path = tmp_path / "flat.dat"
        path.write_text("flat\n1.0 0.0\n0.5 0.0\n0.0 0.0\n0.5 0.0\n1.0 0.0\n")
        geom = dz.parse_selig(path)
        v = dz.resample_airfoil(geom, 8)
        np.testing.assert_array_equal(v, np.zeros(16))

    def test_resample_fixed_point(self):
        problem = dz.SyntheticAirfoilProblem(n_stations=12)
        vec = problem.build_section(0.03, 0.4, 0.12)
        xs = dz.cosine_stations(12)
        upper = np.stack([xs, vec[:12]], axis=1)
        lower = np.stack([xs, vec[12:]], axis=1)
        geom = dz.AirfoilGeometry("roundtrip", upper, lower)
        again = dz.resample_airfoil(geom, 12)
        np.testing.assert_allclose(again, vec, atol=1e-12)

    def test_degenerate_geometry(self):
        geom = dz.AirfoilGeometry("dot", np.array([[0.0, 0.0], [0.0, 0.1]]), np.array([[0.0, 0.0], [0.0, -0.1]]))
        with pytest.raises(GeometryError):
            dz.resample_airfoil(geom, 5)


class TestMasks:
    def test_range_inclusive(self):
        mask = dz.mask_from_spec(45, "6-9")
        assert mask.sum() == 4 and mask[6] and mask[9] and not mask[5] and not mask[10]

    def test_prefix_fraction(self):
        mask = dz.mask_from_spec(128, "first-2/8")
        assert mask[:32].all() and not mask[32:].any()

    def test_empty_spec(self):
        assert not dz.mask_from_spec(10, "").any()

    def test_component_names(self):
        bow = dz.mask_from_spec(45, "bow")
        np.testing.assert_array_equal(bow, dz.mask_from_spec(45, "10-18"))

    def test_components_partition(self):
        a = dz.mask_from_spec(45, "6-9")
        b = dz.mask_from_spec(45, "10-18")
        assert not (a & b).any()
        np.testing.assert_array_equal(a | b, dz.mask_from_spec(45, "6-18"))

    def test_prefix_strictly_increasing(self):
        pops = [dz.mask_from_spec(128, f"first-{k}/8").sum() for k in range(1, 8)]
        assert all(b > a for a, b in zip(pops, pops[1:]))

    def test_out_of_range(self):
        with pytest.raises(MaskSpecError):
            dz.mask_from_spec(10, "8-12")

    def test_malformed(self):
        with pytest.raises(MaskSpecError, match="mask spec"):
            dz.mask_from_spec(10, "banana")

    def test_combined_tokens(self):
        mask = dz.mask_from_spec(45, "6-9,30-43,2")
        assert mask[2] and mask[6:10].all() and mask[30:44].all()
        assert mask.sum() == 1 + 4 + 14


class TestSyntheticProblem:
    def test_reproducible_single_row(self):
        problem = dz.SyntheticDesignProblem()
        a = dz.synth_generate(problem, 1, seed=5)
        b = dz.synth_generate(problem, 1, seed=5)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.perf, b.perf)

    def test_all_rows_feasible(self):
        problem = dz.SyntheticDesignProblem()
        ds = dz.synth_generate(problem, 500, seed=1)
        assert all(problem.check(row)[0] for row in ds.x)

    def test_label_matches_second_path(self):
        """Recompute f with plain loops as an independent evaluation path."""
        problem = dz.SyntheticDesignProblem()
        ds = dz.synth_generate(problem, 50, seed=2)
        for row, label in zip(ds.x, ds.perf):
            tail = sum(row[i] for i in range(4, 16)) / 12.0
            f = 0.05 + 0.3 * row[0] ** 2 + 0.2 * row[1] * row[2] - 0.1 * row[3] + 0.05 * tail
            assert label == pytest.approx(f, abs=1e-12)

    def test_mixed_labels_for_classifier(self):
        problem = dz.SyntheticDesignProblem()
        ds = dz.synth_generate(problem, 400, seed=3, feasible_only=False)
        assert set(np.unique(ds.feasible)) == {0.0, 1.0}
        for row, label in zip(ds.x, ds.feasible):
            assert problem.check(row)[0] == bool(label)

    def test_violations_named(self):
        problem = dz.SyntheticDesignProblem()
        bad = np.full(16, 0.9)
        bad[2] = 0.05
        ok, violations = problem.check(bad)
        assert not ok
        assert "x0 + x1 <= 1.2" in violations and "x2 >= 0.1" in violations

    def test_airfoil_labels_from_vector(self):
        problem = dz.SyntheticAirfoilProblem(n_stations=16)
        ds = dz.synth_generate(problem, 20, seed=4)
        assert ds.x.shape == (20, 32)
        upper, lower = ds.x[:, :16], ds.x[:, 16:]
        expect = 1.0 + 12.0 * ((upper + lower) / 2).mean(axis=1) - 4.0 * (upper - lower).mean(axis=1)
        np.testing.assert_allclose(ds.perf, expect, atol=1e-12)

    def test_condition_vector(self):
        c = dz.ConditionVector(0.0003, {"froude": 0.43})
        np.testing.assert_array_equal(c.to_array(("froude",)), [0.0003, 0.43])
        with pytest.raises(DataError):
            dz.ConditionVector(np.nan).to_array()
