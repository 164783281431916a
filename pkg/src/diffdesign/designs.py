"""Design schemas, dataset ingestion, masks, and the synthetic benchmarks.

Tabular designs are rows against a DesignSchema (named, bounded parameters);
airfoil designs are flattened [upper | lower] ordinate vectors on a fixed
cosine station grid. The synthetic problems supply exactly evaluable
performance labels and feasibility rules so the whole pipeline can be
validated quantitatively without any external dataset.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    GeometryError,
    IngestionError,
    MaskSpecError,
    ParseError,
    ShapeError,
)

# Hull component groups by parameter index range (inclusive).
COMPONENT_RANGES = {
    "midship": (6, 9),
    "bow": (10, 18),
    "stern": (19, 29),
    "bulb": (30, 43),
}


@dataclass(frozen=True)
class DesignSchema:
    names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.names) != len(self.bounds):
            raise ShapeError("schema names and bounds differ in length")
        if len(set(self.names)) != len(self.names):
            raise DataError("schema parameter names must be unique")
        for name, (lo, hi) in zip(self.names, self.bounds):
            if not lo < hi:
                raise DataError(f"parameter {name!r}: bound [{lo}, {hi}] is not lo < hi")

    @property
    def dim(self):
        return len(self.names)

    def to_json(self):
        return {"names": list(self.names), "bounds": [list(b) for b in self.bounds]}

    @staticmethod
    def from_json(obj):
        return DesignSchema(tuple(obj["names"]), tuple((float(lo), float(hi)) for lo, hi in obj["bounds"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def load(path):
        with open(path) as fh:
            return DesignSchema.from_json(json.load(fh))


def uniform_schema(dim, lo=0.0, hi=1.0, prefix="x"):
    return DesignSchema(
        tuple(f"{prefix}{i}" for i in range(dim)),
        tuple((lo, hi) for _ in range(dim)),
    )


@dataclass
class ConditionVector:
    """Generation condition: target performance plus named environment values."""

    performance_target: float
    environment: dict = field(default_factory=dict)

    def to_array(self, env_names=()):
        vals = [self.performance_target] + [float(self.environment[k]) for k in env_names]
        arr = np.asarray(vals, dtype=float)
        if not np.isfinite(arr).all():
            raise DataError("condition contains non-finite values")
        return arr


@dataclass
class TabularDataset:
    schema: DesignSchema
    x: np.ndarray            # (n, dim)
    perf: np.ndarray         # (n,)
    feasible: np.ndarray | None   # (n,) of 0/1, or None
    out_of_bounds_rows: list  # row indices violating schema bounds (flagged, kept)

    def __len__(self):
        return self.x.shape[0]


def load_tabular(path, schema: DesignSchema) -> TabularDataset:
    """Read a design CSV: header = parameter names + 'perf' [+ 'feasible'].

    Rows whose parameters fall outside the schema bounds are flagged by index
    but kept. Unparseable numerics raise with the offending row number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file, no header row")
        header = [h.strip() for h in header]
        want = list(schema.names) + ["perf"]
        has_feasible = header == want + ["feasible"]
        if not has_feasible and header != want:
            missing = [c for c in want if c not in header]
            raise IngestionError(
                f"{path}: header mismatch; missing columns {missing}" if missing
                else f"{path}: header order must be {want} [+ 'feasible']"
            )
        rows, perfs, feas = [], [], []
        flagged = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise IngestionError(f"{path}: row {lineno}: {exc}") from exc
            if len(vals) != len(header):
                raise IngestionError(
                    f"{path}: row {lineno}: {len(vals)} fields, expected {len(header)}"
                )
            x = vals[: schema.dim]
            for xv, (lo, hi) in zip(x, schema.bounds):
                if not (lo <= xv <= hi):
                    flagged.append(len(rows))
                    break
            rows.append(x)
            perfs.append(vals[schema.dim])
            if has_feasible:
                feas.append(vals[schema.dim + 1])
    x = np.asarray(rows, dtype=float).reshape(len(rows), schema.dim)
    return TabularDataset(
        schema,
        x,
        np.asarray(perfs, dtype=float),
        np.asarray(feas, dtype=float) if has_feasible else None,
        flagged,
    )


def save_tabular(path, schema: DesignSchema, x, perf=None, feasible=None):
    """Write a design CSV in the format load_tabular reads.

    Floats are written with repr so a load/save cycle is bit-exact.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    header = list(schema.names)
    if perf is not None:
        header.append("perf")
    if feasible is not None:
        header.append("feasible")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(x.shape[0]):
            row = [repr(float(v)) for v in x[i]]
            if perf is not None:
                row.append(repr(float(perf[i])))
            if feasible is not None:
                row.append(repr(float(feasible[i])))
            writer.writerow(row)


# --- normalization ----------------------------------------------------------


def fit_normalization(x):
    """Per-column mean/std (population). Constant columns get std 1."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def normalize(x, stats):
    mean, std = stats
    return (np.asarray(x, dtype=float) - mean) / std


def denormalize(x, stats):
    mean, std = stats
    return np.asarray(x, dtype=float) * std + mean


# --- airfoil geometry -------------------------------------------------------


@dataclass
class AirfoilGeometry:
    """Chord-normalized surfaces, each ordered leading edge to trailing edge."""

    name: str
    upper: np.ndarray   # (n_u, 2) x,y
    lower: np.ndarray   # (n_l, 2) x,y

    @property
    def n_points(self):
        return self.upper.shape[0] + self.lower.shape[0]


def parse_selig(path) -> AirfoilGeometry:
    """Parse a Selig-convention coordinate file.

    Layout: a name line, then x y pairs traversing trailing edge -> upper
    surface -> leading edge -> lower surface -> trailing edge. The surface is
    split at the minimum-x point and the chord normalized to [0, 1].
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 4:
        raise ParseError(f"{path}: too few lines for a coordinate file")
    name = lines[0]
    pts = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError(f"{path}: line {lineno}: expected 'x y', got {ln!r}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    pts = np.asarray(pts, dtype=float)
    x = pts[:, 0]
    le = int(np.argmin(x))
    if le == 0 or le == len(pts) - 1:
        raise ParseError(f"{path}: leading edge at file boundary; not a TE->LE->TE traversal")
    chord = x.max() - x.min()
    if chord <= 0:
        raise GeometryError(f"{path}: zero chord")
    tol = 1e-9 * max(1.0, chord)
    if np.any(np.diff(x[: le + 1]) > tol) or np.any(np.diff(x[le:]) < -tol):
        raise ParseError(f"{path}: non-monotone traversal around the leading edge")
    norm = (pts - [x.min(), 0.0]) / chord
    upper = norm[: le + 1][::-1]   # reverse to LE -> TE
    lower = norm[le:]
    return AirfoilGeometry(name, np.ascontiguousarray(upper), np.ascontiguousarray(lower))


def cosine_stations(n):
    """n chordwise stations clustered at the leading edge: (1 - cos(pi j/(n-1)))/2."""
    j = np.arange(n)
    return (1.0 - np.cos(np.pi * j / (n - 1))) / 2.0


def resample_airfoil(geom: AirfoilGeometry, n_stations) -> np.ndarray:
    """Fixed-length vectorization: [upper y's | lower y's] at cosine stations."""
    if n_stations < 3:
        raise GeometryError(f"need at least 3 stations, got {n_stations}")
    xs = cosine_stations(n_stations)
    out = np.empty(2 * n_stations)
    for k, surf in enumerate((geom.upper, geom.lower)):
        sx, sy = surf[:, 0], surf[:, 1]
        if sx.max() - sx.min() <= 0 or len(sx) < 2:
            raise GeometryError("degenerate surface: single x station")
        out[k * n_stations : (k + 1) * n_stations] = np.interp(xs, sx, sy)
    return out


def airfoil_schema(n_stations):
    names = [f"yu{i}" for i in range(n_stations)] + [f"yl{i}" for i in range(n_stations)]
    return DesignSchema(tuple(names), tuple((-1.0, 1.0) for _ in names))


# --- masks ------------------------------------------------------------------

_RANGE_RE = re.compile(r"^(\d+)-(\d+)$")
_INDEX_RE = re.compile(r"^(\d+)$")
_PREFIX_RE = re.compile(r"^first-(\d+)/8$")

MASK_GRAMMAR_HINT = (
    "mask spec: comma-separated index ranges ('6-9,30-43'), single indices, "
    "component names (midship/bow/stern/bulb), or 'first-k/8' prefixes; "
    "empty string fixes nothing"
)


def mask_from_spec(schema_or_dim, spec: str) -> np.ndarray:
    """Boolean mask from the spec grammar; True marks a known/kept coordinate."""
    dim = schema_or_dim.dim if isinstance(schema_or_dim, DesignSchema) else int(schema_or_dim)
    mask = np.zeros(dim, dtype=bool)
    spec = (spec or "").strip()
    if not spec:
        return mask
    for token in spec.split(","):
        token = token.strip().lower()
        if not token:
            raise MaskSpecError(f"empty token in mask spec; {MASK_GRAMMAR_HINT}")
        if token in COMPONENT_RANGES:
            lo, hi = COMPONENT_RANGES[token]
        elif m := _PREFIX_RE.match(token):
            k = int(m.group(1))
            if not 1 <= k <= 8:
                raise MaskSpecError(f"prefix fraction must be 1/8..8/8, got {token!r}")
            mask[: (dim * k) // 8] = True
            continue
        elif m := _RANGE_RE.match(token):
            lo, hi = int(m.group(1)), int(m.group(2))
            if lo > hi:
                raise MaskSpecError(f"range {token!r} is reversed")
        elif m := _INDEX_RE.match(token):
            lo = hi = int(m.group(1))
        else:
            raise MaskSpecError(f"bad token {token!r}; {MASK_GRAMMAR_HINT}")
        if hi >= dim:
            raise MaskSpecError(f"index {hi} out of range for dim {dim}")
        mask[lo : hi + 1] = True
    return mask


# --- feasibility oracle -----------------------------------------------------


class FeasibilityOracle:
    """Deterministic, pure feasibility check: check(x) -> (feasible, violations)."""

    def check(self, design):
        raise NotImplementedError


class AlwaysFeasible(FeasibilityOracle):
    def check(self, design):
        return True, []


# --- synthetic tabular benchmark ---------------------------------------------


class SyntheticDesignProblem(FeasibilityOracle):
    """16-parameter tabular benchmark with a closed-form performance function.

    f(x) = 0.05 + 0.3 x0^2 + 0.2 x1 x2 - 0.1 x3 + 0.05 mean(x4..x15)
    subject to  x0 + x1 <= 1.2  and  x2 >= 0.1  on the unit box.
    The feasible region keeps ~61% of the box, so rejection sampling is cheap.
    """

    name = "synthetic-16"
    dim = 16

    def __init__(self):
        self.schema = uniform_schema(self.dim)

    def performance(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise ShapeError(f"design has dim {x.shape[1]}, expected {self.dim}")
        f = (
            0.05
            + 0.3 * x[:, 0] ** 2
            + 0.2 * x[:, 1] * x[:, 2]
            - 0.1 * x[:, 3]
            + 0.05 * x[:, 4:].mean(axis=1)
        )
        return float(f[0]) if single else f

    def check(self, design):
        x = np.asarray(design, dtype=float)
        violations = []
        if x[0] + x[1] > 1.2:
            violations.append("x0 + x1 <= 1.2")
        if x[2] < 0.1:
            violations.append("x2 >= 0.1")
        for i, (v, (lo, hi)) in enumerate(zip(x, self.schema.bounds)):
            if not (lo <= v <= hi):
                violations.append(f"{self.schema.names[i]} in [{lo}, {hi}]")
        return not violations, violations

    def feasible_rows(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = (x[:, 0] + x[:, 1] <= 1.2) & (x[:, 2] >= 0.1)
        ok &= ((x >= 0.0) & (x <= 1.0)).all(axis=1)
        return ok


class SyntheticAirfoilProblem(FeasibilityOracle):
    """Airfoil-like benchmark: perturbed four-digit-style sections on a cosine grid.

    Designs are [upper | lower] ordinate vectors; the performance label is a
    closed-form lift-to-drag-style score computable from the vector itself,
    so generated designs can be scored exactly. Smooth sine camber modes on
    top of the (camber, position, thickness) family give the dataset volume
    in ordinate space. No feasibility labels, which mirrors a pipeline
    without a trained classifier.
    """

    name = "synthetic-airfoil"
    n_camber_modes = 5
    n_thickness_modes = 2
    camber_mode_scale = 0.005
    thickness_mode_scale = 0.003
    ordinate_jitter = 0.01  # independent per-station scatter, keeps the set full-rank

    def __init__(self, n_stations=16):
        self.n_stations = n_stations
        self.dim = 2 * n_stations
        self.schema = airfoil_schema(n_stations)

    def build_section(self, camber, camber_pos, thickness, camber_modes=None,
                      thickness_modes=None):
        """Upper/lower ordinates for (m, p, t) plus optional sine-mode weights."""
        x = cosine_stations(self.n_stations)
        m, p, t = camber, camber_pos, thickness
        yc = np.where(
            x < p,
            m / p**2 * (2 * p * x - x**2),
            m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x**2),
        )
        if camber_modes is not None:
            for j, w in enumerate(camber_modes):
                yc = yc + w * np.sin(np.pi * (j + 1) * x)
        yt = 5 * t * (
            0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 - 0.1036 * x**4
        )
        if thickness_modes is not None:
            for j, w in enumerate(thickness_modes):
                yt = yt + w * np.sin(np.pi * (j + 1) * x)
        return np.concatenate([yc + yt, yc - yt])

    def performance(self, v):
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        v = np.atleast_2d(v)
        if v.shape[1] != self.dim:
            raise ShapeError(f"design has dim {v.shape[1]}, expected {self.dim}")
        upper = v[:, : self.n_stations]
        lower = v[:, self.n_stations :]
        camber = 0.5 * (upper + lower)
        thickness = upper - lower
        f = 1.0 + 12.0 * camber.mean(axis=1) - 4.0 * thickness.mean(axis=1)
        return float(f[0]) if single else f

    def check(self, design):
        return True, []

    def sample_params(self, rng, n):
        m = rng.uniform(0.0, 0.06, n)
        p = rng.uniform(0.25, 0.55, n)
        t = rng.uniform(0.06, 0.18, n)
        cm = rng.normal(0.0, self.camber_mode_scale, size=(n, self.n_camber_modes))
        tm = rng.normal(0.0, self.thickness_mode_scale, size=(n, self.n_thickness_modes))
        return m, p, t, cm, tm


BUILTIN_PROBLEMS = {
    SyntheticDesignProblem.name: SyntheticDesignProblem,
    SyntheticAirfoilProblem.name: SyntheticAirfoilProblem,
}


def get_problem(name, **kwargs):
    if name not in BUILTIN_PROBLEMS:
        raise DataError(f"unknown problem {name!r}; have {sorted(BUILTIN_PROBLEMS)}")
    return BUILTIN_PROBLEMS[name](**kwargs)


def synth_generate(problem, n, seed, feasible_only=True) -> TabularDataset:
    """Draw n designs from a synthetic problem with exact labels.

    For the tabular problem: uniform rejection sampling of the feasible box
    (or unfiltered draws with 0/1 feasibility labels when feasible_only is
    False, which classifier training needs). For the airfoil problem:
    sections from random (camber, position, thickness) parameters.
    """
    if n < 1:
        raise DataError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(99,)))
    if isinstance(problem, SyntheticAirfoilProblem):
        m, p, t, cm, tm = problem.sample_params(rng, n)
        x = np.stack(
            [
                problem.build_section(mi, pi, ti, camber_modes=ci, thickness_modes=hi)
                for mi, pi, ti, ci, hi in zip(m, p, t, cm, tm)
            ]
        )
        x = x + rng.normal(0.0, problem.ordinate_jitter, size=x.shape)
        return TabularDataset(problem.schema, x, problem.performance(x), None, [])
    if not feasible_only:
        x = rng.uniform(0.0, 1.0, size=(n, problem.dim))
        feas = problem.feasible_rows(x).astype(float)
        return TabularDataset(problem.schema, x, problem.performance(x), feas, [])
    rows = []
    attempts = 0
    while len(rows) < n:
        batch = rng.uniform(0.0, 1.0, size=(max(n, 256), problem.dim))
        attempts += batch.shape[0]
        keep = batch[problem.feasible_rows(batch)]
        rows.extend(keep)
        if attempts > 1000 * n and len(rows) < max(1, attempts // 1000):
            raise DataError("feasible-region acceptance rate below 1e-3")
    x = np.asarray(rows[:n])
    return TabularDataset(problem.schema, x, problem.performance(x), np.ones(n), [])
