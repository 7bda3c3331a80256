"""Experiment drivers: dimension growth, error maps, convergence paths, and
the comparison against the dense series baseline.

Every driver takes one :class:`ExperimentConfig`, writes a versioned CSV plus
a ``summary.json`` into the output directory, and returns the summary dict.
Per-point failures inside a scan become NaN rows with a reason column; the
scan itself keeps going.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rom
from .assembly import assemble_basis
from .linalg import subspace_distance
from .operators import AffineOperator, build_xxz
from .perturbation import SeparationError, projector_approximation, projector_coefficients
from .spectral import lowest_clusters, reference_projector, smallest_eigenvalues
from .linalg import spectral_norm

SCHEMA_VERSION = 1
CROSSING_THRESHOLD = 1e-8
PROJECTOR_FIT_FLOOR = 1e-12
RITZ_FIT_FLOOR = 1e-9
MIN_FIT_SAMPLES = 4

EXPERIMENTS = ("dims", "grid", "path", "compare-pt")


@dataclass
class ExperimentConfig:
    experiment: str = "dims"
    model_type: str = "xxz"
    model_l: int = 10
    mu0: tuple = (-1.0, 0.0)
    clusters: int = 1
    order: int = 3
    tol_cluster: float = 1e-10
    tol_rank: float = 1e-12
    tol_solve: float = 1e-12
    grid_halfwidth: float = 0.03
    grid_points: int = 15
    path_direction: tuple = (1.0, 0.0)
    path_offset_min: float = 1e-5
    path_offset_max: float = 3e-2
    path_count: int = 30
    out_dir: str = "out"
    seed: int = 0
    workers: int | None = None
    dense_cutoff: int = 4096

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.model_type != "xxz":
            raise ValueError(f"unknown model type {self.model_type!r}")
        for name in ("tol_cluster", "tol_rank", "tol_solve"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_points < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if self.path_count < 2 or not 0 < self.path_offset_min < self.path_offset_max:
            raise ValueError("path offsets must be an increasing positive range")
        if not any(x != 0 for x in self.path_direction):
            raise ValueError("path direction must be nonzero")
        if self.order < 0 or self.clusters < 1:
            raise ValueError("order must be >= 0 and clusters >= 1")
        return self

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        kwargs = {}
        model = raw.get("model", {})
        if "type" in model:
            kwargs["model_type"] = model["type"]
        if "L" in model:
            kwargs["model_l"] = int(model["L"])
        if "out" in raw:
            kwargs["out_dir"] = raw["out"]
        flat = {f for f in cls.__dataclass_fields__}
        for key, value in raw.items():
            if key in ("model", "out"):
                continue
            if key not in flat:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = tuple(value) if isinstance(value, list) else value
        return cls(**kwargs)

    def with_env(self) -> "ExperimentConfig":
        updates = {}
        if os.environ.get("SEED"):
            updates["seed"] = int(os.environ["SEED"])
        if os.environ.get("WORKERS"):
            updates["workers"] = int(os.environ["WORKERS"])
        return replace(self, **updates) if updates else self


def build_model(config: ExperimentConfig) -> AffineOperator:
    return build_xxz(config.model_l)


def run(config: ExperimentConfig) -> dict:
    config.validate()
    driver = {
        "dims": run_dims,
        "grid": run_grid,
        "path": run_path,
        "compare-pt": run_compare_pt,
    }[config.experiment]
    return driver(config)


# ---------------------------------------------------------------------------
# output helpers

def _ensure_out(config) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return config.out_dir

def _csv_path(config) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    return os.path.join(config.out_dir, f"{config.experiment.replace('-', '_')}_{stamp}.csv")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_summary(config, summary) -> str:
    path = os.path.join(config.out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _config_echo(config) -> dict:
    echo = asdict(config)
    echo["mu0"] = list(config.mu0)
    echo["path_direction"] = list(config.path_direction)
    return echo


def _pool_map(fn, items, workers):
    if workers is None:
        workers = min(len(items), os.cpu_count() or 1) or 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


# ---------------------------------------------------------------------------
# shared analysis helpers

def fit_slope(offsets, values, floor) -> dict | None:
    """Least-squares log-log slope over samples above the noise floor.

    Values at or below ``floor`` sit at the numerical noise level of the
    metric and would flatten the fit, so they are excluded.  Returns None
    when fewer than MIN_FIT_SAMPLES samples survive.
    """
    offsets = np.asarray(offsets, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = np.isfinite(values) & (values > floor) & (offsets > 0)
    if mask.sum() < MIN_FIT_SAMPLES:
        return None
    x = np.log10(offsets[mask])
    y = np.log10(values[mask])
    slope, intercept = np.polyfit(x, y, 1)
    fit_residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return {"slope": float(slope), "intercept": float(intercept),
            "n_samples": int(mask.sum()), "fit_residual": fit_residual}


def locate_crossing(gap_fn, offsets, gaps, threshold=CROSSING_THRESHOLD,
                    refine_tol=1e-7, max_refine=200) -> dict:
    """Locate the first offset where the targeted gap vanishes.

    Coarse samples rarely land within ``threshold`` of an eigenvalue
    crossing, so the smallest-gap sample is bracketed and the gap minimum is
    refined with a golden-section search until the gap drops below the
    threshold or the bracket collapses.
    """
    offsets = np.asarray(offsets, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    finite = np.isfinite(gaps)
    if not finite.any():
        return {"crossing_offset": None, "bracket": None, "gap_at_crossing": None}
    idx = int(np.nanargmin(np.where(finite, gaps, np.inf)))
    below = np.nonzero(finite & (gaps < threshold))[0]
    if below.size:
        first = int(below[0])
        lo = offsets[first - 1] if first > 0 else 0.0
        return {"crossing_offset": float(offsets[first]),
                "bracket": [float(lo), float(offsets[first])],
                "gap_at_crossing": float(gaps[first])}
    if idx == len(offsets) - 1:
        # gap still shrinking at the end of the range: no crossing inside
        return {"crossing_offset": None,
                "bracket": [float(offsets[-1]), None],
                "gap_at_crossing": float(gaps[idx])}
    lo = offsets[idx - 1] if idx > 0 else offsets[0] * 0.5
    hi = offsets[idx + 1]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = gap_fn(x1), gap_fn(x2)
    best_t, best_g = (x1, f1) if f1 < f2 else (x2, f2)
    for _ in range(max_refine):
        if best_g < threshold or (b - a) <= refine_tol * max(1.0, b):
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = gap_fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = gap_fn(x2)
        best_t, best_g = (x1, f1) if f1 < f2 else (x2, f2)
    if best_g < threshold:
        return {"crossing_offset": float(best_t), "bracket": [float(a), float(b)],
                "gap_at_crossing": float(best_g)}
    return {"crossing_offset": None, "bracket": [float(a), float(b)],
            "gap_at_crossing": float(best_g)}


def _upper_bound_dims(total_rank, d, order) -> list[int]:
    return [total_rank * math.comb(n + d, d) for n in range(order + 1)]


def _point_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


# ---------------------------------------------------------------------------
# drivers

def _offline(config, need_rom=True):
    op = build_model(config)
    clusters = lowest_clusters(op, config.mu0, config.clusters, tol_cluster=config.tol_cluster,
                               dense_cutoff=config.dense_cutoff, seed=config.seed)
    t0 = time.perf_counter()
    basis = assemble_basis(op, config.mu0, clusters, config.order,
                           tol_rank=config.tol_rank, tol_solve=config.tol_solve)
    assembly_time = time.perf_counter() - t0
    model = None
    if need_rom:
        t0 = time.perf_counter()
        model = rom.project(op, basis)
        assembly_time += time.perf_counter() - t0
    return op, clusters, basis, model, assembly_time


def run_dims(config: ExperimentConfig) -> dict:
    _ensure_out(config)
    op, clusters, basis, _, assembly_time = _offline(config, need_rom=False)
    ub = _upper_bound_dims(clusters.total_rank, op.parameter_dim, config.order)
    rows = [(n, basis.dim_history[n], ub[n]) for n in range(config.order + 1)]
    csv_path = _csv_path(config)
    _write_csv(csv_path, ["n", "r", "ub"], rows)
    summary = {
        "experiment": "dims",
        "config": _config_echo(config),
        "csv": csv_path,
        "dims": list(basis.dim_history),
        "upper_bounds": ub,
        "multiplicities": list(clusters.multiplicities),
        "wall_time_assembly": assembly_time,
    }
    summary["summary_path"] = _write_summary(config, summary)
    return summary


def run_grid(config: ExperimentConfig) -> dict:
    if len(config.mu0) != 2:
        raise ValueError("grid scans require a two-dimensional parameter domain")
    _ensure_out(config)
    op, clusters, basis, model, assembly_time = _offline(config)
    orders = list(range(config.order + 1))
    submodels = [model.truncated(n) for n in orders]
    target_rank = clusters.total_rank

    axes = [np.linspace(m - config.grid_halfwidth, m + config.grid_halfwidth, config.grid_points)
            for m in config.mu0]
    points = [(i, j, np.array([axes[0][i], axes[1][j]]))
              for i in range(config.grid_points) for j in range(config.grid_points)]

    def eval_point(item):
        i, j, mu = item
        try:
            ref = reference_projector(op, mu, target_rank, dense_cutoff=config.dense_cutoff,
                                      seed=config.seed)
            cells = []
            for sub in submodels:
                sol = rom.solve_reduced(sub, mu)
                cells.append(rom.projector_error(sol, ref.factor))
                cells.append(rom.ritz_error(sol, ref.ritz_sum))
            return (mu[0], mu[1], ref.gap, int(ref.near_crossing), *cells, "")
        except Exception as exc:  # keep scanning; the row records the reason
            nan_cells = [float("nan")] * (2 * len(orders))
            return (mu[0], mu[1], float("nan"), 1, *nan_cells, f"{type(exc).__name__}: {exc}")

    t0 = time.perf_counter()
    rows = _pool_map(eval_point, points, config.workers)
    scan_time = time.perf_counter() - t0

    header = ["mu1", "mu2", "gap", "near_crossing"]
    for n in orders:
        header += [f"proj_error_n{n}", f"ritz_error_n{n}"]
    header.append("reason")
    csv_path = _csv_path(config)
    _write_csv(csv_path, header, rows)
    failures = sum(1 for row in rows if row[-1])
    summary = {
        "experiment": "grid",
        "config": _config_echo(config),
        "csv": csv_path,
        "dims": list(basis.dim_history),
        "n_points": len(points),
        "n_failures": failures,
        "wall_time_assembly": assembly_time,
        "wall_time_scan": scan_time,
    }
    summary["summary_path"] = _write_summary(config, summary)
    return summary


def _path_offsets(config) -> np.ndarray:
    return np.geomspace(config.path_offset_min, config.path_offset_max, config.path_count)


def run_path(config: ExperimentConfig) -> dict:
    _ensure_out(config)
    op, clusters, basis, model, assembly_time = _offline(config)
    orders = list(range(config.order + 1))
    submodels = [model.truncated(n) for n in orders]
    target_rank = clusters.total_rank
    direction = np.asarray(config.path_direction, dtype=float)
    mu0 = np.asarray(config.mu0, dtype=float)
    offsets = _path_offsets(config)

    def eval_point(item):
        idx, t = item
        mu = mu0 + t * direction
        try:
            ref = reference_projector(op, mu, target_rank, dense_cutoff=config.dense_cutoff,
                                      seed=config.seed)
            cells = []
            rng = _point_rng(config.seed, idx)
            for n, sub in zip(orders, submodels):
                sol = rom.solve_reduced(sub, mu)
                perr = rom.projector_error(sol, ref.factor)
                res = rom.residual(sub, mu, rng=rng)
                gamma = rom.discarded_gap(sol, ref.eigenvalues)
                proj_basis_err = rom.projection_error(sub.basis.factor, ref.factor)
                bound = rom.error_bound(res, gamma, proj_basis_err) if gamma > 0 else float("nan")
                cells += [perr, bound, rom.ritz_error(sol, ref.ritz_sum), perr ** 2]
            return (t, ref.gap, int(ref.near_crossing), *cells, "")
        except Exception as exc:
            nan_cells = [float("nan")] * (4 * len(orders))
            return (t, float("nan"), 1, *nan_cells, f"{type(exc).__name__}: {exc}")

    t0 = time.perf_counter()
    rows = _pool_map(eval_point, list(enumerate(offsets)), config.workers)
    scan_time = time.perf_counter() - t0

    header = ["offset", "gap", "near_crossing"]
    for n in orders:
        header += [f"proj_error_n{n}", f"cea_bound_n{n}", f"ritz_error_n{n}", f"sq_proj_error_n{n}"]
    header.append("reason")
    csv_path = _csv_path(config)
    _write_csv(csv_path, header, rows)

    gaps = np.array([row[1] for row in rows])

    def gap_fn(t):
        values = smallest_eigenvalues(op, mu0 + t * direction, target_rank + 1,
                                      dense_cutoff=config.dense_cutoff, seed=config.seed)
        return float(values[target_rank] - values[target_rank - 1])

    crossing = locate_crossing(gap_fn, offsets, gaps)
    fit_cut = crossing["crossing_offset"] if crossing["crossing_offset"] is not None else np.inf

    slopes = {"projector_error": [], "ritz_error": [], "cea_bound": []}
    for k, n in enumerate(orders):
        pre = offsets < fit_cut
        proj = np.array([row[3 + 4 * k] for row in rows])
        bound = np.array([row[4 + 4 * k] for row in rows])
        ritz = np.array([row[5 + 4 * k] for row in rows])
        slopes["projector_error"].append(fit_slope(offsets[pre], proj[pre], PROJECTOR_FIT_FLOOR))
        slopes["cea_bound"].append(fit_slope(offsets[pre], bound[pre], PROJECTOR_FIT_FLOOR))
        slopes["ritz_error"].append(fit_slope(offsets[pre], ritz[pre], RITZ_FIT_FLOOR))

    summary = {
        "experiment": "path",
        "config": _config_echo(config),
        "csv": csv_path,
        "dims": list(basis.dim_history),
        "crossing": crossing,
        "slopes": slopes,
        "wall_time_assembly": assembly_time,
        "wall_time_scan": scan_time,
    }
    summary["summary_path"] = _write_summary(config, summary)
    return summary


def run_compare_pt(config: ExperimentConfig) -> dict:
    _ensure_out(config)
    op = build_model(config)
    if op.dim > config.dense_cutoff:
        raise ValueError(
            f"the dense baseline needs dimension <= {config.dense_cutoff}, got {op.dim}"
        )
    clusters = lowest_clusters(op, config.mu0, config.clusters, tol_cluster=config.tol_cluster,
                               dense_cutoff=config.dense_cutoff, seed=config.seed)
    target_rank = clusters.total_rank
    orders = list(range(config.order + 1))

    t0 = time.perf_counter()
    basis = assemble_basis(op, config.mu0, clusters, config.order,
                           tol_rank=config.tol_rank, tol_solve=config.tol_solve)
    model = rom.project(op, basis)
    rbm_assembly = time.perf_counter() - t0
    submodels = [model.truncated(n) for n in orders]

    t0 = time.perf_counter()
    coefficient_sets = [
        projector_coefficients(op, config.mu0, cluster, config.order, dense_cap=config.dense_cutoff)
        for cluster in clusters.clusters
    ]
    pt_assembly = time.perf_counter() - t0

    # group the dense coefficients by grade so each order adds one increment
    by_grade = [[] for _ in orders]
    for coeff_set in coefficient_sets:
        for beta, matrix in coeff_set.coefficients.items():
            by_grade[sum(beta)].append((beta, matrix))

    mu0 = np.asarray(config.mu0, dtype=float)
    direction = np.asarray(config.path_direction, dtype=float)
    offsets = _path_offsets(config)

    rows = []
    gaps = []
    rbm_query = 0.0
    pt_query = 0.0
    for idx, t in enumerate(offsets):
        mu = mu0 + t * direction
        rng = _point_rng(config.seed, idx)
        ref = reference_projector(op, mu, target_rank, dense_cutoff=config.dense_cutoff,
                                  seed=config.seed)
        gaps.append(ref.gap)
        exact_dense = ref.factor.columns @ ref.factor.columns.conj().T
        offset_vec = mu - mu0
        partial = np.zeros_like(exact_dense)
        cells = []
        reason = ""
        for n in orders:
            tq = time.perf_counter()
            sol = rom.solve_reduced(submodels[n], mu)
            rbm_err = rom.projector_error(sol, ref.factor)
            rbm_sum = sol.ritz_sum
            res = rom.residual(submodels[n], mu, rng=rng)
            gamma = rom.discarded_gap(sol, ref.eigenvalues)
            proj_err = rom.projection_error(submodels[n].basis.factor, ref.factor)
            bound = rom.error_bound(res, gamma, proj_err) if gamma > 0 else float("nan")
            rbm_query += time.perf_counter() - tq

            tq = time.perf_counter()
            from .multiindex import monomial
            for beta, matrix in by_grade[n]:
                partial = partial + monomial(offset_vec, beta) * matrix
            try:
                fac = projector_approximation(partial, target_rank)
                pt_err = subspace_distance(fac, ref.factor)
                pt_sum = rom.ritz_sum_of_factor(op, mu, fac)
            except SeparationError as exc:
                pt_err, pt_sum = float("nan"), float("nan")
                reason = f"SeparationError: {exc}"
            diff = partial - exact_dense
            trunc = spectral_norm(lambda y: diff @ y, op.dim, tol=1e-8, rng=rng)
            pt_query += time.perf_counter() - tq
            cells += [rbm_err, pt_err, trunc, proj_err, bound, rbm_sum, pt_sum]
        rows.append((t, ref.gap, int(ref.near_crossing), *cells, reason))

    header = ["offset", "gap", "near_crossing"]
    for n in orders:
        header += [f"rbm_error_n{n}", f"pt_error_n{n}", f"truncation_error_n{n}",
                   f"projection_error_n{n}", f"cea_bound_n{n}", f"rbm_ritz_sum_n{n}",
                   f"pt_ritz_sum_n{n}"]
    header.append("reason")
    csv_path = _csv_path(config)
    _write_csv(csv_path, header, rows)

    def gap_fn(t):
        values = smallest_eigenvalues(op, mu0 + t * direction, target_rank + 1,
                                      dense_cutoff=config.dense_cutoff, seed=config.seed)
        return float(values[target_rank] - values[target_rank - 1])

    crossing = locate_crossing(gap_fn, offsets, np.array(gaps))
    fit_cut = crossing["crossing_offset"] if crossing["crossing_offset"] is not None else np.inf
    pre = offsets < fit_cut

    ncols = 7
    slopes = {"rbm_error": [], "pt_error": []}
    violations = {"pt_above_4x_truncation": 0, "rbm_above_bound": 0}
    for k, n in enumerate(orders):
        rbm = np.array([row[3 + ncols * k] for row in rows])
        pt = np.array([row[4 + ncols * k] for row in rows])
        trunc = np.array([row[5 + ncols * k] for row in rows])
        bound = np.array([row[7 + ncols * k] for row in rows])
        slopes["rbm_error"].append(fit_slope(offsets[pre], rbm[pre], PROJECTOR_FIT_FLOOR))
        slopes["pt_error"].append(fit_slope(offsets[pre], pt[pre], PROJECTOR_FIT_FLOOR))
        ok = pre & np.isfinite(pt) & np.isfinite(trunc)
        violations["pt_above_4x_truncation"] += int(np.sum(pt[ok] > 4.0 * trunc[ok] + 1e-14))
        okb = pre & np.isfinite(bound)
        violations["rbm_above_bound"] += int(np.sum(rbm[okb] > bound[okb] * (1 + 1e-9) + 1e-14))

    summary = {
        "experiment": "compare-pt",
        "config": _config_echo(config),
        "csv": csv_path,
        "dims": list(basis.dim_history),
        "crossing": crossing,
        "slopes": slopes,
        "violations": violations,
        "wall_times": {
            "rbm_assembly": rbm_assembly,
            "pt_assembly": pt_assembly,
            "rbm_query": rbm_query,
            "pt_query": pt_query,
            "rbm_total": rbm_assembly + rbm_query,
            "pt_total": pt_assembly + pt_query,
        },
    }
    summary["summary_path"] = _write_summary(config, summary)
    return summary
