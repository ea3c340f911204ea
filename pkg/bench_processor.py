from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from clusterers import Algorithm, ClusterConfig
from compression_errors import ConfigError, DegenerateInputError, EmptyInputError, UndefinedTestError
from compression_logger import logger
from compression_output_manager import OutputManager, rows_from_dicts
from compression_utils import UtilityFunctions
from image_model import RasterImage, histogram, to_grayscale
from palette_codec import MAX_K, decode, encode, encode_with_palette
from quality_metrics import evaluate, format_psnr, rmse
from significance_stats import compare_algorithms, wilcoxon_signed_rank

COLOR_MODES = ("gray", "rgb")
SIGNIFICANCE_METRICS = ("rmse", "psnr", "ssim")

RUN_COLUMNS = [
    "schema_version", "image", "color_mode", "algorithm", "k", "run", "seed", "restarts",
    "status", "mse", "rmse", "psnr_db", "ssim", "ratio_eq1", "ratio_on_disk",
    "objective", "iterations", "converged", "note",
]
QUALITY_COLUMNS = [
    "schema_version", "image", "color_mode", "algorithm", "k", "n_runs",
    "median_rmse", "median_psnr_db", "median_ssim",
]
SIGNIFICANCE_COLUMNS = [
    "schema_version", "color_mode", "algorithm", "metric", "baseline", "n_runs",
    "baseline_median", "other_median", "p_value", "method", "defeated", "note",
]
CENTROID_COLUMNS = [
    "schema_version", "frame_index", "frame", "training", "algorithm", "k", "seed",
    "rmse_shared", "rmse_per_image", "note",
]


@dataclass(frozen=True)
class BenchPlan:
    images: Tuple[Path, ...]
    algorithms: Tuple[str, ...] = tuple(a.value for a in Algorithm)
    k_values: Tuple[int, ...] = (4, 8, 16, 32)
    runs: int = 30
    base_seed: int = 0
    restarts: int = 1
    color_modes: Tuple[str, ...] = COLOR_MODES
    baseline: str = Algorithm.KMEANSPP.value
    fuzzifier: float = 2.0
    tolerance: float = 1e-4
    max_iterations: int = 300
    workers: int = 1

    def __post_init__(self):
        if not self.images:
            raise EmptyInputError("Bench plan has an empty image set")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for k in self.k_values:
            if not 2 <= k <= MAX_K:
                raise ConfigError(f"K values must lie in [2, {MAX_K}], got {k}")
        for algorithm in self.algorithms:
            Algorithm.parse(algorithm)
        for mode in self.color_modes:
            if mode not in COLOR_MODES:
                raise ConfigError(f"Unknown color mode {mode!r}")
        if not self.algorithms or not self.k_values or not self.color_modes:
            raise ConfigError("Bench plan needs at least one algorithm, K value and color mode")

    def seed_for(self, run: int) -> int:
        # shared across algorithms so runs are paired
        return self.base_seed + run

    def cluster_config(self, algorithm: str, k: int, run: int) -> ClusterConfig:
        return ClusterConfig(
            algorithm=algorithm,
            k=k,
            fuzzifier=self.fuzzifier,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            seed=self.seed_for(run),
            restarts=self.restarts,
        )


@dataclass(frozen=True)
class BenchCell:
    image: str
    color_mode: str
    algorithm: str
    k: int
    run: int


def color_variant(image: RasterImage, mode: str) -> Optional[RasterImage]:
    """The image as seen in a color mode; None when the mode does not apply."""
    if mode == "gray":
        return image if image.channels == 1 else to_grayscale(image)
    return image if image.channels == 3 else None


def run_cell(image: Optional[RasterImage], cell: BenchCell, plan: BenchPlan,
             schema_version: int = 1) -> Dict[str, Any]:
    config = plan.cluster_config(cell.algorithm, cell.k, cell.run)
    row: Dict[str, Any] = {
        "schema_version": schema_version,
        "image": cell.image,
        "color_mode": cell.color_mode,
        "algorithm": cell.algorithm,
        "k": cell.k,
        "run": cell.run,
        "seed": config.seed,
        "restarts": config.restarts,
        "status": "ok",
        "note": "",
    }
    if image is None:
        row.update(status="skipped", note="grayscale source has no rgb variant")
        return row

    try:
        compressed = encode(image, config)
    except DegenerateInputError as e:
        logger.warning(f"[bench] {cell}: {e}")
        row.update(status="skipped", note=str(e))
        return row

    report = evaluate(image, decode(compressed), compressed)
    row.update(report.to_dict(schema_version))
    outcome = compressed.outcome
    row.update(objective=outcome.objective, iterations=outcome.iterations, converged=outcome.converged)
    return row


def _median(values: List[float]) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


def _psnr_value(row: Dict[str, Any]) -> float:
    value = row["psnr_db"]
    return float("inf") if value == "inf" else float(value)


class BenchProcessor:
    """
    Runs the evaluation matrix (image x color mode x algorithm x K x run)
    and the centroid-sharing and tonal-distribution studies, writing
    CSV/JSON reports through an OutputManager.
    """

    def __init__(self, output_manager: OutputManager, utils: Optional[UtilityFunctions] = None):
        self.output_manager = output_manager
        self.utils = utils or UtilityFunctions()
        self.schema_version = output_manager.schema_version

    # ---------------------------------------------------------
    # Matrix
    # ---------------------------------------------------------
    def _variants(self, plan: BenchPlan) -> Dict[Tuple[str, str], Optional[RasterImage]]:
        variants: Dict[Tuple[str, str], Optional[RasterImage]] = {}
        for path in plan.images:
            image = self.utils.read_raster(path)
            for mode in plan.color_modes:
                variants[(path.name, mode)] = color_variant(image, mode)
        return variants

    def run_matrix(self, plan: BenchPlan) -> List[Dict[str, Any]]:
        variants = self._variants(plan)
        cells = [
            BenchCell(image=path.name, color_mode=mode, algorithm=algorithm, k=k, run=run)
            for path in plan.images
            for mode in plan.color_modes
            for algorithm in plan.algorithms
            for k in plan.k_values
            for run in range(plan.runs)
        ]
        logger.info(f"[bench] running {len(cells)} cell(s) on {plan.workers} worker(s)")

        def job(cell: BenchCell) -> Dict[str, Any]:
            return run_cell(variants[(cell.image, cell.color_mode)], cell, plan, self.schema_version)

        if plan.workers > 1:
            with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                rows = list(pool.map(job, cells))
        else:
            rows = [job(cell) for cell in cells]

        return rows

    def quality_vs_k(self, rows: List[Dict[str, Any]], plan: BenchPlan) -> List[Dict[str, Any]]:
        grouped: Dict[Tuple[str, str, str, int], List[Dict[str, Any]]] = {}
        for row in rows:
            if row["status"] != "ok":
                continue
            key = (row["image"], row["color_mode"], row["algorithm"], row["k"])
            grouped.setdefault(key, []).append(row)

        table = []
        for (image, mode, algorithm, k), group in grouped.items():
            table.append({
                "schema_version": self.schema_version,
                "image": image,
                "color_mode": mode,
                "algorithm": algorithm,
                "k": k,
                "n_runs": len(group),
                "median_rmse": _median([r["rmse"] for r in group]),
                "median_psnr_db": format_psnr(_median([_psnr_value(r) for r in group])),
                "median_ssim": _median([r["ssim"] for r in group]),
            })
        return table

    def significance(self, rows: List[Dict[str, Any]], plan: BenchPlan) -> List[Dict[str, Any]]:
        """
        Baseline vs each other algorithm per color mode, pairing runs on
        (image, K, run) keys that every algorithm completed.
        """
        if plan.baseline not in plan.algorithms or len(plan.algorithms) < 2:
            logger.info("[bench] significance table skipped: needs the baseline plus another algorithm")
            return []

        table = []
        for mode in plan.color_modes:
            by_algorithm: Dict[str, Dict[Tuple[str, int, int], Dict[str, Any]]] = {
                a: {} for a in plan.algorithms
            }
            for row in rows:
                if row["color_mode"] == mode and row["status"] == "ok":
                    by_algorithm[row["algorithm"]][(row["image"], row["k"], row["run"])] = row

            shared = sorted(set.intersection(*(set(v) for v in by_algorithm.values())))
            if not shared:
                logger.warning(f"[bench] no paired {mode} cells; significance skipped")
                continue

            runs = {
                algorithm: {
                    "rmse": [cells[key]["rmse"] for key in shared],
                    "psnr": [_psnr_value(cells[key]) for key in shared],
                    "ssim": [cells[key]["ssim"] for key in shared],
                }
                for algorithm, cells in by_algorithm.items()
            }
            try:
                result = compare_algorithms(runs, plan.baseline, SIGNIFICANCE_METRICS)
            except UndefinedTestError as e:
                logger.warning(f"[bench] {mode} significance skipped: {e}")
                continue

            for cell in result:
                record = cell.to_dict()
                record["schema_version"] = self.schema_version
                record["color_mode"] = mode
                table.append(record)
        return table

    @staticmethod
    def significance_layout(table: List[Dict[str, Any]]) -> Dict[str, Any]:
        """rows = algorithms; columns = metric x {p_value, defeated, method} x color mode."""
        layout: Dict[str, Any] = {}
        for record in table:
            metric_block = layout.setdefault(record["algorithm"], {}).setdefault(record["metric"], {})
            metric_block[record["color_mode"]] = {
                "p_value": record["p_value"],
                "defeated": record["defeated"],
                "method": record["method"],
            }
        return layout

    def run(self, plan: BenchPlan) -> Dict[str, Any]:
        rows = self.run_matrix(plan)
        quality = self.quality_vs_k(rows, plan)
        significance = self.significance(rows, plan)

        om = self.output_manager
        om.write_csv("bench_runs.csv", RUN_COLUMNS, rows_from_dicts(rows, RUN_COLUMNS))
        om.write_csv("bench_quality_vs_k.csv", QUALITY_COLUMNS, rows_from_dicts(quality, QUALITY_COLUMNS))
        if significance:
            om.write_csv("bench_significance.csv", SIGNIFICANCE_COLUMNS,
                         rows_from_dicts(significance, SIGNIFICANCE_COLUMNS))

        summary = {
            "schema_version": self.schema_version,
            "images": [str(p) for p in plan.images],
            "algorithms": list(plan.algorithms),
            "k_values": list(plan.k_values),
            "runs": plan.runs,
            "base_seed": plan.base_seed,
            "restarts": plan.restarts,
            "color_modes": list(plan.color_modes),
            "baseline": plan.baseline,
            "cells": len(rows),
            "skipped": sum(1 for r in rows if r["status"] != "ok"),
            "significance": self.significance_layout(significance),
        }
        om.write_json("bench_summary.json", summary)
        om.log_status("bench", "SUCCESS", f"{len(rows)} cells")
        return summary

    # ---------------------------------------------------------
    # Shared vs per-image centroids
    # ---------------------------------------------------------
    def centroid_study(self, frames: List[RasterImage], labels: List[str],
                       config: ClusterConfig, train_index: int = 0) -> List[Dict[str, Any]]:
        if not frames:
            raise EmptyInputError("Centroid study needs at least one frame")
        if not 0 <= train_index < len(frames):
            raise ConfigError(f"train frame {train_index} outside [0, {len(frames)})")

        training = encode(frames[train_index], config)
        logger.info(f"[bench] centroid study: training on frame {train_index} ({labels[train_index]})")

        records = []
        for i, (frame, label) in enumerate(zip(frames, labels)):
            record = {
                "schema_version": self.schema_version,
                "frame_index": i,
                "frame": label,
                "training": i == train_index,
                "algorithm": config.algorithm.value,
                "k": config.k,
                "seed": config.seed,
                "rmse_shared": None,
                "rmse_per_image": None,
                "note": "",
            }
            shared = encode_with_palette(frame, training.centroids)
            record["rmse_shared"] = rmse(frame, decode(shared))
            try:
                own = training if i == train_index else encode(frame, config)
                record["rmse_per_image"] = rmse(frame, decode(own))
            except DegenerateInputError as e:
                record["note"] = str(e)
            records.append(record)
        return records

    def run_centroid_study(self, frame_dir: Path, config: ClusterConfig,
                           train_index: int = 0, gray: bool = False) -> List[Dict[str, Any]]:
        paths = self.utils.get_frames_to_process(frame_dir)
        frames = [self.utils.read_raster(p) for p in paths]
        if gray:
            frames = [color_variant(f, "gray") for f in frames]
        records = self.centroid_study(frames, [p.name for p in paths], config, train_index)
        self.output_manager.write_csv("centroid_study.csv", CENTROID_COLUMNS,
                                      rows_from_dicts(records, CENTROID_COLUMNS))
        return records

    # ---------------------------------------------------------
    # Tonal distribution: histogram plus K-Means vs fuzzy C-Means
    # ---------------------------------------------------------
    def tonal_study(self, image: RasterImage, plan: BenchPlan, k: int) -> Dict[str, Any]:
        algorithms = (Algorithm.KMEANS.value, Algorithm.FCM.value)
        per_algorithm: Dict[str, List[float]] = {a: [] for a in algorithms}
        run_rows = []
        for run in range(plan.runs):
            for algorithm in algorithms:
                config = plan.cluster_config(algorithm, k, run)
                compressed = encode(image, config)
                value = rmse(image, decode(compressed))
                per_algorithm[algorithm].append(value)
                run_rows.append([self.schema_version, algorithm, k, run, config.seed, value])

        summary: Dict[str, Any] = {
            "schema_version": self.schema_version,
            "k": k,
            "runs": plan.runs,
            "median_rmse": {a: _median(v) for a, v in per_algorithm.items()},
            "p_value": None,
            "method": None,
        }
        try:
            result = wilcoxon_signed_rank(per_algorithm[algorithms[0]], per_algorithm[algorithms[1]])
            summary["p_value"] = result.p_value
            summary["method"] = result.method
        except UndefinedTestError as e:
            summary["note"] = str(e)

        hist = histogram(image)
        channel_names = ["gray"] if image.channels == 1 else ["r", "g", "b"]
        om = self.output_manager
        om.write_csv("tonal_histogram.csv", ["value"] + channel_names,
                     [[v] + [int(hist.bins[c][v]) for c in range(hist.channels)] for v in range(256)])
        om.write_csv("tonal_runs.csv", ["schema_version", "algorithm", "k", "run", "seed", "rmse"], run_rows)
        om.write_json("tonal_summary.json", summary)
        return summary
