"""
Command-line entry point for the IEC palette-compression toolkit.

    python main.py compress IMAGE OUT.iecc --k 16 --algo kmeanspp
    python main.py decompress OUT.iecc RESTORED.png
    python main.py metrics ORIGINAL.png RESTORED.png
    python main.py histogram IMAGE hist.csv
    python main.py iec-sim FRAME_DIR --threshold 0.95 --metric ssim --output out/
    python main.py bench --images imgs/ --runs 30 --output out/

Global flags (accepted before or after the subcommand): --config, --log-level,
--seed, --output (report directory for bench / iec-sim), --format {json,csv}.

Exit codes:

    0  ok
    1  internal error (unexpected exception)
    2  usage error: bad flags, K outside [1, 256], invalid config values
    3  input error: unreadable raster, missing path, empty frame dir or image set
    4  input error: fewer distinct colors than K
    5  input error: malformed container
    6  input error: unsupported container version
    7  input error: shape mismatch between images or frames
    8  internal error: output could not be written
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from bench_processor import COLOR_MODES, BenchPlan, BenchProcessor, color_variant
from clusterers import Algorithm
from compression_config_loader import ConfigLoader
from compression_errors import (
    ConfigError,
    DegenerateInputError,
    EmptyInputError,
    InvalidImageError,
    MalformedContainerError,
    RasterReadError,
    RasterWriteError,
    ShapeMismatchError,
    UnsupportedVersionError,
)
from compression_logger import configure_logging, logger
from compression_output_manager import OutputManager, csv_text, json_dumps
from compression_utils import UtilityFunctions
from iec_processor import SIMILARITY_METRICS, IecConfig, run_stream
from image_model import histogram, to_grayscale
from palette_codec import MAX_K, decode, deserialize, encode, serialize
from quality_metrics import evaluate

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DEGENERATE = 4
EXIT_MALFORMED = 5
EXIT_VERSION = 6
EXIT_SHAPE = 7
EXIT_WRITE = 8

# Checked in order: subclasses before their bases
EXIT_CODES = [
    (UnsupportedVersionError, EXIT_VERSION),
    (MalformedContainerError, EXIT_MALFORMED),
    (DegenerateInputError, EXIT_DEGENERATE),
    (ShapeMismatchError, EXIT_SHAPE),
    (RasterWriteError, EXIT_WRITE),
    (RasterReadError, EXIT_INPUT),
    (EmptyInputError, EXIT_INPUT),
    (InvalidImageError, EXIT_INPUT),
    (FileNotFoundError, EXIT_INPUT),
    (ConfigError, EXIT_USAGE),
    (OSError, EXIT_WRITE),
]

ALGORITHM_CHOICES = [a.value for a in Algorithm]
DEFAULT_OUTPUT_DIR = "output"


def exit_code_for(error: BaseException) -> int:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return EXIT_INTERNAL


@dataclass
class CliContext:
    cfg: ConfigLoader
    utils: UtilityFunctions
    output_manager: OutputManager
    fmt: str

    def manager_for(self, path: Path) -> OutputManager:
        """OutputManager rooted at the parent of a single output file."""
        return OutputManager(path.parent, log_dir=self.output_manager.log_dir,
                             schema_version=self.output_manager.schema_version)

    def emit(self, record: Dict[str, Any]) -> None:
        if self.fmt == "csv":
            sys.stdout.write(csv_text(list(record.keys()), [list(record.values())]))
        else:
            sys.stdout.write(json_dumps(record) + "\n")


# ---------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------
def k_value(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"K must be an integer, got {text!r}")
    if not 1 <= k <= MAX_K:
        raise argparse.ArgumentTypeError(f"K must be in [1, {MAX_K}], got {k}")
    return k


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a value >= 1, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {value}")
    return value


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subparsers use SUPPRESS so a flag given before the subcommand is not reset
    default = argparse.SUPPRESS if suppress else None
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="path to a JSON config file")
    common.add_argument("--log-level", default=default, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--seed", type=non_negative_int, default=default, help="clustering seed")
    common.add_argument("--output", default=default, help="report directory for bench and iec-sim")
    common.add_argument("--format", choices=["json", "csv"], default=default,
                        help="format of reports printed to stdout")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iec-compress",
        description="Palette-quantization image compression with change-gated transmission.",
        parents=[_global_flags(suppress=False)],
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    common = _global_flags(suppress=True)

    compress = subparsers.add_parser("compress", parents=[common], help="encode a raster into an IECC container")
    compress.add_argument("input")
    compress.add_argument("destination")
    compress.add_argument("--k", type=k_value, default=None)
    compress.add_argument("--algo", choices=ALGORITHM_CHOICES, default=None)
    compress.add_argument("--restarts", type=positive_int, default=None)
    compress.add_argument("--gray", action="store_true", help="convert RGB input to grayscale first")
    compress.set_defaults(handler=cmd_compress)

    decompress = subparsers.add_parser("decompress", parents=[common], help="decode an IECC container to PNG")
    decompress.add_argument("input")
    decompress.add_argument("destination")
    decompress.set_defaults(handler=cmd_decompress)

    metrics = subparsers.add_parser("metrics", parents=[common], help="MSE, RMSE, PSNR and SSIM of two rasters")
    metrics.add_argument("original")
    metrics.add_argument("reconstructed")
    metrics.set_defaults(handler=cmd_metrics)

    hist = subparsers.add_parser("histogram", parents=[common], help="256-bin per-channel histogram as CSV")
    hist.add_argument("input")
    hist.add_argument("destination")
    hist.set_defaults(handler=cmd_histogram)

    iec = subparsers.add_parser("iec-sim", parents=[common], help="simulate change-gated frame transmission")
    iec.add_argument("frame_dir")
    iec.add_argument("--threshold", type=float, default=None)
    iec.add_argument("--metric", choices=sorted(SIMILARITY_METRICS), default=None)
    iec.add_argument("--k", type=k_value, default=None)
    iec.add_argument("--algo", choices=ALGORITHM_CHOICES, default=None)
    iec.add_argument("--restarts", type=positive_int, default=None)
    iec.set_defaults(handler=cmd_iec_sim)

    bench = subparsers.add_parser("bench", parents=[common], help="run the evaluation matrix and studies")
    bench.add_argument("--images", nargs="+", default=None, help="image files or directories")
    bench.add_argument("--algorithms", nargs="+", choices=ALGORITHM_CHOICES, default=None)
    bench.add_argument("--k-values", nargs="+", type=k_value, default=None)
    bench.add_argument("--runs", type=positive_int, default=None)
    bench.add_argument("--base-seed", type=non_negative_int, default=None)
    bench.add_argument("--restarts", type=positive_int, default=None)
    bench.add_argument("--color-modes", nargs="+", choices=list(COLOR_MODES), default=None)
    bench.add_argument("--baseline", choices=ALGORITHM_CHOICES, default=None)
    bench.add_argument("--workers", type=positive_int, default=None)
    bench.add_argument("--centroid-study", default=None, metavar="FRAME_DIR",
                       help="compare shared and per-image centroids over a frame directory")
    bench.add_argument("--train-frame", type=non_negative_int, default=0,
                       help="index of the frame the shared centroids are trained on")
    bench.add_argument("--tonal-study", default=None, metavar="IMAGE",
                       help="histogram plus K-Means vs fuzzy C-Means RMSE on one image")
    bench.add_argument("--study-k", type=k_value, default=None, help="K for the centroid and tonal studies")
    bench.add_argument("--study-algo", choices=ALGORITHM_CHOICES, default=None,
                       help="algorithm for the centroid study")
    bench.add_argument("--gray", action="store_true", help="run the studies on grayscale variants")
    bench.set_defaults(handler=cmd_bench)

    return parser


# ---------------------------------------------------------
# Subcommands
# ---------------------------------------------------------
def cmd_compress(args: argparse.Namespace, ctx: CliContext) -> int:
    image = ctx.utils.read_raster(args.input)
    if args.gray and image.channels == 3:
        image = to_grayscale(image)

    config = ctx.cfg.cluster_config(algorithm=args.algo, k=args.k, seed=args.seed, restarts=args.restarts)
    data = serialize(encode(image, config))

    destination = Path(args.destination)
    ctx.manager_for(destination).write_bytes(destination.name, data)

    restored = deserialize(data)
    report = evaluate(image, decode(restored), restored)
    record = report.to_dict(ctx.output_manager.schema_version)
    record.update(algorithm=config.algorithm.value, k=config.k, seed=config.seed,
                  restarts=config.restarts, color_mode=image.color_mode, container_bytes=len(data))
    ctx.emit(record)
    ctx.output_manager.log_status(args.input, "SUCCESS", f"Output: {destination}")
    return EXIT_OK


def cmd_decompress(args: argparse.Namespace, ctx: CliContext) -> int:
    source = Path(args.input)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise RasterReadError(f"Cannot read container {source}: {e}") from e

    image = decode(deserialize(data))
    ctx.utils.write_raster(image, args.destination)
    ctx.output_manager.log_status(args.input, "SUCCESS", f"Output: {args.destination}")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, ctx: CliContext) -> int:
    original = ctx.utils.read_raster(args.original)
    reconstructed = ctx.utils.read_raster(args.reconstructed)
    report = evaluate(original, reconstructed)
    ctx.emit(report.to_dict(ctx.output_manager.schema_version))
    return EXIT_OK


def cmd_histogram(args: argparse.Namespace, ctx: CliContext) -> int:
    image = ctx.utils.read_raster(args.input)
    hist = histogram(image)
    columns = ["value"] + (["gray"] if image.channels == 1 else ["r", "g", "b"])
    rows = [[value] + [int(hist.bins[c][value]) for c in range(hist.channels)] for value in range(256)]

    destination = Path(args.destination)
    ctx.manager_for(destination).write_csv(destination.name, columns, rows)
    ctx.output_manager.log_status(args.input, "SUCCESS", f"Output: {destination}")
    return EXIT_OK


def cmd_iec_sim(args: argparse.Namespace, ctx: CliContext) -> int:
    paths = ctx.utils.get_frames_to_process(args.frame_dir)
    cluster_config = ctx.cfg.cluster_config(algorithm=args.algo, k=args.k, seed=args.seed,
                                            restarts=args.restarts)
    config = IecConfig(
        threshold=args.threshold if args.threshold is not None else float(ctx.cfg.iec["threshold"]),
        metric=args.metric or ctx.cfg.iec["metric"],
        cluster_config=cluster_config,
    )
    om = ctx.output_manager
    labels = [p.name for p in paths]

    def save_container(decision) -> None:
        # one container per frame file, extension kept
        om.write_bytes(f"{decision.label}.iecc", serialize(decision.compressed))

    # Frames are read lazily so a stream never has to fit in memory
    frames = (ctx.utils.read_raster(p) for p in paths)
    report = run_stream(frames, config, labels=labels, on_send=save_container)

    payload = report.to_dict(om.schema_version)
    om.write_json("iec_report.json", payload)
    om.log_status(args.frame_dir, "SUCCESS", f"sent {report.frames_sent}/{report.frames_seen}")

    summary = {key: value for key, value in payload.items() if key != "decisions"}
    ctx.emit(summary)
    return EXIT_OK


def _bench_plan(args: argparse.Namespace, ctx: CliContext, images: Sequence[Path]) -> BenchPlan:
    bench = ctx.cfg.bench
    clustering = ctx.cfg.clustering

    def pick(flag, key):
        return flag if flag is not None else bench[key]

    base_seed = args.base_seed
    if base_seed is None:
        base_seed = args.seed if args.seed is not None else bench["base_seed"]

    return BenchPlan(
        images=tuple(images),
        algorithms=tuple(pick(args.algorithms, "algorithms")),
        k_values=tuple(int(k) for k in pick(args.k_values, "k_values")),
        runs=int(pick(args.runs, "runs")),
        base_seed=int(base_seed),
        restarts=int(pick(args.restarts, "restarts")),
        color_modes=tuple(pick(args.color_modes, "color_modes")),
        baseline=pick(args.baseline, "baseline"),
        fuzzifier=float(clustering["fuzzifier"]),
        tolerance=float(clustering["tolerance"]),
        max_iterations=int(clustering["max_iterations"]),
        workers=int(pick(args.workers, "workers")),
    )


def cmd_bench(args: argparse.Namespace, ctx: CliContext) -> int:
    if not (args.images or args.centroid_study or args.tonal_study):
        raise ConfigError("bench needs --images, --centroid-study or --tonal-study")

    processor = BenchProcessor(ctx.output_manager, ctx.utils)
    images: List[Path] = ctx.utils.collect_images(args.images) if args.images else []
    # Studies without a matrix still need a valid plan for their run schedule
    plan = _bench_plan(args, ctx, images or [Path(args.tonal_study or args.centroid_study)])
    result: Dict[str, Any] = {"schema_version": ctx.output_manager.schema_version}

    if images:
        summary = processor.run(plan)
        result.update(cells=summary["cells"], skipped=summary["skipped"])

    study_k = args.study_k or int(ctx.cfg.clustering["k"])
    if args.centroid_study:
        config = ctx.cfg.cluster_config(algorithm=args.study_algo, k=study_k, seed=plan.base_seed,
                                        restarts=plan.restarts)
        records = processor.run_centroid_study(Path(args.centroid_study), config,
                                               train_index=args.train_frame, gray=args.gray)
        result["centroid_study_frames"] = len(records)

    if args.tonal_study:
        image = ctx.utils.read_raster(args.tonal_study)
        if args.gray:
            image = color_variant(image, "gray")
        tonal = processor.tonal_study(image, plan, study_k)
        result["tonal_p_value"] = tonal["p_value"]

    ctx.emit(result)
    return EXIT_OK


# ---------------------------------------------------------
# Entry point
# ---------------------------------------------------------
def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        cfg = ConfigLoader.get_instance(args.config)
    except (FileNotFoundError, ConfigError) as e:
        logger.error(f"Cannot load config: {e}")
        return EXIT_USAGE

    configure_logging(args.log_level or cfg.log_level, cfg.log_dir)
    ctx = CliContext(
        cfg=cfg,
        utils=UtilityFunctions(),
        output_manager=OutputManager(args.output or DEFAULT_OUTPUT_DIR, log_dir=cfg.log_dir,
                                     schema_version=cfg.schema_version),
        fmt=args.format or "json",
    )

    logger.info(f"Starting {args.command}.")
    try:
        code = args.handler(args, ctx)
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"Unexpected error in {args.command}: {e}")
        else:
            logger.error(f"{args.command} failed: {e}")
        ctx.output_manager.log_status(args.command, "FAILED", str(e))
        return code

    logger.info(f"************* END of {args.command} ******************")
    return code


if __name__ == "__main__":
    sys.exit(main())
