from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterable, List, Optional

from clusterers import ClusterConfig
from compression_errors import ConfigError, EmptyInputError, ShapeMismatchError
from compression_logger import logger
from image_model import RasterImage, distinct_colors
from palette_codec import CompressedImage, encode, serialize
from quality_metrics import one_minus_nrmse, ssim

SIMILARITY_METRICS: Dict[str, Callable[[RasterImage, RasterImage], float]] = {
    "ssim": ssim,
    "one_minus_nrmse": one_minus_nrmse,
}


@dataclass(frozen=True)
class IecConfig:
    threshold: float = 0.95
    metric: str = "ssim"
    cluster_config: ClusterConfig = field(default_factory=ClusterConfig)

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.metric not in SIMILARITY_METRICS:
            raise ConfigError(
                f"Unknown similarity metric {self.metric!r}; "
                f"expected one of {', '.join(SIMILARITY_METRICS)}"
            )


@dataclass
class TransmissionDecision:
    """Skip (compressed is None) or Send; similarity is None for the first frame."""
    frame_index: int
    similarity: Optional[float]
    compressed: Optional[CompressedImage] = field(default=None, repr=False)
    payload_bytes: int = 0
    label: str = ""

    @property
    def sent(self) -> bool:
        return self.compressed is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frame_index": self.frame_index,
            "frame": self.label,
            "similarity": self.similarity,
            "sent": self.sent,
            "container_bytes": self.payload_bytes,
        }


class IecSession:
    """
    Change-gated transmitter state: the last transmitted frame plus counters.

    Single writer: frames must be stepped in capture order.
    """

    def __init__(self, config: IecConfig):
        self.config = config
        self.stored_image: Optional[RasterImage] = None
        self.frames_seen = 0
        self.frames_sent = 0
        self.frames_skipped = 0
        self.bytes_sent = 0
        self.bytes_baseline = 0
        self._similarity = SIMILARITY_METRICS[config.metric]

    def _encode(self, new_image: RasterImage, index: int) -> CompressedImage:
        config = self.config.cluster_config
        n_colors = distinct_colors(new_image)
        if n_colors < config.k:
            # A frame with fewer colors than K is stored losslessly with K = its color count
            logger.warning(f"[iec] frame {index}: {n_colors} distinct color(s) < K={config.k}; "
                           f"encoding with K={n_colors}")
            config = replace(config, k=n_colors)
        return encode(new_image, config)

    def step(self, new_image: RasterImage, label: str = "") -> TransmissionDecision:
        if self.stored_image is not None and new_image.shape != self.stored_image.shape:
            raise ShapeMismatchError(
                f"Frame {self.frames_seen} ({label or 'unnamed'}) is "
                f"{new_image.width}x{new_image.height}x{new_image.channels}, reference is "
                f"{self.stored_image.width}x{self.stored_image.height}x{self.stored_image.channels}"
            )

        index = self.frames_seen
        similarity = None
        if self.stored_image is not None:
            similarity = self._similarity(self.stored_image, new_image)
            if similarity >= self.config.threshold:
                self._count(new_image)
                self.frames_skipped += 1
                logger.info(f"[iec] frame {index}: similarity={similarity:.4f} -> skip")
                return TransmissionDecision(frame_index=index, similarity=similarity, label=label)

        compressed = self._encode(new_image, index)
        payload = len(serialize(compressed))
        # Counters move only once the decision is complete
        self._count(new_image)
        self.frames_sent += 1
        self.bytes_sent += payload
        self.stored_image = new_image

        shown = "n/a" if similarity is None else f"{similarity:.4f}"
        logger.info(f"[iec] frame {index}: similarity={shown} -> send ({payload} bytes)")
        return TransmissionDecision(frame_index=index, similarity=similarity,
                                    compressed=compressed, payload_bytes=payload, label=label)

    def _count(self, new_image: RasterImage) -> None:
        self.frames_seen += 1
        self.bytes_baseline += new_image.raw_size

    @property
    def savings(self) -> float:
        if self.bytes_baseline == 0:
            return 0.0
        return 1.0 - self.bytes_sent / self.bytes_baseline


def step(session: IecSession, new_image: RasterImage) -> TransmissionDecision:
    return session.step(new_image)


@dataclass
class IecReport:
    config: IecConfig
    decisions: List[TransmissionDecision]
    frames_seen: int
    frames_sent: int
    frames_skipped: int
    bytes_sent: int
    bytes_baseline: int
    savings: float

    def to_dict(self, schema_version: int = 1) -> Dict[str, Any]:
        cc = self.config.cluster_config
        return {
            "schema_version": schema_version,
            "threshold": self.config.threshold,
            "metric": self.config.metric,
            "algorithm": cc.algorithm.value,
            "k": cc.k,
            "seed": cc.seed,
            "restarts": cc.restarts,
            "frames_seen": self.frames_seen,
            "frames_sent": self.frames_sent,
            "frames_skipped": self.frames_skipped,
            "bytes_sent": self.bytes_sent,
            "bytes_baseline": self.bytes_baseline,
            "savings": self.savings,
            "decisions": [d.to_dict() for d in self.decisions],
        }


def run_stream(frames: Iterable[RasterImage], config: IecConfig,
               labels: Optional[List[str]] = None,
               on_send: Optional[Callable[[TransmissionDecision], None]] = None) -> IecReport:
    """
    Fold step() over the frames in order. `on_send` is called for every
    transmitted frame (the CLI uses it to write the container).
    """
    session = IecSession(config)
    decisions: List[TransmissionDecision] = []

    for i, frame in enumerate(frames):
        label = labels[i] if labels is not None else ""
        decision = session.step(frame, label=label)
        decisions.append(decision)
        if decision.sent and on_send is not None:
            on_send(decision)

    if not decisions:
        raise EmptyInputError("run_stream needs at least one frame")

    logger.info(
        f"[iec] stream done: sent {session.frames_sent}/{session.frames_seen} frames, "
        f"savings={session.savings:.4f}"
    )
    return IecReport(
        config=config,
        decisions=decisions,
        frames_seen=session.frames_seen,
        frames_sent=session.frames_sent,
        frames_skipped=session.frames_skipped,
        bytes_sent=session.bytes_sent,
        bytes_baseline=session.bytes_baseline,
        savings=session.savings,
    )
