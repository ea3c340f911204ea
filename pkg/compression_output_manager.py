import csv
import io
import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

from compression_errors import RasterWriteError
from compression_logger import logger

PathLike = Union[str, os.PathLike]


class OutputManager:
    """
    Manages:
      1) Report and container files written under the output directory.
      2) A status ledger CSV under the log directory (when one is configured).

    Status CSV rows:
      timestamp, item, status, details

    The ledger carries wall-clock timestamps, so it never goes to the output
    directory; everything written there is a pure function of the inputs.
    """

    def __init__(
        self,
        output_dir: PathLike,
        log_dir: Optional[PathLike] = None,
        status_file_name: str = "compression_status.csv",
        schema_version: int = 1,
    ):
        self.output_dir = Path(output_dir)
        self.log_dir = Path(log_dir) if log_dir else None
        self.status_file_name = status_file_name
        self.schema_version = schema_version

    # -----------------------------
    # Status CSV handling
    # -----------------------------
    def log_status(self, item: str, status: str, details: Optional[str] = None) -> None:
        logger.info(f"[STATUS] {item} -> {status} ({details})")
        if self.log_dir is None:
            return

        status_path = self.log_dir / self.status_file_name
        try:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            new_file = not status_path.exists()
            with status_path.open("a", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                if new_file:
                    writer.writerow(["timestamp", "item", "status", "details"])
                timestamp = datetime.now(timezone.utc).isoformat()
                writer.writerow([timestamp, item, status, details or ""])
        except OSError as e:
            # The ledger is best-effort; a failure here must not fail the run
            logger.error(f"Failed to append status for {item}: {e}")

    # -----------------------------
    # Output files
    # -----------------------------
    def path_for(self, name: str) -> Path:
        return self.output_dir / name

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.path_for(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "wb") as f:
                f.write(data)
        except OSError as e:
            raise RasterWriteError(f"Failed to write {path}: {e}") from e
        logger.info(f"Saved {path} ({len(data)} bytes)")
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_text(name, json_dumps(payload) + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        return self.write_text(name, csv_text(header, rows))


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
        return format_cell(value)
    return value


def json_dumps(payload: Any) -> str:
    return json.dumps(_json_safe(payload), indent=2, allow_nan=False)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return output.getvalue()


def format_cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value != value:
            return "nan"
        if value in (float("inf"), float("-inf")):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return value


def rows_from_dicts(records: List[dict], header: Sequence[str]) -> List[List[Any]]:
    return [[record.get(column) for column in header] for record in records]
