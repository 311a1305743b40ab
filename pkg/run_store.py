#!/usr/bin/env python3
"""
Run Store - Persistent artifacts for one experiment run
Handles run state, metrics history, coefficient snapshots and model files
"""

import csv
import fcntl
import io
import json
import os
import tempfile
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

RUN_FILE = "run.json"
METRICS_FILE = "metrics.csv"
COEFFICIENTS_FILE = "coefficients.json"
MODEL_FILE = "model.npz"
CURVES_FILE = "curves.csv"

METRICS_HEADER = ["epoch", "train_loss", "train_acc", "test_acc", "seconds"]


@contextmanager
def atomic_write(target_file: Path) -> Iterator[Path]:
    """Yield a temp path in the target's directory; move it into place on success"""
    temp_file = None
    try:
        # Same directory so the final replace is atomic
        temp_fd, temp_path = tempfile.mkstemp(
            suffix=".tmp", prefix=f".{target_file.name}.", dir=target_file.parent
        )
        os.close(temp_fd)
        temp_file = Path(temp_path)
        yield temp_file
        temp_file.replace(target_file)
        temp_file = None
    finally:
        if temp_file and temp_file.exists():
            try:
                temp_file.unlink()
            except OSError:
                pass


def format_number(value: float) -> str:
    """Shortest text that round-trips the float exactly"""
    return repr(float(value))


class RunStore:
    # Maximum run.json size (1MB); larger files are treated as corrupt
    MAX_JSON_SIZE = 1024 * 1024

    REQUIRED_RUN_KEYS = {"run_id", "status", "config", "created_at", "updated_at"}
    VALID_STATUSES = {"running", "completed", "diverged", "failed"}

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._metrics: List[List[str]] = []
        self._snapshots: List[Dict[str, Any]] = []

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _validate_json_size(self, file_path: Path) -> bool:
        try:
            return file_path.stat().st_size <= self.MAX_JSON_SIZE
        except OSError:
            return False

    def _validate_run_data(self, data: Any) -> bool:
        if not isinstance(data, dict):
            return False
        if not self.REQUIRED_RUN_KEYS.issubset(data.keys()):
            return False
        if data.get("status") not in self.VALID_STATUSES:
            return False
        if not isinstance(data.get("config"), dict):
            return False
        if "progress_log" in data and not isinstance(data["progress_log"], list):
            return False
        return True

    def _safe_load_run(self) -> Optional[Dict[str, Any]]:
        run_file = self.path(RUN_FILE)
        if not self._validate_json_size(run_file):
            return None
        try:
            with open(run_file, "r") as f:
                data = json.load(f)
            return data if self._validate_run_data(data) else None
        except (json.JSONDecodeError, OSError, UnicodeDecodeError):
            return None

    @contextmanager
    def _lock_run_file(self) -> Iterator[None]:
        lock_file = self.path(".run.lock")
        try:
            with open(lock_file, "w") as f:
                fcntl.flock(f.fileno(), fcntl.LOCK_EX)
                yield
        finally:
            try:
                lock_file.unlink(missing_ok=True)
            except OSError:
                pass

    def _write_json(self, name: str, payload: Any) -> None:
        with atomic_write(self.path(name)) as temp_file:
            with open(temp_file, "w") as f:
                json.dump(payload, f, indent=2)

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        with atomic_write(target) as temp_file:
            temp_file.write_text(text)
        return target

    # -- run lifecycle -----------------------------------------------------

    def create_run(self, config: Dict[str, Any]) -> str:
        """Start a fresh run in this directory and return its id"""
        run_id = str(uuid.uuid4())[:8]
        now = datetime.now(timezone.utc).isoformat()
        run_data: Dict[str, Any] = {
            "run_id": run_id,
            "status": "running",
            "config": config,
            "created_at": now,
            "updated_at": now,
            "progress_log": [],
            "final": None,
            "error_message": None,
        }
        self._metrics = []
        self._snapshots = []
        with self._lock_run_file():
            self._write_json(RUN_FILE, run_data)
        return run_id

    def update_status(
        self,
        status: str,
        progress_message: Optional[str] = None,
        error_message: Optional[str] = None,
        final: Optional[Dict[str, Any]] = None,
    ) -> bool:
        if status not in self.VALID_STATUSES:
            raise ValueError(f"Invalid run status: {status}")
        try:
            with self._lock_run_file():
                run_data = self._safe_load_run()
                if run_data is None:
                    return False
                now = datetime.now(timezone.utc).isoformat()
                run_data["status"] = status
                run_data["updated_at"] = now
                if progress_message:
                    run_data.setdefault("progress_log", []).append(
                        {"timestamp": now, "message": progress_message}
                    )
                if error_message:
                    run_data["error_message"] = error_message
                if final is not None:
                    run_data["final"] = final
                self._write_json(RUN_FILE, run_data)
            return True
        except (TypeError, ValueError) as e:
            print(f"Error updating run - data serialization error: {e}")
            return False
        except OSError as e:
            print(f"Error updating run - file system error: {e}")
            return False

    def load_run(self) -> Optional[Dict[str, Any]]:
        return self._safe_load_run()

    # -- per-epoch artifacts -----------------------------------------------

    def append_metrics(
        self,
        epoch: int,
        train_loss: float,
        train_accuracy: float,
        test_accuracy: float,
        seconds: float,
        coefficients: Dict[str, List[float]],
    ) -> None:
        """Record one epoch; metrics.csv and coefficients.json are rewritten whole"""
        self._metrics.append(
            [
                str(epoch),
                format_number(train_loss),
                format_number(train_accuracy),
                format_number(test_accuracy),
                f"{seconds:.3f}",
            ]
        )
        self._snapshots.append({"epoch": epoch, "coefficients": coefficients})

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        writer.writerows(self._metrics)
        self.write_text(METRICS_FILE, buffer.getvalue())
        self._write_json(COEFFICIENTS_FILE, self._snapshots)

    def load_metrics(self) -> List[Dict[str, float]]:
        metrics_file = self.path(METRICS_FILE)
        if not metrics_file.exists():
            return []
        with open(metrics_file, newline="") as f:
            rows = list(csv.DictReader(f))
        return [
            {key: (int(value) if key == "epoch" else float(value)) for key, value in row.items()}
            for row in rows
        ]

    def load_coefficients(self) -> List[Dict[str, Any]]:
        coefficients_file = self.path(COEFFICIENTS_FILE)
        if not coefficients_file.exists():
            return []
        with open(coefficients_file) as f:
            snapshots = json.load(f)
        if not isinstance(snapshots, list):
            raise ValueError(f"{coefficients_file} does not hold a snapshot list")
        return snapshots

    def save_model(self, net: Any) -> Path:
        """Write a layers.Network via its own save()"""
        target = self.path(MODEL_FILE)
        with atomic_write(target) as temp_file:
            net.save(temp_file)
        return target
