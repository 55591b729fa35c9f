"""
Output storage: CSV tables, JSON records and run manifests.
"""

import json
import math
import shutil
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np

from .config import settings
from .errors import DomainError, NonFiniteOutputError
from .models import RunManifest


def _format(value: float) -> str:
    return format(value, ".17g")


def _split_columns(columns: Mapping[str, Any]) -> Dict[str, np.ndarray]:
    """Complex columns become a real column plus an ``_imag`` companion."""
    out: Dict[str, np.ndarray] = {}
    length = None
    for name, values in columns.items():
        array = np.atleast_1d(np.asarray(values))
        if array.ndim != 1:
            raise DomainError(f"column {name!r} must be one-dimensional", tag="table-shape", context={"column": name})
        if length is None:
            length = array.size
        elif array.size != length:
            raise DomainError(
                f"column {name!r} has {array.size} rows, expected {length}",
                tag="table-shape",
                context={"column": name, "rows": int(array.size), "expected": int(length)},
            )
        if np.iscomplexobj(array):
            out[name] = array.real.astype(float)
            out[f"{name}_imag"] = array.imag.astype(float)
        else:
            out[name] = array.astype(float)
    return out


def _check_finite(name: str, array: np.ndarray) -> None:
    bad = ~np.isfinite(array)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise NonFiniteOutputError(
            f"column {name!r} has a non-finite value at row {row}",
            context={"column": name, "row": row},
        )


def _finite_json(value: Any, path: str = "$") -> Any:
    """Reject NaN/Inf anywhere in a JSON-bound structure."""
    if isinstance(value, float) and not math.isfinite(value):
        raise NonFiniteOutputError(f"non-finite value at {path}", context={"path": path})
    if isinstance(value, dict):
        for key, item in value.items():
            _finite_json(item, f"{path}.{key}")
    elif isinstance(value, (list, tuple)):
        for idx, item in enumerate(value):
            _finite_json(item, f"{path}[{idx}]")
    return value


class OutputManager:
    """Manages run directories and the files written into them."""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = Path(output_dir or settings.output_dir)

    def get_run_path(self, run_id: str) -> Path:
        """Get the path to a run directory."""
        return self.output_dir / run_id

    def create_run_directory(self, run_id: str) -> Path:
        """Create and return the path to a run directory."""
        run_path = self.output_dir / run_id
        run_path.mkdir(parents=True, exist_ok=True)
        return run_path

    def write_table_csv(self, run_id: str, name: str, columns: Mapping[str, Any]) -> Path:
        """
        Write a table with a header row and 17 significant digits.

        Args:
            run_id: Run directory name
            name: Basename without extension
            columns: Ordered mapping header -> 1-d values

        Returns:
            Path of the written file
        """
        table = _split_columns(columns)
        for column, array in table.items():
            _check_finite(column, array)
        path = self.create_run_directory(run_id) / f"{name}.csv"
        headers = list(table)
        rows = zip(*(table[h] for h in headers)) if headers else iter(())
        lines = [",".join(headers)]
        lines.extend(",".join(_format(float(v)) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def write_json(self, run_id: str, name: str, payload: Any) -> Path:
        """Write a pydantic model or plain structure as indented JSON."""
        if hasattr(payload, "model_dump"):
            payload = payload.model_dump()
        _finite_json(payload)
        path = self.create_run_directory(run_id) / f"{name}.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=False)
        return path

    def write_manifest(self, manifest: RunManifest, name: str) -> Path:
        return self.write_json(manifest.runId, name, manifest)

    def load_manifest(self, path: Path) -> RunManifest:
        with open(path, "r", encoding="utf-8") as f:
            return RunManifest(**json.load(f))

    def read_table_csv(self, path: Path) -> Dict[str, List[float]]:
        """Read a table written by write_table_csv back into columns."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        headers = lines[0].split(",") if lines and lines[0] else []
        columns: Dict[str, List[float]] = {h: [] for h in headers}
        for line in lines[1:]:
            for header, cell in zip(headers, line.split(",")):
                columns[header].append(float(cell))
        return columns

    def list_runs(self) -> Iterable[Path]:
        if not self.output_dir.exists():
            return []
        return sorted(p for p in self.output_dir.iterdir() if p.is_dir())

    def cleanup_run(self, run_id: str) -> bool:
        """
        Remove a run directory.

        Returns:
            True if the directory is gone afterwards
        """
        run_path = self.output_dir / run_id
        if run_path.exists():
            try:
                shutil.rmtree(run_path)
            except OSError:
                return False
        return True


output_manager = OutputManager()
