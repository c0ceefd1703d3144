"""
Запись отчётов прогонов: JSON (канонический формат) и CSV (строка на запись).

Файл пишется атомарно: сначала во временный, затем replace.
Кроме timestamp, отчёт зависит только от конфигурации: два одинаковых
прогона дают побайтно одинаковые файлы с точностью до этого поля.
"""
import asyncio
import csv
import enum
import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config import REPORT_DIR

logger = logging.getLogger(__name__)

NON_NUMERICAL_FIELDS = ("timestamp",)
REPORT_FORMATS = ("json", "csv")


def to_jsonable(value: Any) -> Any:
    """numpy-скаляры, массивы и enum → обычные JSON-типы."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if np.isnan(value) or np.isinf(value):
            return str(value)
        return value
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def build_report(command: str, config: Dict, versions: Dict, records: List[Dict],
                 extremal: Optional[Dict], passed: bool) -> Dict[str, Any]:
    return to_jsonable({
        "command": command,
        "config": config,
        "versions": versions,
        "records": records,
        "extremal": extremal or {},
        "pass": bool(passed),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })


def numerical_payload(report: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in report.items() if k not in NON_NUMERICAL_FIELDS}


def payload_digest(report: Dict[str, Any]) -> str:
    """sha256 канонической сериализации численной части отчёта."""
    canonical = json.dumps(numerical_payload(report), ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _flatten(record: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, list):
            flat[name] = json.dumps(value, ensure_ascii=False)
        else:
            flat[name] = value
    return flat


class ReportWriter:
    def __init__(self, report_dir: Path = REPORT_DIR):
        self.report_dir = Path(report_dir)

    def resolve(self, out: Optional[Path], command: str, fmt: str) -> Path:
        if out is not None:
            return Path(out)
        return self.report_dir / f"{command}.{fmt}"

    def _save_json_sync(self, report: Dict[str, Any], path: Path) -> None:
        temp_path = path.with_suffix(".tmp")
        with open(temp_path, "w", encoding="utf-8") as f:
            json.dump(report, f, ensure_ascii=False, indent=2, sort_keys=True)
        temp_path.replace(path)

    def _save_csv_sync(self, report: Dict[str, Any], path: Path) -> None:
        rows = []
        for index, record in enumerate(report.get("records", [])):
            row = {"command": report["command"], "pass": report["pass"], "index": index}
            row.update(_flatten(record))
            rows.append(row)
        columns: List[str] = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
        temp_path = path.with_suffix(".tmp")
        with open(temp_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns or ["command", "pass"])
            writer.writeheader()
            writer.writerows(rows)
        temp_path.replace(path)

    def write_sync(self, report: Dict[str, Any], path: Path, fmt: str = "json") -> Path:
        if fmt not in REPORT_FORMATS:
            raise ValueError(f"unknown report format '{fmt}'")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            if fmt == "json":
                self._save_json_sync(report, path)
            else:
                self._save_csv_sync(report, path)
        except OSError as e:
            logger.error(f"ReportWriter: failed to write {path}: {e}")
            raise
        logger.info(f"ReportWriter: {fmt} report written to {path}")
        return path

    async def write(self, report: Dict[str, Any], path: Path, fmt: str = "json") -> Path:
        return await asyncio.to_thread(self.write_sync, report, path, fmt)

    def load_sync(self, path: Path) -> Dict[str, Any]:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return data if isinstance(data, dict) else {}
