"""Архив прогонов в SQLite: дайджест численной части отчёта по каждой конфигурации"""
import aiosqlite
from pathlib import Path
from typing import Optional, List, Dict
import logging

from config import REPORT_DB_PATH, REPORT_SCHEMA_VERSION

logger = logging.getLogger(__name__)


class ReportStore:
    """Асинхронная работа с архивом прогонов.

    Одно соединение на жизнь объекта: открывается в init(), закрывается в close().
    """

    def __init__(self, db_path: Path = REPORT_DB_PATH):
        self.db_path = Path(db_path)
        self._conn: Optional[aiosqlite.Connection] = None

    async def init(self) -> None:
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._conn = await aiosqlite.connect(self.db_path)
        self._conn.row_factory = aiosqlite.Row
        await self._conn.execute("PRAGMA journal_mode=WAL")
        await self._run_migrations()
        logger.info(f"ReportStore: archive ready at {self.db_path}")

    async def close(self) -> None:
        if self._conn:
            await self._conn.close()
            self._conn = None
            logger.debug("ReportStore: connection closed")

    async def __aenter__(self) -> "ReportStore":
        await self.init()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.close()

    async def _run_migrations(self) -> None:
        """Запуск миграций по версиям"""
        db = self._conn
        await db.execute("CREATE TABLE IF NOT EXISTS schema_versions (version INTEGER PRIMARY KEY)")
        cursor = await db.execute("SELECT MAX(version) FROM schema_versions")
        row = await cursor.fetchone()
        current_version = row[0] if row and row[0] is not None else 0

        migrations = [
            (1, self._schema_v1),
            (2, self._schema_v2),
        ]
        for version, fn in migrations:
            if version > REPORT_SCHEMA_VERSION:
                break
            if current_version < version:
                await fn(db)
                await db.execute("INSERT INTO schema_versions (version) VALUES (?)", (version,))
                await db.commit()
                logger.info(f"ReportStore: migrated to v{version}")

    async def _schema_v1(self, db) -> None:
        await db.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT NOT NULL,
                config_json TEXT NOT NULL,
                payload_sha256 TEXT NOT NULL,
                passed INTEGER NOT NULL,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)
        await db.execute("CREATE INDEX IF NOT EXISTS idx_runs_config ON runs(command, config_json)")

    async def _schema_v2(self, db) -> None:
        """Время прогона хранится только в архиве, в отчёт оно не пишется"""
        cursor = await db.execute("PRAGMA table_info(runs)")
        columns = {row[1] for row in await cursor.fetchall()}
        if "runtime_s" not in columns:
            await db.execute("ALTER TABLE runs ADD COLUMN runtime_s REAL")
            logger.debug("ReportStore: v2 added runtime_s column")

    async def add_run(self, command: str, config_json: str, payload_sha256: str, passed: bool,
                      runtime_s: Optional[float] = None) -> int:
        cursor = await self._conn.execute(
            "INSERT INTO runs (command, config_json, payload_sha256, passed, runtime_s) VALUES (?, ?, ?, ?, ?)",
            (command, config_json, payload_sha256, int(passed), runtime_s),
        )
        await self._conn.commit()
        logger.debug(f"ReportStore: run {cursor.lastrowid} stored for {command}")
        return cursor.lastrowid

    async def find_previous(self, command: str, config_json: str) -> Optional[Dict]:
        """Последний прогон с той же командой и конфигурацией."""
        cursor = await self._conn.execute(
            "SELECT * FROM runs WHERE command = ? AND config_json = ? ORDER BY id DESC LIMIT 1",
            (command, config_json),
        )
        row = await cursor.fetchone()
        return dict(row) if row else None

    async def list_runs(self, command: Optional[str] = None) -> List[Dict]:
        if command:
            cursor = await self._conn.execute("SELECT * FROM runs WHERE command = ? ORDER BY id", (command,))
        else:
            cursor = await self._conn.execute("SELECT * FROM runs ORDER BY id")
        return [dict(row) for row in await cursor.fetchall()]

    async def get_run_count(self) -> int:
        cursor = await self._conn.execute("SELECT COUNT(*) FROM runs")
        row = await cursor.fetchone()
        return row[0] if row else 0
