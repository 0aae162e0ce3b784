"""Run registry on SQLite: every run and its check results, findable by config hash."""
import json
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional
from uuid import uuid4

from src.utils.config import settings
from src.utils.logger import logger


class RunRegistry:
    """Runs and check outcomes."""

    def __init__(self, db_path: Optional[str] = None):
        """Initialize database."""
        self.db_path = db_path or settings.registry_path
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self.logger = logger
        self._create_tables()

    def _create_tables(self):
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id TEXT PRIMARY KEY,
                config_hash TEXT NOT NULL,
                seed INTEGER,
                exit_code INTEGER,
                manifest_path TEXT,
                started_at TEXT,
                finished_at TEXT
            )
        """)

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS checks (
                id TEXT PRIMARY KEY,
                run_id TEXT,
                name TEXT NOT NULL,
                passed INTEGER,
                gated INTEGER,
                digest TEXT,
                statistic TEXT,
                created_at TEXT,
                FOREIGN KEY (run_id) REFERENCES runs(id)
            )
        """)

        conn.commit()
        conn.close()

    def get_session(self):
        return sqlite3.connect(self.db_path)

    def start_run(self, config_hash: str, seed: int) -> str:
        run_id = str(uuid4())
        conn = self.get_session()
        conn.execute("INSERT INTO runs (id, config_hash, seed, started_at) VALUES (?, ?, ?, ?)",
                     (run_id, config_hash, seed, datetime.now().isoformat()))
        conn.commit()
        conn.close()
        self.logger.debug(f"registered run {run_id} (config {config_hash[:12]}, seed {seed})")
        return run_id

    def finish_run(self, run_id: str, exit_code: int, manifest_path: str):
        conn = self.get_session()
        conn.execute("UPDATE runs SET exit_code = ?, manifest_path = ?, finished_at = ? WHERE id = ?",
                     (exit_code, manifest_path, datetime.now().isoformat(), run_id))
        conn.commit()
        conn.close()

    def record_check(self, run_id: str, report) -> str:
        check_id = str(uuid4())
        conn = self.get_session()
        conn.execute("""
            INSERT INTO checks (id, run_id, name, passed, gated, digest, statistic, created_at)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
        """, (
            check_id, run_id, report.name, int(report.passed), int(report.gated), report.digest,
            json.dumps(report.to_dict()["statistic"], default=str), datetime.now().isoformat(),
        ))
        conn.commit()
        conn.close()
        return check_id

    def get_run(self, run_id: str) -> Optional[Dict]:
        conn = self.get_session()
        row = conn.execute("SELECT id, config_hash, seed, exit_code, manifest_path, started_at, finished_at "
                           "FROM runs WHERE id = ?", (run_id,)).fetchone()
        conn.close()
        if row is None:
            return None
        keys = ("id", "config_hash", "seed", "exit_code", "manifest_path", "started_at", "finished_at")
        return dict(zip(keys, row))

    def find_runs(self, config_hash: str) -> List[Dict]:
        conn = self.get_session()
        rows = conn.execute("SELECT id FROM runs WHERE config_hash = ? ORDER BY started_at", (config_hash,)).fetchall()
        conn.close()
        return [self.get_run(r[0]) for r in rows]

    def checks_of(self, run_id: str) -> List[Dict]:
        conn = self.get_session()
        rows = conn.execute("SELECT name, passed, gated, digest, statistic FROM checks WHERE run_id = ? "
                            "ORDER BY created_at", (run_id,)).fetchall()
        conn.close()
        return [{"name": r[0], "passed": bool(r[1]), "gated": bool(r[2]), "digest": r[3],
                 "statistic": json.loads(r[4])} for r in rows]


run_registry = RunRegistry()
