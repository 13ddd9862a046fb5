import hashlib
import json
import logging
import os
import sqlite3
import time
from pathlib import Path
from typing import Any, Dict, Optional


logger = logging.getLogger(__name__)


def fingerprint(quantity: str, config: Dict[str, Any], seed: int, **extra: Any) -> str:
    """Stable key for one Monte Carlo quantity under one configuration and seed."""
    payload = json.dumps({"quantity": quantity, "config": config, "seed": seed, "extra": extra}, sort_keys=True, default=repr)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class EstimateCache:
    """sqlite store of Monte Carlo estimates keyed by fingerprint; entries never expire since runs are deterministic."""

    DB_NAME = "estimates.db"

    def __init__(self, cache_dir: Optional[str] = None):
        if cache_dir is None:
            cache_dir = os.path.join(os.path.expanduser("~"), ".hardsphere_bbgky", "cache")

        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

        self.db_path = self.cache_dir / self.DB_NAME
        self._init_database()

    def _init_database(self):
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS estimates (
                    fingerprint TEXT PRIMARY KEY,
                    quantity TEXT,
                    payload TEXT,
                    cached_at INTEGER,
                    last_accessed INTEGER
                )
            """)

            conn.execute("""
                CREATE INDEX IF NOT EXISTS idx_quantity
                ON estimates(quantity)
            """)

            conn.commit()

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            row = conn.execute("SELECT * FROM estimates WHERE fingerprint = ?", (key,)).fetchone()

            if row is None:
                return None

            conn.execute(
                "UPDATE estimates SET last_accessed = ? WHERE fingerprint = ?",
                (int(time.time()), key)
            )

            try:
                payload = json.loads(row["payload"])
            except json.JSONDecodeError:
                logger.warning(f"Dropping unreadable cache entry for {row['quantity']}")
                return None

        logger.info(f"Cache hit for {row['quantity']}")
        return payload

    def put(self, key: str, quantity: str, payload: Dict[str, Any]):
        now = int(time.time())

        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                INSERT OR REPLACE INTO estimates (
                    fingerprint, quantity, payload, cached_at, last_accessed
                ) VALUES (?, ?, ?, ?, ?)
            """, (key, quantity, json.dumps(payload), now, now))
            conn.commit()

        logger.debug(f"Cached {quantity}")

    def clear_all(self):
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("DELETE FROM estimates")
            conn.commit()

        logger.info("Cleared estimate cache")

    def get_cache_stats(self) -> Dict[str, Any]:
        with sqlite3.connect(self.db_path) as conn:
            total = conn.execute("SELECT COUNT(*) FROM estimates").fetchone()[0]
            per_quantity = dict(conn.execute("SELECT quantity, COUNT(*) FROM estimates GROUP BY quantity").fetchall())

        return {
            "total_estimates": total,
            "per_quantity": per_quantity,
            "cache_size_bytes": self.db_path.stat().st_size,
            "cache_dir": str(self.cache_dir),
        }
