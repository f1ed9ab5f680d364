"""
SQLite cache of derived quantities.

Schema
------
  constants   — structural constants (U, C1, V, RIP δ) per dictionary and parameter set
  oracle      — σ_m values per dictionary, signal and m

Keys are SHA-256 fingerprints of the dictionary bytes plus the parameters,
so a changed dictionary never hits a stale row.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Generator, Optional

import numpy as np

from greedy.constants import ConstantEstimate, StructuralConstants
from greedy.oracle import OracleResult

logger = logging.getLogger(__name__)

_DDL = """
CREATE TABLE IF NOT EXISTS constants (
    key             TEXT    PRIMARY KEY,
    dictionary      TEXT    NOT NULL,       -- dictionary fingerprint
    params          TEXT    NOT NULL,       -- JSON
    payload         TEXT    NOT NULL,       -- JSON of StructuralConstants.to_dict()
    created_at      TEXT    NOT NULL DEFAULT (datetime('now'))
);

CREATE TABLE IF NOT EXISTS oracle (
    key             TEXT    PRIMARY KEY,
    dictionary      TEXT    NOT NULL,
    kind            TEXT    NOT NULL,       -- norm | seminorm
    m               INTEGER NOT NULL,
    value           REAL    NOT NULL,
    payload         TEXT    NOT NULL,       -- JSON of OracleResult.to_dict()
    created_at      TEXT    NOT NULL DEFAULT (datetime('now'))
);

CREATE INDEX IF NOT EXISTS idx_constants_dict ON constants(dictionary);
CREATE INDEX IF NOT EXISTS idx_oracle_dict    ON oracle(dictionary);
"""


def cache_key(fingerprint: str, **params) -> str:
    h = hashlib.sha256(fingerprint.encode())
    h.update(json.dumps(params, sort_keys=True, default=str).encode())
    return h.hexdigest()


def signal_fingerprint(f: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(f, dtype="<f8").tobytes()).hexdigest()


def _estimate(d: dict) -> ConstantEstimate:
    return ConstantEstimate(
        value=float(d["value"]), exact=bool(d["exact"]), kind=d["kind"], certificate=dict(d["certificate"]),
    )


class ConstantCache:
    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._conn():
            pass

    @contextmanager
    def _conn(self) -> Generator[sqlite3.Connection, None, None]:
        con = sqlite3.connect(self.path)
        con.row_factory = sqlite3.Row
        con.executescript(_DDL)
        try:
            yield con
            con.commit()
        except Exception:
            con.rollback()
            raise
        finally:
            con.close()

    # ------------------------------------------------------------------
    # Structural constants
    # ------------------------------------------------------------------

    def get_constants(self, fingerprint: str, **params) -> Optional[StructuralConstants]:
        key = cache_key(fingerprint, **params)
        with self._conn() as con:
            row = con.execute("SELECT payload FROM constants WHERE key = ?", (key,)).fetchone()
        if row is None:
            return None
        d = json.loads(row["payload"])
        logger.debug("constants cache hit %s", key[:12])
        return StructuralConstants(
            coherence=float(d["coherence"]),
            rip_delta=None if d["rip_delta"] is None else float(d["rip_delta"]),
            U=_estimate(d["U"]),
            C1=_estimate(d["C1"]),
            V=_estimate(d["V"]),
            K=int(d["K"]),
            D_depth=int(d["D_depth"]),
            r=float(d["r"]),
        )

    def put_constants(self, fingerprint: str, constants: StructuralConstants, **params) -> None:
        key = cache_key(fingerprint, **params)
        with self._conn() as con:
            con.execute(
                """
                INSERT INTO constants (key, dictionary, params, payload)
                VALUES (?, ?, ?, ?)
                ON CONFLICT(key) DO UPDATE SET payload = excluded.payload,
                                               created_at = datetime('now')
                """,
                (key, fingerprint, json.dumps(params, sort_keys=True, default=str),
                 json.dumps(constants.to_dict(), default=str)),
            )

    # ------------------------------------------------------------------
    # σ_m
    # ------------------------------------------------------------------

    def get_sigma(self, fingerprint: str, f: np.ndarray, m: int, kind: str = "norm") -> Optional[float]:
        key = cache_key(fingerprint, signal=signal_fingerprint(f), m=m, kind=kind)
        with self._conn() as con:
            row = con.execute("SELECT value FROM oracle WHERE key = ?", (key,)).fetchone()
        return None if row is None else float(row["value"])

    def put_sigma(self, fingerprint: str, f: np.ndarray, m: int, result: OracleResult, kind: str = "norm") -> None:
        key = cache_key(fingerprint, signal=signal_fingerprint(f), m=m, kind=kind)
        with self._conn() as con:
            con.execute(
                """
                INSERT INTO oracle (key, dictionary, kind, m, value, payload)
                VALUES (?, ?, ?, ?, ?, ?)
                ON CONFLICT(key) DO UPDATE SET value = excluded.value,
                                               payload = excluded.payload,
                                               created_at = datetime('now')
                """,
                (key, fingerprint, kind, m, result.value, json.dumps(result.to_dict(), default=str)),
            )

    def stats(self) -> dict:
        with self._conn() as con:
            n_const = con.execute("SELECT COUNT(*) FROM constants").fetchone()[0]
            n_oracle = con.execute("SELECT COUNT(*) FROM oracle").fetchone()[0]
        return {"constants": n_const, "oracle": n_oracle}
