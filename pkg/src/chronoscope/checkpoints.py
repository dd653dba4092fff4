"""Checkpoint registry: snapshot bytes + history prefix + process state
at capture, persisted one file per checkpoint, plus the spontaneous
checkpoint policy.

A checkpoint taken mid-command (by the continue timeout) carries a
nonzero `substep`; boundary restores only ever use substep-0
checkpoints so that restore + replay stays aligned with the history.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .personality.base import Location, ProcessState

HEADER_MAGIC = "chronoscope-ckpt/1"


class MissingCheckpointError(Exception):
    pass


class NoCheckpointBeforeError(Exception):
    """No checkpoint at or before the requested prefix; callers should
    treat session start as the floor."""


@dataclass(frozen=True)
class Checkpoint:
    ckpt_id: int
    prefix_len: int
    substep: int
    state: ProcessState
    work: int
    bp_table: tuple[tuple[int, int, bool], ...]
    created_at: float
    auto: bool

    def meta(self) -> dict:
        return {
            "magic": HEADER_MAGIC,
            "id": self.ckpt_id,
            "prefix_len": self.prefix_len,
            "substep": self.substep,
            "file": self.state.location.file_label,
            "line": self.state.location.line,
            "bp_count": self.state.bp_count,
            "depth": self.state.depth,
            "work": self.work,
            "bp_table": [list(b) for b in self.bp_table],
            "created_at": self.created_at,
            "auto": self.auto,
        }


@dataclass(frozen=True)
class CheckpointPolicy:
    max_interval_seconds: float = 5.0
    max_commands_between: int = 1000


class CheckpointStore:
    """Monotone-id registry.  Snapshot bytes for the newest two
    checkpoints stay in memory; older ones are read back from disk (or
    from the in-memory map when no directory is configured)."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._registry: dict[int, Checkpoint] = {}
        self._bytes: dict[int, bytes] = {}
        self._hot: list[int] = []
        self._next_id = 0

    # ---- capture / fetch ----

    def take(
        self,
        snapshot: bytes,
        prefix_len: int,
        state: ProcessState,
        work: int,
        bp_table,
        substep: int = 0,
        auto: bool = False,
    ) -> Checkpoint:
        ckpt = Checkpoint(
            ckpt_id=self._next_id,
            prefix_len=prefix_len,
            substep=substep,
            state=state,
            work=work,
            bp_table=tuple(tuple(b) for b in bp_table),
            created_at=time.time(),
            auto=auto,
        )
        self._next_id += 1
        self._registry[ckpt.ckpt_id] = ckpt
        self._bytes[ckpt.ckpt_id] = snapshot
        self._hot.append(ckpt.ckpt_id)
        if self.directory is not None:
            path = self.directory / f"ckpt_{ckpt.ckpt_id:06d}.bin"
            with open(path, "wb") as fh:
                fh.write(json.dumps(ckpt.meta()).encode("utf-8") + b"\n")
                fh.write(snapshot)
            while len(self._hot) > 2:
                cold = self._hot.pop(0)
                self._bytes.pop(cold, None)
        return ckpt

    def get(self, ckpt_id: int) -> Checkpoint:
        if ckpt_id not in self._registry:
            raise MissingCheckpointError(f"no checkpoint {ckpt_id}")
        return self._registry[ckpt_id]

    def snapshot_bytes(self, ckpt_id: int) -> bytes:
        if ckpt_id in self._bytes:
            return self._bytes[ckpt_id]
        if self.directory is None:
            raise MissingCheckpointError(f"no snapshot for checkpoint {ckpt_id}")
        path = self.directory / f"ckpt_{ckpt_id:06d}.bin"
        if not path.exists():
            raise MissingCheckpointError(f"checkpoint file missing: {path}")
        with open(path, "rb") as fh:
            fh.readline()
            return fh.read()

    def all(self) -> list[Checkpoint]:
        return [self._registry[i] for i in sorted(self._registry)]

    def prune(self, max_prefix: int, keep: int | None = None) -> list[int]:
        """Drop checkpoints invalidated by truncating history to
        max_prefix units: anything past the boundary, plus mid-command
        checkpoints of the command that is being truncated away."""
        doomed = [
            c.ckpt_id
            for c in self._registry.values()
            if c.ckpt_id != keep
            and (c.prefix_len > max_prefix or (c.prefix_len == max_prefix and c.substep > 0))
        ]
        for ckpt_id in doomed:
            del self._registry[ckpt_id]
            self._bytes.pop(ckpt_id, None)
            if ckpt_id in self._hot:
                self._hot.remove(ckpt_id)
            if self.directory is not None:
                path = self.directory / f"ckpt_{ckpt_id:06d}.bin"
                path.unlink(missing_ok=True)
        return sorted(doomed)

    # ---- selection ----

    def latest_before(self, prefix_len: int, boundary_only: bool = True) -> Checkpoint:
        """Checkpoint with maximal prefix_len <= the given one (ties by
        max id).  Boundary-only excludes mid-command checkpoints."""
        best: Checkpoint | None = None
        for ckpt in self._registry.values():
            if ckpt.prefix_len > prefix_len:
                continue
            if boundary_only and ckpt.substep != 0:
                continue
            if (
                best is None
                or ckpt.prefix_len > best.prefix_len
                or (ckpt.prefix_len == best.prefix_len and ckpt.ckpt_id > best.ckpt_id)
            ):
                best = ckpt
        if best is None:
            raise NoCheckpointBeforeError(
                f"no checkpoint at or before prefix {prefix_len}; replay from session start"
            )
        return best

    # ---- resume ----

    @classmethod
    def load(cls, directory: str | Path) -> "CheckpointStore":
        store = cls(directory)
        for path in sorted(store.directory.glob("ckpt_*.bin")):
            with open(path, "rb") as fh:
                meta = json.loads(fh.readline().decode("utf-8"))
                if meta.get("magic") != HEADER_MAGIC:
                    raise MissingCheckpointError(f"bad checkpoint header in {path}")
                data = fh.read()
            ckpt = Checkpoint(
                ckpt_id=meta["id"],
                prefix_len=meta["prefix_len"],
                substep=meta["substep"],
                state=ProcessState(
                    location=Location(file_label=meta["file"], line=meta["line"]),
                    bp_count=meta["bp_count"],
                    depth=meta["depth"],
                ),
                work=meta["work"],
                bp_table=tuple(tuple(b) for b in meta["bp_table"]),
                created_at=meta["created_at"],
                auto=meta["auto"],
            )
            store._registry[ckpt.ckpt_id] = ckpt
            store._bytes[ckpt.ckpt_id] = data
            store._next_id = max(store._next_id, ckpt.ckpt_id + 1)
        store._hot = sorted(store._registry)[-2:]
        return store
