import pytest

from chronoscope.checkpoints import (
    CheckpointPolicy,
    CheckpointStore,
    MissingCheckpointError,
    NoCheckpointBeforeError,
)
from chronoscope.personality.base import Location, ProcessState


def _ps(line=1):
    return ProcessState(location=Location(file_label="t", line=line), bp_count=0, depth=1)


def _take(store, prefix, substep=0, data=b"blob", auto=False):
    return store.take(
        snapshot=data, prefix_len=prefix, state=_ps(), work=prefix, bp_table=[], substep=substep, auto=auto
    )


def test_monotone_ids_and_get():
    store = CheckpointStore()
    a = _take(store, 0)
    b = _take(store, 3)
    assert (a.ckpt_id, b.ckpt_id) == (0, 1)
    assert store.get(1).prefix_len == 3
    with pytest.raises(MissingCheckpointError):
        store.get(9)


def test_latest_before_prefers_prefix_then_id():
    store = CheckpointStore()
    _take(store, 0)
    _take(store, 2)
    again = _take(store, 2)
    _take(store, 5)
    best = store.latest_before(4)
    assert best.prefix_len == 2 and best.ckpt_id == again.ckpt_id
    assert store.latest_before(5).prefix_len == 5


def test_latest_before_skips_mid_command_checkpoints():
    store = CheckpointStore()
    _take(store, 0)
    _take(store, 2, substep=500)
    assert store.latest_before(3).prefix_len == 0


def test_no_checkpoint_before():
    store = CheckpointStore()
    _take(store, 4)
    with pytest.raises(NoCheckpointBeforeError):
        store.latest_before(3)


def test_disk_persistence_and_load(tmp_path):
    store = CheckpointStore(tmp_path)
    for i in range(5):
        _take(store, i, data=f"snap{i}".encode(), auto=(i % 2 == 0))
    # older snapshots were evicted from memory but survive on disk
    assert store.snapshot_bytes(0) == b"snap0"
    assert store.snapshot_bytes(4) == b"snap4"
    loaded = CheckpointStore.load(tmp_path)
    assert [c.ckpt_id for c in loaded.all()] == [0, 1, 2, 3, 4]
    assert loaded.get(3).auto is False
    assert loaded.snapshot_bytes(2) == b"snap2"
    # ids continue after the highest on disk
    assert _take(loaded, 9).ckpt_id == 5


def test_memory_only_store_keeps_all_bytes():
    store = CheckpointStore()
    for i in range(10):
        _take(store, i, data=bytes([i]))
    assert store.snapshot_bytes(0) == b"\x00"


def test_bad_header_rejected(tmp_path):
    (tmp_path / "ckpt_000000.bin").write_bytes(b'{"magic": "wrong"}\nxx')
    with pytest.raises(MissingCheckpointError):
        CheckpointStore.load(tmp_path)


def test_policy_defaults():
    policy = CheckpointPolicy()
    assert policy.max_interval_seconds == 5.0
    assert policy.max_commands_between == 1000
