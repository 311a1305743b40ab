#!/usr/bin/env python3
"""
Test Script for run_store.py - Tests run lifecycle and artifact files

Usage: python3 tests/test_run_store.py
"""

import json
import shutil
import sys
import tempfile
import threading
from pathlib import Path
from unittest.mock import Mock

# Add parent directory to import modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from run_store import (  # noqa: E402
    COEFFICIENTS_FILE,
    METRICS_FILE,
    MODEL_FILE,
    RUN_FILE,
    RunStore,
    atomic_write,
    format_number,
)


def setup_test_store():
    """Create a RunStore in a temporary directory"""
    temp_dir = Path(tempfile.mkdtemp(prefix="test_run_store_"))
    return RunStore(temp_dir / "run"), temp_dir


def test_initialization():
    """Test RunStore creates its directory"""
    print("=== Testing Initialization ===")

    store, temp_dir = setup_test_store()
    try:
        assert store.output_dir.is_dir()
        assert store.path(RUN_FILE) == store.output_dir / "run.json"
        assert "diverged" in store.VALID_STATUSES
        print("✅ Output directory created")
        assert store.load_run() is None
        assert store.load_metrics() == []
        assert store.load_coefficients() == []
        print("✅ Empty directory has no run")
    finally:
        shutil.rmtree(temp_dir)


def test_run_lifecycle():
    """Test create, progress, completion and invalid statuses"""
    print("\n=== Testing Run Lifecycle ===")

    store, temp_dir = setup_test_store()
    try:
        run_id = store.create_run({"architecture": "lenet", "seed": 3})
        assert len(run_id) == 8
        run = store.load_run()
        assert run["status"] == "running" and run["config"]["seed"] == 3
        print(f"✅ Created run {run_id}")

        assert store.update_status("running", progress_message="epoch 1 done")
        assert store.update_status("completed", final={"test_accuracy": 0.8})
        run = store.load_run()
        assert run["status"] == "completed"
        assert run["final"] == {"test_accuracy": 0.8}
        assert [e["message"] for e in run["progress_log"]] == ["epoch 1 done"]
        print("✅ Progress log and final record stored")

        try:
            store.update_status("paused")
            assert False, "invalid status accepted"
        except ValueError:
            print("✅ Invalid status rejected")
    finally:
        shutil.rmtree(temp_dir)


def test_corrupt_run_file():
    """Test corrupt or oversized run.json reads as missing"""
    print("\n=== Testing Corrupt Run File ===")

    store, temp_dir = setup_test_store()
    try:
        store.path(RUN_FILE).write_text("{not json")
        assert store.load_run() is None
        assert not store.update_status("failed", error_message="x")
        print("✅ Invalid JSON ignored")

        store.path(RUN_FILE).write_text(json.dumps({"run_id": "x", "status": "weird"}))
        assert store.load_run() is None
        print("✅ Missing keys and unknown status ignored")

        store.path(RUN_FILE).write_text(" " * (store.MAX_JSON_SIZE + 1))
        assert store.load_run() is None
        print("✅ Oversized file ignored")
    finally:
        shutil.rmtree(temp_dir)


def test_metrics_and_coefficients():
    """Test the metrics CSV format and coefficient snapshots"""
    print("\n=== Testing Metrics and Coefficients ===")

    store, temp_dir = setup_test_store()
    try:
        store.create_run({})
        store.append_metrics(1, 0.5, 0.75, 0.7, 1.23456, {"layer0": [0.25, 0.75]})
        store.append_metrics(2, 0.1 + 0.2, 0.8, 0.71, 2.0, {"layer0": [0.2, 0.8]})

        lines = store.path(METRICS_FILE).read_text().splitlines()
        assert lines[0] == "epoch,train_loss,train_acc,test_acc,seconds"
        assert lines[1] == "1,0.5,0.75,0.7,1.235"
        assert lines[2].startswith("2,0.30000000000000004,")
        print("✅ Header and exact round-trip numbers")

        metrics = store.load_metrics()
        assert metrics[1]["train_loss"] == 0.1 + 0.2
        assert metrics[0]["epoch"] == 1
        snapshots = store.load_coefficients()
        assert snapshots[-1] == {"epoch": 2, "coefficients": {"layer0": [0.2, 0.8]}}
        print("✅ Metrics and snapshots read back")

        store.create_run({})
        store.append_metrics(1, 1.0, 0.1, 0.1, 0.5, {})
        assert len(store.load_metrics()) == 1
        print("✅ A new run starts a fresh history")
    finally:
        shutil.rmtree(temp_dir)


def test_atomic_write():
    """Test atomic_write leaves no temp files behind on success or failure"""
    print("\n=== Testing Atomic Write ===")

    temp_dir = Path(tempfile.mkdtemp(prefix="test_atomic_"))
    try:
        target = temp_dir / "out.txt"
        with atomic_write(target) as temp_file:
            temp_file.write_text("done")
        assert target.read_text() == "done"

        try:
            with atomic_write(target) as temp_file:
                temp_file.write_text("partial")
                raise RuntimeError("interrupted")
        except RuntimeError:
            pass
        assert target.read_text() == "done"
        assert [p.name for p in temp_dir.iterdir()] == ["out.txt"]
        print("✅ Target replaced only on success; temp file cleaned up")
    finally:
        shutil.rmtree(temp_dir)

    assert format_number(0.1) == "0.1"
    assert float(format_number(1 / 3)) == 1 / 3
    print("✅ format_number round-trips floats")


def test_save_model():
    """Test save_model delegates to the network's save"""
    print("\n=== Testing Model Save ===")

    store, temp_dir = setup_test_store()
    try:
        net = Mock()
        net.save.side_effect = lambda path: Path(path).write_bytes(b"npz")
        target = store.save_model(net)
        assert target == store.path(MODEL_FILE)
        assert target.read_bytes() == b"npz"
        print("✅ Model written atomically")
    finally:
        shutil.rmtree(temp_dir)


def test_concurrent_status_updates():
    """Test that locked updates from several threads all land"""
    print("\n=== Testing Concurrent Updates ===")

    store, temp_dir = setup_test_store()
    try:
        store.create_run({})
        results = []

        def worker(index):
            results.append(store.update_status("running", progress_message=f"msg {index}"))

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(5)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

        assert all(results)
        assert store.load_run() is not None
        assert store.path(COEFFICIENTS_FILE).exists() is False
        print("✅ Concurrent updates completed without corrupting run.json")
    finally:
        shutil.rmtree(temp_dir)


def main():
    """Run all tests"""
    print("🚀 Testing Run Store")
    print("=" * 50)

    tests = [
        ("Initialization", test_initialization),
        ("Run Lifecycle", test_run_lifecycle),
        ("Corrupt Run File", test_corrupt_run_file),
        ("Metrics and Coefficients", test_metrics_and_coefficients),
        ("Atomic Write", test_atomic_write),
        ("Model Save", test_save_model),
        ("Concurrent Updates", test_concurrent_status_updates),
    ]

    passed = 0
    total = len(tests)

    for test_name, test_func in tests:
        print(f"\n{'=' * 20} {test_name} {'=' * 20}")
        try:
            test_func()
            print(f"✅ {test_name} PASSED")
            passed += 1
        except Exception as e:
            print(f"❌ {test_name} CRASHED: {e}")
            import traceback

            traceback.print_exc()

    print(f"\n{'=' * 50}")
    print(f"🏁 Results: {passed}/{total} tests passed")
    print(f"{'=' * 50}")

    return passed == total


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
