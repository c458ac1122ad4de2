import numpy as np

from s5reset.bench import median_ms, run_bench, scan_invocations


def test_invocations_l1024():
    assert scan_invocations(1024) <= 2 * 1023


def test_single_worker_scan_within_3x_of_sequential():
    rows = run_bench([1024], workers=(1,), reps=15, attention=False)
    t = {r["method"]: r["wallclock_ms"] for r in rows}
    assert t["scan"] <= 3 * t["sequential"], t


def test_scan_grows_slower_than_sequential_with_workers():
    # trend check: at L=2^14 adding workers must not make the scan slower
    # relative to the sequential loop than the single-worker ratio
    rows = run_bench([2**14], workers=(1, 4), reps=10, attention=False)
    seq = next(r["wallclock_ms"] for r in rows if r["method"] == "sequential")
    scan = {r["workers"]: r["wallclock_ms"] for r in rows if r["method"] == "scan"}
    print(f"sequential {seq:.1f} ms, scan {scan}")
    assert scan[4] <= 1.25 * scan[1]


def test_median_ms_is_positive():
    assert median_ms(lambda: np.ones(10).sum(), 3) > 0
