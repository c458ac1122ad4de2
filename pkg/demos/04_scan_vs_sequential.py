"""Wallclock of the parallel scan against the step-by-step recurrence.

On one core both grow linearly in L and the scan makes about twice the
operator calls.  Its advantage is span: every level is independent work, so
with enough parallel workers the depth, not the length, sets the wallclock.
The attention row is one causal softmax query over the whole prefix.

Run: python3 demos/04_scan_vs_sequential.py
"""
from s5reset.bench import run_bench

rows = []
run_bench([64, 256, 1024, 4096], workers=(1,), reps=5, attention=True, on_row=rows.append)

print(f"{'L':>6} {'method':<15} {'ms':>10} {'op calls':>9}")
for r in rows:
    print(f"{r['L']:>6} {r['method']:<15} {r['wallclock_ms']:>10.2f} {r['invocations']:>9}")
