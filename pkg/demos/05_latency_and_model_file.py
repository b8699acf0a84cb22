"""Single-window inference latency and the weight-file format.

Run:  python demos/05_latency_and_model_file.py
"""

import tempfile
from pathlib import Path

import numpy as np

from consgrunet import model as M
from consgrunet import runtime as R
from consgrunet.tensor import Tensor

state = M.build_model(M.ModelConfig(seed=0))
total, breakdown = M.count_params(state)
print("default architecture:")
for name, count in breakdown.items():
    print(f"  {name:14s} {count:>9,d}")
print(f"  {'total':14s} {total:>9,d} parameters")

workdir = Path(tempfile.mkdtemp(prefix="consgrunet_demo_"))
path = workdir / "default.csgn"
M.save_model(state, path)
size = path.stat().st_size
print(f"serialized: {size:,} bytes ({size / 1000:.0f} KB) at {path}")

print()
print("running latency benchmark (500 iterations, 50 warmup)...")
rng = np.random.default_rng(42)
window = rng.standard_normal((10, 20)).astype(np.float32)
stats = R.bench_latency(state, window, iterations=500, warmup=50)
print(f"forward pass only:    mean={stats.mean_ms:.2f} ms  p50={stats.p50_ms:.2f}  "
      f"p95={stats.p95_ms:.2f}  min={stats.min_ms:.2f}  max={stats.max_ms:.2f}")
stats_pp = R.bench_latency(state, window, iterations=500, warmup=50,
                           include_preprocessing=True)
print(f"with preprocessing:   mean={stats_pp.mean_ms:.2f} ms  "
      f"p50={stats_pp.p50_ms:.2f}  p95={stats_pp.p95_ms:.2f}")
print("target: mean <= 25 ms ->", "met" if stats.mean_ms <= 25 else "missed")

print()
print("weight file round trip is bit-exact:")
reloaded = M.load_model(path)
again = workdir / "again.csgn"
M.save_model(reloaded, again)
print("  byte-identical:", path.read_bytes() == again.read_bytes())

logits_a, _ = M.forward_window(state, Tensor(window))
logits_b, _ = M.forward_window(reloaded, Tensor(window))
print("  identical logits after reload:", np.array_equal(logits_a.array, logits_b.array))
