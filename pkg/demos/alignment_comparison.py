"""Leading-component recovery under 5% mean-shift contamination.

d=900, n=1000, default strengths.  Prints the alignment of each estimator
with the leading eigenvector of the clean sample covariance.  Tyler's
estimator is the slowest step (a few seconds per trial).

    python demos/alignment_comparison.py [trials]
"""
import sys

import numpy as np

from mspca import bench

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = bench.default_config("alignment_sweep", trials=trials)
recs = bench.run_experiment(cfg, progress=lambda i, t: print(f"\rtrial {i}/{t}", end="", file=sys.stderr))
print(file=sys.stderr)
for m in cfg.methods:
    vals = np.array([r.value for r in recs if r.method == m])
    print(f"{m:>10}: mean alignment {np.nanmean(vals):.3f}  (min {np.nanmin(vals):.3f}, max {np.nanmax(vals):.3f})")
