"""Where do the outliers of a contaminated sample covariance land?

Prints the predicted covariance and mean-shift outliers for a few aspect
ratios, then compares them with one simulated draw.

    python demos/spike_prediction.py
"""
import math

from mspca import make_dataset, predict_spikes, sample_cov_eigs
from mspca.simulate import default_shift_magnitude

for c in (0.25, 0.5, 1.0, 2.0):
    ell, theta_sq = 2 * math.sqrt(c), 4 * math.sqrt(c)
    p = predict_spikes([ell], [theta_sq], c)
    print(f"c={c:<5} edge {p.bulk_edge:.3f}  covariance spike {p.lambda_P[0]:.3f}  mean-shift spike {p.lambda_A[0]:.3f}")

d = n = 1000
pi1 = 0.5
ds = make_dataset(d, n, (2.0,), (default_shift_magnitude(1.0, pi1),), (pi1,), seed=1)
top = sample_cov_eigs(ds.X_tilde, top_k=0, solver="partial", n_eigs=4).eigenvalues[:3]
print(f"\nsimulated d=n={n}: top eigenvalues {', '.join(f'{v:.3f}' for v in top)} (predicted 6.25, 4.5, edge 4)")
