"""
Fusing a prediction with an observation
=======================================

The server's momentum says where the next update should point; the clients'
aggregated update says where it actually pointed. Both are noisy. Treating
them as Gaussians and multiplying the densities gives a fused estimate whose
variance is below either input.
"""

import numpy as np

from fedeve import fuse_gaussians, kalman_gain

# A prediction at 1.0 with variance 1, an observation at 3.0 with variance 3.
mu, var = fuse_gaussians(1.0, 1.0, 3.0, 3.0)
print(f"fused mean {mu:.3f}, fused variance {var:.3f}")

# The same number falls out of the gain form used by the server.
G = kalman_gain(1.0, 3.0)
print(f"gain {G:.3f}: mean 1 + G*(3 - 1) = {1 + G * 2:.3f}, variance (1 - G)*1 = {(1 - G):.3f}")

# %%
# How the gain moves
# ------------------
# A confident prediction (small variance) pulls the gain toward 0 and the
# server mostly keeps its momentum. Noisy clients push the same way.

for s_pred in (0.01, 0.1, 1.0, 10.0):
    row = "  ".join(f"{kalman_gain(s_pred, s_obs):.2f}" for s_obs in (0.01, 0.1, 1.0, 10.0))
    print(f"pred var {s_pred:>5}: {row}")

# %%
# One server round by hand
# ------------------------

from fedeve.client import ClientUpdate
from fedeve.server import FedEveState, aggregate, estimate_drift_variances, fedeve_observe_update

state = FedEveState(w=np.zeros(2), M=np.array([0.2, 0.0]), sigma2=0.01)
updates = [ClientUpdate(np.array([1.0, 0.0]), 30, 0), ClientUpdate(np.array([0.0, 1.0]), 10, 1)]
delta = aggregate(updates)
drift = estimate_drift_variances(state.M, updates, delta)
new, G = fedeve_observe_update(state, delta, drift)
print("aggregated update", delta)
print(f"sigma_Q2 {drift.sigma_Q2:.4f}  sigma_R2 {drift.sigma_R2:.4f}  gain {G:.3f}")
print("new momentum", new.M, " new weights", new.w, f" posterior variance {new.sigma2:.4f}")
