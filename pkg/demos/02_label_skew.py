"""
Label skew and the period drift it causes
=========================================

A Dirichlet(alpha) partition hands each client a skewed mix of classes.
Sampling a few clients per round then gives a class mix that wanders away from
the population's. The expected squared gap shrinks like H/|S|, where H
measures how unevenly labels are spread across clients.
"""

import numpy as np

from fedeve import gen_synthetic, partition_dirichlet
from fedeve.data import heterogeneity_H
from fedeve.drift import expected_label_deviation, sampled_label_deviation

train = gen_synthetic(n_classes=10, input_dim=20, per_class=500, separation=2.0, seed=0)

for alpha in (100.0, 1.0, 0.1, 0.01):
    plan = partition_dirichlet(train, n_clients=100, alpha=alpha, seed=1)
    dominant = np.mean(plan.class_proportions.max(axis=1))
    print(f"alpha {alpha:>6}: H = {heterogeneity_H(plan):.4f}, mean share of a client's top class {dominant:.2f}")

# %%
# Checking the 1/|S| law by simulation
# ------------------------------------
# Independent draws follow H/|S| directly. Drawing without replacement adds
# the finite population factor (N - S)/(N - 1).

plan = partition_dirichlet(train, n_clients=100, alpha=0.1, seed=1)
for S in (2, 5, 10, 30):
    with_repl = sampled_label_deviation(plan, S, 5000, seed=S, replace=True).mean()
    without = sampled_label_deviation(plan, S, 5000, seed=S).mean()
    print(f"|S|={S:>2}: independent {with_repl:.5f} vs {expected_label_deviation(plan, S, True):.5f}; "
          f"without replacement {without:.5f} vs {expected_label_deviation(plan, S):.5f}")
