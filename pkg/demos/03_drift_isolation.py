"""
Separating period drift from client drift
=========================================

Four ways to hand data to the sampled clients, each switching one source of
drift on or off:

* none: iid shards, so neither drift is present
* client_only: the sampled pool is iid but re-split very unevenly
* period_only: skewed shards are pooled and dealt back evenly
* both: every client keeps its own skewed shard

The run below uses 100 rounds to stay quick.
"""

import json

from fedeve import parse_config, run_experiment

base = {
    "dataset": {"kind": "synthetic", "n_classes": 10, "input_dim": 20, "per_class": 500, "separation": 2.0},
    "partition": {"kind": "dirichlet", "alpha": 0.01},
    "n_clients": 100, "clients_per_round": 10, "rounds": 100, "eval_every": 100,
    "method": "fedavg", "local": {"eta_l": 0.5},
}

for mode in ("none", "client_only", "period_only", "both"):
    cfg = parse_config(json.dumps(dict(base, drift_isolation=mode)))
    _, summary = run_experiment(cfg)
    print(f"{mode:<12} final accuracy {100 * summary['final_acc']:.2f}%")

# Removing client drift alone (period_only) helps less than removing period
# drift alone (client_only): the round-to-round wandering of the sampled
# class mix is the larger problem under heavy skew.
