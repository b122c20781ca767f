"""Experiment configuration, the seeded federated round loop, JSONL telemetry,
cross-seed summaries and SVG plotting."""

from __future__ import annotations

import csv
import glob as globlib
import hashlib
import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable
from xml.sax.saxutils import escape

import numpy as np

from . import seeding
from .client import DivergenceError, LocalHyper, local_train_prox, local_train_scaffold, local_train_sgd
from .data import (
    DRIFT_MODES,
    LabeledDataset,
    PartitionPlan,
    drift_isolation_view,
    gen_synthetic,
    load_idx,
    load_plan,
    partition_dirichlet,
    partition_iid,
    train_test_split,
)
from .drift import exact_period_drift
from .model import Batch, ModelSpec, backward, evaluate, init_params
from .server import (
    AdamState,
    FedEveState,
    MomentumState,
    ServerHyper,
    aggregate,
    estimate_drift_variances,
    fedavg_step,
    fedavgm_step,
    fedeve_observe_update,
    fedeve_predict,
    fedopt_adam_step,
    scaffold_global_variate,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RoundLog",
    "METHODS",
    "parse_config",
    "load_config",
    "sample_clients",
    "run_experiment",
    "oracle_gd",
    "mask_wall_time",
    "summarize",
    "plot_series",
]

METHODS = ("fedavg", "fedavgm", "fedprox", "scaffold", "fedopt", "fedeve")
# server rule applied after aggregation for each client-side method
_SERVER_RULE = {"fedavg": "fedavg", "fedprox": "fedavg", "scaffold": "fedavg",
                "fedavgm": "fedavgm", "fedopt": "fedopt", "fedeve": "fedeve"}

TOP_LEVEL_KEYS = {
    "dataset", "partition", "drift_isolation", "n_clients", "clients_per_round", "rounds",
    "method", "server", "local", "eval_every", "seed", "model", "telemetry",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    method: str
    partition: dict = field(default_factory=lambda: {"kind": "iid"})
    drift_isolation: str = "both"
    client_only_alpha: float = 0.01
    n_clients: int = 100
    clients_per_round: int = 10
    rounds: int = 100
    server: ServerHyper = field(default_factory=ServerHyper)
    local: LocalHyper = field(default_factory=LocalHyper)
    model: dict = field(default_factory=lambda: {"kind": "logistic"})
    eval_every: int = 1
    period_drift_every: int = 0
    force_gain: float | None = None
    broadcast_prediction: bool = True
    seed: int = 0

    @property
    def alpha(self):
        return self.partition.get("alpha", self.partition["kind"])

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    def fingerprint(self) -> str:
        """Hash of everything except the seed (identifies a summary cell)."""
        d = self.to_dict()
        d.pop("seed")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class RoundLog:
    t: int
    sampled: list
    train_loss: float
    acc: float | None = None
    eval_loss: float | None = None
    g_kal: float | None = None
    sigma_q2: float | None = None
    sigma_r2: float | None = None
    period_drift: float | None = None
    ms: float = 0.0
    # first coordinate of (aggregated update - momentum); FedEve only, not serialized
    innovation: float | None = None

    def to_json(self, fedeve: bool) -> str:
        rec = {
            "t": self.t,
            "sampled": self.sampled,
            "train_loss": self.train_loss,
            "acc": self.acc,
            "eval_loss": self.eval_loss,
        }
        if fedeve:
            rec.update(g_kal=self.g_kal, sigma_q2=self.sigma_q2, sigma_r2=self.sigma_r2)
        rec["period_drift"] = self.period_drift
        rec["ms"] = self.ms
        return json.dumps(rec)


# -- config ----------------------------------------------------------------


def _take(section: dict, name: str, allowed: dict) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(name, "must be a JSON object")
    for k in section:
        if k not in allowed:
            raise ConfigError(f"{name}.{k}", "unknown key")
    out = dict(allowed)
    out.update(section)
    return out


def _num(value, key, lo=None, hi=None, integer=False, lo_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}, got {value}")
    return int(value) if integer else float(value)


_SYNTHETIC = {"kind": "synthetic", "n_classes": 10, "input_dim": 20, "per_class": 500,
              "separation": 3.0, "seed": 0, "test_fraction": 0.2}
_IDX = {"kind": "idx", "train_images": None, "train_labels": None, "test_images": None,
        "test_labels": None, "n_classes": None, "test_fraction": 0.2, "seed": 0}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, applying defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for k in raw:
        if k not in TOP_LEVEL_KEYS:
            raise ConfigError(k, "unknown key")

    method = raw.get("method")
    if not method:
        raise ConfigError("method", "required")
    if method not in METHODS:
        raise ConfigError("method", f"must be one of {', '.join(METHODS)}")

    if "dataset" not in raw:
        raise ConfigError("dataset", "required")
    ds = raw["dataset"]
    kind = ds.get("kind", "synthetic") if isinstance(ds, dict) else None
    if kind == "synthetic":
        ds = _take(ds, "dataset", _SYNTHETIC)
        for k in ("n_classes", "input_dim", "per_class"):
            ds[k] = _num(ds[k], f"dataset.{k}", lo=1, integer=True)
        ds["separation"] = _num(ds["separation"], "dataset.separation", lo=0)
    elif kind == "idx":
        ds = _take(ds, "dataset", _IDX)
        for k in ("train_images", "train_labels"):
            if not isinstance(ds[k], str):
                raise ConfigError(f"dataset.{k}", "path required")
    else:
        raise ConfigError("dataset.kind", "must be 'synthetic' or 'idx'")
    ds["test_fraction"] = _num(ds["test_fraction"], "dataset.test_fraction", lo=0, hi=1, lo_open=True)
    ds["seed"] = _num(ds["seed"], "dataset.seed", lo=0, integer=True)

    part = raw.get("partition", {"kind": "iid"})
    if not isinstance(part, dict) or part.get("kind") not in ("dirichlet", "iid", "external"):
        raise ConfigError("partition.kind", "must be 'dirichlet', 'iid' or 'external'")
    if part["kind"] == "dirichlet":
        part = _take(part, "partition", {"kind": "dirichlet", "alpha": 1.0})
        part["alpha"] = _num(part["alpha"], "partition.alpha", lo=0, lo_open=True)
    elif part["kind"] == "external":
        part = _take(part, "partition", {"kind": "external", "path": None})
        if not isinstance(part["path"], str):
            raise ConfigError("partition.path", "path required")
    else:
        part = _take(part, "partition", {"kind": "iid"})

    iso = raw.get("drift_isolation", "both")
    if isinstance(iso, str):
        iso = {"mode": iso}
    iso = _take(iso, "drift_isolation", {"mode": "both", "client_only_alpha": 0.01})
    if iso["mode"] not in DRIFT_MODES:
        raise ConfigError("drift_isolation", f"must be one of {', '.join(DRIFT_MODES)}")
    client_only_alpha = _num(iso["client_only_alpha"], "drift_isolation.client_only_alpha", lo=0, lo_open=True)

    n_clients = _num(raw.get("n_clients", 100), "n_clients", lo=1, integer=True)
    per_round = _num(raw.get("clients_per_round", 10), "clients_per_round", lo=1, integer=True)
    if per_round > n_clients:
        raise ConfigError("clients_per_round", f"{per_round} exceeds n_clients={n_clients}")
    if part["kind"] == "dirichlet" and n_clients < 2:
        raise ConfigError("n_clients", "dirichlet partitioning needs at least 2 clients")
    rounds = _num(raw.get("rounds", 100), "rounds", lo=1, integer=True)
    eval_every = _num(raw.get("eval_every", 1), "eval_every", lo=1, integer=True)
    seed = _num(raw.get("seed", 0), "seed", lo=0, integer=True)

    srv = _take(raw.get("server", {}), "server",
                {"eta_g": 1.0, "beta": 0.9, "beta1": 0.9, "beta2": 0.99, "tau": 1e-3,
                 "force_gain": None, "broadcast_prediction": True})
    srv_hyper = ServerHyper(
        method=_SERVER_RULE[method],
        eta_g=_num(srv["eta_g"], "server.eta_g", lo=0, lo_open=True),
        beta=_num(srv["beta"], "server.beta", lo=0, hi=1 - 1e-12),
        beta1=_num(srv["beta1"], "server.beta1", lo=0, hi=1 - 1e-12),
        beta2=_num(srv["beta2"], "server.beta2", lo=0, hi=1 - 1e-12),
        tau=_num(srv["tau"], "server.tau", lo=0, lo_open=True),
    )
    force_gain = srv["force_gain"]
    if force_gain is not None:
        force_gain = _num(force_gain, "server.force_gain", lo=0, hi=1)
    if not isinstance(srv["broadcast_prediction"], bool):
        raise ConfigError("server.broadcast_prediction", "must be true or false")

    loc = _take(raw.get("local", {}), "local", {"eta_l": 0.01, "epochs": 1, "batch_size": 10, "mu": 0.0})
    local = LocalHyper(
        eta_l=_num(loc["eta_l"], "local.eta_l", lo=0, lo_open=True),
        epochs=_num(loc["epochs"], "local.epochs", lo=1, integer=True),
        batch_size=_num(loc["batch_size"], "local.batch_size", lo=1, integer=True),
        mu=_num(loc["mu"], "local.mu", lo=0),
    )

    mdl = _take(raw.get("model", {}), "model", {"kind": "logistic", "hidden_dim": 0, "init_scale": 0.0})
    if mdl["kind"] not in ("logistic", "mlp"):
        raise ConfigError("model.kind", "must be 'logistic' or 'mlp'")
    if mdl["kind"] == "mlp":
        mdl["hidden_dim"] = _num(mdl["hidden_dim"], "model.hidden_dim", lo=1, integer=True)
    mdl["init_scale"] = _num(mdl["init_scale"], "model.init_scale", lo=0)

    tel = _take(raw.get("telemetry", {}), "telemetry", {"period_drift_every": 0})
    drift_every = _num(tel["period_drift_every"], "telemetry.period_drift_every", lo=0, integer=True)

    return ExperimentConfig(
        dataset=ds, method=method, partition=part, drift_isolation=iso["mode"],
        client_only_alpha=client_only_alpha, n_clients=n_clients, clients_per_round=per_round,
        rounds=rounds, server=srv_hyper, local=local, model=mdl, eval_every=eval_every,
        period_drift_every=drift_every, force_gain=force_gain,
        broadcast_prediction=srv["broadcast_prediction"], seed=seed,
    )


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# -- building blocks -------------------------------------------------------


def sample_clients(N: int, m: int, round_seed: int) -> list[int]:
    """``m`` distinct clients drawn uniformly from ``range(N)``, ascending."""
    if not 1 <= m <= N:
        raise ValueError("need 1 <= m <= N")
    rng = np.random.default_rng(round_seed)
    return sorted(int(k) for k in rng.choice(N, size=m, replace=False))


def load_datasets(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    ds = cfg.dataset
    if ds["kind"] == "synthetic":
        full = gen_synthetic(ds["n_classes"], ds["input_dim"], ds["per_class"], ds["separation"], ds["seed"])
        return train_test_split(full, ds["test_fraction"], ds["seed"])
    train = load_idx(ds["train_images"], ds["train_labels"], ds["n_classes"])
    if ds["test_images"]:
        test = load_idx(ds["test_images"], ds["test_labels"], train.n_classes)
        return train, test
    return train_test_split(train, ds["test_fraction"], ds["seed"])


def build_model(cfg: ExperimentConfig, train: LabeledDataset) -> ModelSpec:
    m = cfg.model
    return ModelSpec(m["kind"], train.features.shape[1], train.n_classes, m["hidden_dim"], m["init_scale"])


def build_plans(cfg: ExperimentConfig, train: LabeledDataset) -> PartitionPlan:
    """The plan shards are drawn from for the configured drift-isolation mode."""
    pseed = seeding.derive_seed(cfg.seed, 10)
    if cfg.drift_isolation in ("none", "client_only"):
        return partition_iid(train, cfg.n_clients, pseed)
    p = cfg.partition
    if p["kind"] == "dirichlet":
        return partition_dirichlet(train, cfg.n_clients, p["alpha"], pseed)
    if p["kind"] == "external":
        plan = load_plan(p["path"], train)
        if plan.n_clients != cfg.n_clients:
            raise ConfigError("n_clients", f"external plan has {plan.n_clients} clients")
        return plan
    return partition_iid(train, cfg.n_clients, pseed)


# -- round loop ------------------------------------------------------------


def run_experiment(
    cfg: ExperimentConfig,
    out_dir=None,
    workers: int = 1,
    on_round: Callable[[int, np.ndarray], None] | None = None,
):
    """Run the federated loop; returns ``(logs, summary)``.

    With ``out_dir`` set, one JSON record per round is appended to
    ``metrics.jsonl`` as it completes, followed by a ``{"summary": ...}``
    record. ``on_round(t, w)`` sees the global parameters after each round.
    """
    train, test = load_datasets(cfg)
    spec = build_model(cfg, train)
    plan = build_plans(cfg, train)
    method = cfg.method
    rule = cfg.server.method
    is_fedeve = rule == "fedeve"
    hyper = cfg.local
    w = init_params(spec, seeding.derive_seed(cfg.seed, 11))
    dim = w.shape[0]

    eve = FedEveState.initial(w, cfg.server.eta_g)
    mom = MomentumState(w, np.zeros(dim))
    adam = AdamState(w, np.zeros(dim), np.zeros(dim))
    c_global = np.zeros(dim)
    c_clients: dict[int, np.ndarray] = {}

    handle = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        handle = open(out / "metrics.jsonl", "w")

    logs: list[RoundLog] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for t in range(1, cfg.rounds + 1):
            start = time.perf_counter()
            sampled = sample_clients(cfg.n_clients, cfg.clients_per_round,
                                     seeding.derive_seed(cfg.seed, seeding.SAMPLE, t))
            if is_fedeve and cfg.broadcast_prediction:
                w_send, _ = fedeve_predict(eve)
            else:
                w_send = w
            shards = drift_isolation_view(cfg.drift_isolation, plan, train, sampled,
                                          seeding.derive_seed(cfg.seed, seeding.VIEW, t),
                                          cfg.client_only_alpha)

            def work(i):
                k = sampled[i]
                cseed = seeding.derive_seed(cfg.seed, seeding.CLIENT, t, k)
                if method == "fedprox":
                    return local_train_prox(spec, w_send, shards[i], hyper, cseed, k, t), None
                if method == "scaffold":
                    ck = c_clients.get(k, np.zeros(dim))
                    return local_train_scaffold(spec, w_send, shards[i], hyper, ck, c_global, cseed, k, t)
                return local_train_sgd(spec, w_send, shards[i], hyper, cseed, k, t), None

            results = list(pool.map(work, range(len(sampled)))) if pool else [work(i) for i in range(len(sampled))]
            updates = [r[0] for r in results]
            delta = aggregate(updates)

            log = RoundLog(t=t, sampled=sampled, train_loss=float(np.mean([u.train_loss for u in updates])))
            if method == "scaffold":
                old = [c_clients.get(k, np.zeros(dim)) for k in sampled]
                new = [r[1] for r in results]
                c_global = scaffold_global_variate(c_global, old, new, cfg.n_clients)
                for k, c in zip(sampled, new):
                    c_clients[k] = c

            if rule == "fedeve":
                drift = estimate_drift_variances(eve.M, updates, delta)
                innovation = float(delta[0] - eve.M[0])
                eve, G = fedeve_observe_update(eve, delta, drift, cfg.force_gain)
                w = eve.w
                log.g_kal, log.sigma_q2, log.sigma_r2 = G, drift.sigma_Q2, drift.sigma_R2
                log.innovation = innovation
            elif rule == "fedavgm":
                mom = fedavgm_step(MomentumState(w, mom.M), delta, cfg.server.beta, cfg.server.eta_g)
                w = mom.w
            elif rule == "fedopt":
                s = cfg.server
                adam = fedopt_adam_step(AdamState(w, adam.m, adam.v), delta, s.beta1, s.beta2, s.tau, s.eta_g)
                w = adam.w
            else:
                w = fedavg_step(w, delta, cfg.server.eta_g)
            if not np.all(np.isfinite(w)):
                raise DivergenceError("non-finite global model", round=t)

            if cfg.period_drift_every and t % cfg.period_drift_every == 0:
                log.period_drift = exact_period_drift(spec, w_send, plan, train, sampled)
            if t % cfg.eval_every == 0 or t == cfg.rounds:
                log.acc, log.eval_loss = evaluate(spec, w, test)
            log.ms = round((time.perf_counter() - start) * 1000.0, 3)
            logs.append(log)
            if handle:
                handle.write(log.to_json(is_fedeve) + "\n")
                handle.flush()
            if on_round:
                on_round(t, w)
    except DivergenceError as exc:
        if exc.round is None:
            raise DivergenceError(str(exc), round=t) from exc
        raise
    finally:
        if pool:
            pool.shutdown()
        if handle:
            handle.close()

    final = logs[-1]
    summary = {
        "method": method,
        "alpha": cfg.alpha,
        "drift_isolation": cfg.drift_isolation,
        "seed": cfg.seed,
        "rounds": cfg.rounds,
        "final_acc": final.acc,
        "final_eval_loss": final.eval_loss,
        "fingerprint": cfg.fingerprint(),
    }
    if out_dir is not None:
        with open(Path(out_dir) / "metrics.jsonl", "a") as fh:
            fh.write(json.dumps({"summary": summary}) + "\n")
    return logs, summary


def oracle_gd(cfg: ExperimentConfig, steps: int | None = None) -> list[np.ndarray]:
    """Centralised full-batch gradient descent on the whole training split,
    started from the same initial parameters as :func:`run_experiment`."""
    train, _ = load_datasets(cfg)
    spec = build_model(cfg, train)
    w = init_params(spec, seeding.derive_seed(cfg.seed, 11))
    batch = Batch(train.features, train.labels)
    traj = []
    for _ in range(cfg.rounds if steps is None else steps):
        w = w - cfg.local.eta_l * backward(spec, w, batch)
        traj.append(w)
    return traj


_MS_FIELD = re.compile(r'"ms": [-0-9.eE+]+')


def mask_wall_time(text: str) -> str:
    """Blank out wall-clock fields so metric streams can be byte-compared."""
    return _MS_FIELD.sub('"ms": 0', text)


# -- post-processing -------------------------------------------------------


def _read_jsonl(path) -> tuple[list[dict], dict | None]:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"metrics file not found: {p}")
    rounds, summary = [], None
    for line in p.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if "summary" in rec:
            summary = rec["summary"]
        else:
            rounds.append(rec)
    return rounds, summary


def format_mean_std(values) -> tuple[float, float, str]:
    vals = [float(v) for v in values]
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return mean, std, f"{mean:.2f} ± {std:.2f}"


def summarize(paths, out_csv=None) -> list[dict]:
    """Mean ± sample std of final accuracy (percent) per (method, alpha) cell."""
    if isinstance(paths, (str, Path)):
        paths = sorted(globlib.glob(str(paths))) or [paths]
    cells: dict[tuple, list] = {}
    prints: dict[tuple, str] = {}
    for path in paths:
        _, summary = _read_jsonl(path)
        if summary is None:
            raise ValueError(f"{path} has no summary record (run incomplete?)")
        key = (summary["method"], str(summary["alpha"]))
        fp = summary["fingerprint"]
        if prints.setdefault(key, fp) != fp:
            raise ValueError(f"mixed configs in cell {key}: {path} differs from earlier runs")
        cells.setdefault(key, []).append(100.0 * summary["final_acc"])
    rows = []
    for (method, alpha), accs in sorted(cells.items()):
        mean, std, text = format_mean_std(accs)
        rows.append({"method": method, "alpha": alpha, "n_runs": len(accs),
                     "mean": f"{mean:.2f}", "std": f"{std:.2f}", "acc": text})
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["method", "alpha", "n_runs", "mean", "std", "acc"])
            writer.writeheader()
            writer.writerows(rows)
    return rows


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def plot_series(paths, field: str, svg_path, width: int = 640, height: int = 400) -> str:
    """Write a self-contained SVG line chart of ``field`` against round."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    series = []
    for path in paths:
        rounds, _ = _read_jsonl(path)
        if rounds and not any(field in r for r in rounds):
            raise ValueError(f"field {field!r} not present in {path}")
        pts = [(r["t"], r[field]) for r in rounds if r.get(field) is not None]
        series.append((str(path), pts))
    allpts = [p for _, s in series for p in s]
    if not allpts:
        raise ValueError(f"no values recorded for field {field!r}")
    xs = [p[0] for p in allpts]
    ys = [float(p[1]) for p in allpts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    ml, mr, mt, mb = 60, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + (1.0 - (y - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">round</text>',
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(field)}</text>',
        f'<text x="{ml}" y="{height - 30}" font-size="10">{x0}</text>',
        f'<text x="{ml + pw}" y="{height - 30}" font-size="10" text-anchor="end">{x1}</text>',
        f'<text x="{ml - 4}" y="{mt + ph}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{ml - 4}" y="{mt + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    for i, (name, pts) in enumerate(series):
        coords = " ".join(f"{sx(x):.2f},{sy(float(y)):.2f}" for x, y in pts)
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}">'
                     f"<title>{escape(name)}</title></polyline>")
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    Path(svg_path).write_text(svg)
    return svg
