"""Benchmark harness: ground truth, budget sweeps, metrics, result emission.

A sweep builds one game per instance, computes ground truth once, runs every
configured (estimator, index) pair at every budget with a derived seed, and
emits one row per (metric, order). Rows are plain records that serialize to
CSV and JSON lines; instances can run across a process pool, with rows
merged in deterministic order either way.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines
from .errors import ConfigError, SchemaError
from .estimator import EstimateReport, shapiq_estimate
from .exact import (
    InteractionScores,
    exact_cii_representation,
    soum_ground_truth,
)
from .games import Game, SoumGame, full_mask, load_game, soum_random
from .weights import FSI_TOP, SCHEME_SHAPLEY_KERNEL, SII, STI, validate_kind

METRICS = (
    "mse",
    "mse_at_k",
    "prec_at_k",
    "efficiency_gap",
    "runtime_seconds",
    "budget_used",
)

ESTIMATORS = ("shapiq", "pb_sii", "pb_sti", "kb_fsi")

# Baselines are tied to one index each; the sampling estimator fits any.
BASELINE_KIND = {"pb_sii": SII, "pb_sti": STI, "kb_fsi": FSI_TOP}

CSV_HEADER = "instance_id,estimator,kind,order,budget,metric,value,seed"


def _check_order_keys(est: InteractionScores, truth: InteractionScores, order: int) -> None:
    if set(est.order_slice(order)) != set(truth.order_slice(order)):
        raise SchemaError(
            f"estimate and truth disagree on the order-{order} subset keys"
        )


def mse(est: InteractionScores, truth: InteractionScores, order: int) -> float:
    """Mean squared error over all subsets of one order."""
    _check_order_keys(est, truth, order)
    t = truth.order_slice(order)
    e = est.order_slice(order)
    return float(np.mean([(e[m] - t[m]) ** 2 for m in t]))


def top_k_masks(scores: dict[int, float], k: int) -> list[int]:
    """The k masks largest in absolute value; ties broken by mask order."""
    ranked = sorted(scores.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    return [m for m, _ in ranked[:k]]


def mse_at_k(est: InteractionScores, truth: InteractionScores, order: int, k: int) -> float:
    """MSE restricted to the k subsets largest in absolute ground truth."""
    if k < 1:
        raise SchemaError(f"k must be >= 1, got {k}")
    _check_order_keys(est, truth, order)
    t = truth.order_slice(order)
    e = est.order_slice(order)
    top = top_k_masks(t, k)
    return float(np.mean([(e[m] - t[m]) ** 2 for m in top]))


def prec_at_k(est: InteractionScores, truth: InteractionScores, order: int, k: int) -> float:
    """Fraction of the true top-k subsets recovered by the estimated top-k."""
    if k < 1:
        raise SchemaError(f"k must be >= 1, got {k}")
    _check_order_keys(est, truth, order)
    t = truth.order_slice(order)
    e = est.order_slice(order)
    top_true = set(top_k_masks(t, k))
    top_est = set(top_k_masks(e, k))
    return len(top_true & top_est) / min(k, len(t))


@dataclass
class ResultRow:
    instance_id: int
    estimator: str
    kind: str
    order: int
    budget: int
    metric: str
    value: float
    seed: int

    def sort_key(self):
        return (
            self.instance_id, self.estimator, self.kind,
            self.order, self.budget, self.metric,
        )

    def to_csv(self) -> str:
        return (
            f"{self.instance_id},{self.estimator},{self.kind},{self.order},"
            f"{self.budget},{self.metric},{self.value!r},{self.seed}"
        )


@dataclass
class ExperimentConfig:
    """Sweep definition: game source, indices, estimators, budgets, seeds.

    ``game`` is either {"type": "soum", "d", "n_terms", "max_order"} with one
    fresh draw per instance, or {"type": "tabular", "paths": [...]} with one
    file per instance. ``indices`` lists {"kind", "s0"} pairs.
    """

    game: dict
    indices: list[dict]
    estimators: list[str]
    budgets: list[int]
    instances: int = 1
    base_seed: int = 0
    metrics: list[str] = field(default_factory=lambda: list(METRICS))
    top_k: int = 10
    paired_streams: bool = False
    scheme: str = SCHEME_SHAPLEY_KERNEL

    def __post_init__(self):
        if self.instances < 1:
            raise ConfigError("instance count must be >= 1")
        if not self.budgets or any(
            b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])
        ):
            raise ConfigError("budget grid must be nonempty and strictly increasing")
        for m in self.metrics:
            if m not in METRICS:
                raise ConfigError(f"unknown metric {m!r}; expected one of {METRICS}")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ConfigError(
                    f"unknown estimator {name!r}; expected one of {ESTIMATORS}"
                )
        for entry in self.indices:
            validate_kind(entry["kind"], entry["s0"])
        gtype = self.game.get("type")
        if gtype == "soum":
            for key in ("d", "n_terms", "max_order"):
                if key not in self.game:
                    raise ConfigError(f"soum game source needs {key!r}")
        elif gtype == "tabular":
            paths = self.game.get("paths") or []
            if len(paths) < self.instances:
                raise ConfigError(
                    f"tabular source provides {len(paths)} files for "
                    f"{self.instances} instances"
                )
        else:
            raise ConfigError("game source type must be 'soum' or 'tabular'")
        self.resolve_pairs()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def resolve_pairs(self) -> list[tuple[str, str, int]]:
        """(estimator, kind, s0) combinations this config runs.

        The sampling estimator pairs with every configured index; each
        baseline pairs only with its own index and it is a config error to
        request a baseline whose index is not configured.
        """
        pairs = []
        kinds_present = {e["kind"] for e in self.indices}
        for name in self.estimators:
            if name == "shapiq":
                for entry in self.indices:
                    pairs.append((name, entry["kind"], entry["s0"]))
                continue
            kind = BASELINE_KIND[name]
            if kind not in kinds_present:
                raise ConfigError(
                    f"estimator {name!r} only supports kind {kind!r}, which is "
                    f"not among the configured indices"
                )
            for entry in self.indices:
                if entry["kind"] == kind:
                    pairs.append((name, kind, entry["s0"]))
        return pairs


def run_seed(base_seed: int, instance: int, estimator_slot: str, budget: int) -> int:
    """Stable per-run seed; paired runs share a slot name."""
    slot = zlib.crc32(estimator_slot.encode())
    ss = np.random.SeedSequence([base_seed, instance, slot, budget])
    return int(ss.generate_state(1)[0])


def build_game(config: ExperimentConfig, instance: int) -> Game:
    if config.game["type"] == "soum":
        seed = run_seed(config.base_seed, instance, "game", 0)
        return soum_random(
            config.game["d"], config.game["n_terms"], seed, config.game["max_order"]
        )
    return load_game(config.game["paths"][instance])


def ground_truth(game: Game, kind: str, s0: int) -> InteractionScores:
    if isinstance(game, SoumGame):
        return soum_ground_truth(game, kind, s0)
    if game.d > 24:
        raise ConfigError(
            "ground truth for non-SOUM games needs d <= 24 (closed form only "
            "exists for sums of unanimity games)"
        )
    return exact_cii_representation(game, kind, s0)


def run_estimator(
    name: str, game: Game, kind: str, s0: int, budget: int, seed: int, scheme: str
) -> EstimateReport:
    if name == "shapiq":
        return shapiq_estimate(game, kind, s0, budget, scheme=scheme, seed=seed)
    if BASELINE_KIND[name] != kind:
        raise ConfigError(f"estimator {name!r} cannot approximate kind {kind!r}")
    if name == "pb_sii":
        return baselines.pb_sii(game, s0, budget, seed)
    if name == "pb_sti":
        return baselines.pb_sti(game, s0, budget, seed)
    return baselines.kb_fsi(game, s0, budget, seed)


def _orders_for(kind: str, s0: int) -> list[int]:
    return [s0] if kind == FSI_TOP else list(range(1, s0 + 1))


def run_instance(config: ExperimentConfig, instance: int) -> list[ResultRow]:
    """All rows for one instance: every pair, every budget, every metric."""
    game = build_game(config, instance)
    nu0_full = game.value(full_mask(game.d)) - game.value(0)
    truths: dict[tuple[str, int], InteractionScores] = {}
    rows: list[ResultRow] = []
    for name, kind, s0 in config.resolve_pairs():
        key = (kind, s0)
        if key not in truths:
            truths[key] = ground_truth(game, kind, s0)
        truth = truths[key]
        for budget in config.budgets:
            slot = (
                "paired"
                if config.paired_streams and name in ("shapiq", "kb_fsi")
                else name
            )
            seed = run_seed(config.base_seed, instance, slot, budget)
            start = time.perf_counter()
            report = run_estimator(name, game, kind, s0, budget, seed, config.scheme)
            elapsed = time.perf_counter() - start
            gap = report.scores.total() - nu0_full
            values = {
                "efficiency_gap": gap,
                "runtime_seconds": elapsed,
                "budget_used": float(report.budget_used),
            }
            for order in _orders_for(kind, s0):
                for metric in config.metrics:
                    if metric == "mse":
                        value = mse(report.scores, truth, order)
                    elif metric == "mse_at_k":
                        value = mse_at_k(report.scores, truth, order, config.top_k)
                    elif metric == "prec_at_k":
                        value = prec_at_k(report.scores, truth, order, config.top_k)
                    else:
                        value = values[metric]
                    rows.append(
                        ResultRow(
                            instance_id=instance,
                            estimator=name,
                            kind=kind,
                            order=order,
                            budget=budget,
                            metric=metric,
                            value=float(value),
                            seed=seed,
                        )
                    )
    return rows


def _run_instance_payload(args: tuple[dict, int]) -> list[ResultRow]:
    data, instance = args
    return run_instance(ExperimentConfig.from_dict(data), instance)


def run_budget_sweep(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """Run the whole sweep; rows come back in deterministic sorted order."""
    if workers > 1 and config.instances > 1:
        payload = config.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(
                _run_instance_payload,
                [(payload, i) for i in range(config.instances)],
            )
            rows = [row for chunk in chunks for row in chunk]
    else:
        rows = [
            row
            for i in range(config.instances)
            for row in run_instance(config, i)
        ]
    rows.sort(key=ResultRow.sort_key)
    return rows


def _atomic_write(path: str, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Write rows as CSV, atomically (temp file + rename)."""
    lines = [CSV_HEADER]
    lines.extend(row.to_csv() for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def write_jsonl(rows: list[ResultRow], path: str) -> None:
    """Write rows as JSON lines, atomically."""
    _atomic_write(path, "\n".join(json.dumps(asdict(row)) for row in rows) + "\n")
