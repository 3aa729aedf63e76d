"""Class-incremental evaluation driver and headline metrics.

``run_protocol`` fits tasks in order, evaluates the model after each task
on that task's cumulative test batch, and reports the per-task accuracy
curve together with its mean (average incremental accuracy) and final
value (last-task accuracy).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .classifier import new_model
from .config import METHOD_FENEC_LOG, HyperParams
from .errors import AggregationError, ConfigError, DataError
from .feature_store import TaskStream
from .logit_head import TrainConfig


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_fingerprint(hyper: HyperParams, seed, train_cfg: TrainConfig | None = None) -> str:
    """Stable hash identifying a run's hyperparameters and seed(s)."""
    payload = {
        "hyperparams": hyper.to_dict(),
        "seed": list(seed) if isinstance(seed, (list, tuple)) else seed,
    }
    if train_cfg is not None:
        payload["training"] = {
            "learning_rate": train_cfg.learning_rate,
            "batch_size": train_cfg.batch_size,
            "max_epochs": train_cfg.max_epochs,
            "patience": train_cfg.patience,
            "validation_fraction": train_cfg.validation_fraction,
            "seed": train_cfg.seed,
        }
    return hashlib.sha256(_canonical_json(payload).encode()).hexdigest()


@dataclass(frozen=True)
class RunReport:
    """Accuracies of one protocol run: curve, mean, and final value."""

    per_task_accuracy: tuple
    average_incremental_accuracy: float
    last_task_accuracy: float
    config_fingerprint: str

    def __post_init__(self) -> None:
        accs = self.per_task_accuracy
        if not accs:
            raise DataError("a run report needs at least one task accuracy")
        if abs(self.average_incremental_accuracy - sum(accs) / len(accs)) > 1e-12:
            raise DataError("average_incremental_accuracy does not match the curve")
        if self.last_task_accuracy != accs[-1]:
            raise DataError("last_task_accuracy does not match the curve")

    @classmethod
    def from_accuracies(cls, accs, fingerprint: str) -> "RunReport":
        accs = tuple(float(a) for a in accs)
        return cls(
            per_task_accuracy=accs,
            average_incremental_accuracy=sum(accs) / len(accs),
            last_task_accuracy=accs[-1],
            config_fingerprint=fingerprint,
        )

    def to_dict(self) -> dict:
        return {
            "per_task_accuracy": list(self.per_task_accuracy),
            "average_incremental_accuracy": self.average_incremental_accuracy,
            "last_task_accuracy": self.last_task_accuracy,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json_bytes(self) -> bytes:
        return (_canonical_json(self.to_dict()) + "\n").encode()


def run_protocol(
    stream: TaskStream,
    hyper: HyperParams,
    train_cfg: TrainConfig | None = None,
    seed: int = 0,
) -> RunReport:
    """Run the full class-incremental protocol on one task stream.

    For the log-likelihood method the head is trained right after the first
    task is fitted and stays frozen for the remaining tasks; ``train_cfg``
    is required in that case.
    """
    if hyper.method == METHOD_FENEC_LOG and train_cfg is None:
        raise ConfigError("the log-likelihood method requires a training configuration")
    model = new_model(hyper, seed=seed)
    accs = []
    for t, task in enumerate(stream.tasks):
        if task.train.n_samples == 0:
            raise DataError(f"task {t} has no training rows")
        model.fit_task(task.train)
        fitted = set(model.classes)
        if fitted != set(stream.cumulative_classes[t]):
            missing = sorted(set(stream.cumulative_classes[t]) - fitted)
            raise DataError(f"task {t}: split classes {missing} have no training rows")
        if hyper.method == METHOD_FENEC_LOG and t == 0:
            model.train_head(task.train, train_cfg)
        if task.test.n_samples == 0:
            raise DataError(f"task {t} has no test rows to evaluate")
        accs.append(model.score(task.test))
    return RunReport.from_accuracies(accs, config_fingerprint(hyper, seed, train_cfg))


@dataclass(frozen=True)
class RunSummary:
    """Mean and sample standard deviation of metrics across repeated runs."""

    n_runs: int
    average_incremental_mean: float
    average_incremental_sd: float
    last_task_mean: float
    last_task_sd: float
    per_task_mean: tuple
    per_task_ci_half_width: tuple
    single_run: bool

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "average_incremental_accuracy": {
                "mean": self.average_incremental_mean,
                "sd": self.average_incremental_sd,
            },
            "last_task_accuracy": {
                "mean": self.last_task_mean,
                "sd": self.last_task_sd,
            },
            "per_task": [
                {
                    "task_index": i + 1,
                    "mean": m,
                    "ci_low": m - h,
                    "ci_high": m + h,
                }
                for i, (m, h) in enumerate(
                    zip(self.per_task_mean, self.per_task_ci_half_width)
                )
            ],
            "single_run": self.single_run,
        }

    def curves_csv(self) -> str:
        lines = ["task_index,mean,ci_low,ci_high"]
        for row in self.to_dict()["per_task"]:
            lines.append(
                f"{row['task_index']},{row['mean']!r},{row['ci_low']!r},{row['ci_high']!r}"
            )
        return "\n".join(lines) + "\n"


def _mean_sd(values) -> tuple:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate_runs(reports) -> RunSummary:
    """Summarize repeated runs: per-metric mean/sd and 95% per-task bands."""
    if not reports:
        raise AggregationError("no reports to aggregate")
    n_tasks = len(reports[0].per_task_accuracy)
    if any(len(r.per_task_accuracy) != n_tasks for r in reports):
        raise AggregationError("reports cover different numbers of tasks")
    n = len(reports)
    avg_mean, avg_sd = _mean_sd([r.average_incremental_accuracy for r in reports])
    last_mean, last_sd = _mean_sd([r.last_task_accuracy for r in reports])
    curve = np.array([r.per_task_accuracy for r in reports], dtype=np.float64)
    task_means = curve.mean(axis=0)
    if n > 1:
        task_sd = curve.std(axis=0, ddof=1)
    else:
        task_sd = np.zeros(n_tasks)
    half = 1.96 * task_sd / math.sqrt(n)
    return RunSummary(
        n_runs=n,
        average_incremental_mean=avg_mean,
        average_incremental_sd=avg_sd,
        last_task_mean=last_mean,
        last_task_sd=last_sd,
        per_task_mean=tuple(float(m) for m in task_means),
        per_task_ci_half_width=tuple(float(h) for h in half),
        single_run=(n == 1),
    )
