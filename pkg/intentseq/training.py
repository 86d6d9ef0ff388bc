"""Training loop, optimizers, evaluation and metrics files."""

import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint
from .dataset import DatasetSplit, Window, root_x_velocity, stack_windows
from .errors import (
    DivergedLossError,
    EmptyDatasetError,
    NonFiniteGradientError,
    ShapeMismatchError,
    SingleClassBatchError,
)
from .metrics import accuracy, bce_loss, roc_auc
from .models.base import ListResponseModel
from .models.intent import EpochRecord, EvaluationReport, ModelConfig, OptimizerKind, TrainConfig
from .networks import ModelParameters, forward, init_params, loss_and_grads, predict
from .numeric import Array
from .utils import atomic_write_bytes

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
TIMED_WINDOWS = 256

# Independent generator streams derived from the training seed.
_SHUFFLE_STREAM = 1
_DROPOUT_STREAM = 2


@dataclass
class OptimizerState:
    """Step counter and Adam moment estimates, keyed by tensor name."""

    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochRecord]


def optimizer_step(
    params: ModelParameters, grads: dict[str, Array], config: TrainConfig, state: OptimizerState
) -> tuple[ModelParameters, OptimizerState]:
    """Apply one SGD or Adam update.

    SGD: ``w - lr*g``. Adam: bias-corrected first and second moments with
    betas (0.9, 0.999) and eps 1e-8.

    Raises:
        ShapeMismatchError: If ``grads`` does not mirror ``params``
        NonFiniteGradientError: If any gradient entry is NaN or Inf
    """
    if set(grads) != set(params.tensors):
        raise ShapeMismatchError(f"Gradients {sorted(grads)} do not match parameters {sorted(params.tensors)}")
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise ShapeMismatchError(f"Gradient {name} has shape {grad.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"Gradient {name} contains NaN or Inf")

    lr = config.learning_rate
    state.step += 1
    updated: dict[str, Array] = {}
    if config.optimizer is OptimizerKind.SGD:
        for name, grad in grads.items():
            updated[name] = params[name] - lr * grad
    else:
        beta1, beta2 = ADAM_BETAS
        correction1 = 1.0 - beta1**state.step
        correction2 = 1.0 - beta2**state.step
        for name, grad in grads.items():
            m = beta1 * state.m.get(name, np.zeros_like(grad)) + (1.0 - beta1) * grad
            v = beta2 * state.v.get(name, np.zeros_like(grad)) + (1.0 - beta2) * grad * grad
            state.m[name], state.v[name] = m, v
            step = lr * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)
            updated[name] = params[name] - step
    cast = {name: tensor.astype(params.dtype, copy=False) for name, tensor in updated.items()}
    return params.replace(cast), state


def safe_auc(p: Array, y: Array, label: str) -> float | None:
    """AUC, or None with a warning when only one class is present."""
    try:
        return roc_auc(p, y)
    except SingleClassBatchError as e:
        logger.warning(f"{label}: {e}")
        return None


def _require_windows(windows: Sequence[Window], label: str) -> None:
    if not windows:
        raise EmptyDatasetError(f"The {label} partition is empty")


def train(
    split: DatasetSplit,
    model_config: ModelConfig,
    train_config: TrainConfig,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Train a model and keep the epoch with the highest validation AUC.

    Each epoch shuffles the training windows, runs forward, BCE, backward and an
    optimizer step per batch (the last partial batch included), then scores the
    validation partition in eval mode. Ties in validation AUC keep the earlier
    epoch.

    Args:
        split: Partitions; train and val must be non-empty, val must hold both classes
        model_config: Architecture
        train_config: Optimisation settings
        on_epoch: Called with every EpochRecord as it is produced

    Returns:
        TrainResult with the best checkpoint and one record per epoch

    Raises:
        EmptyDatasetError: If train or val is empty
        SingleClassBatchError: If validation lacks a class
        DivergedLossError: If a batch loss becomes non-finite
    """
    _require_windows(split.train, "train")
    _require_windows(split.val, "validation")
    train_x, train_y = stack_windows(split.train)
    val_x, val_y = stack_windows(split.val)
    if train_x.shape[1:] != (model_config.seq_len, model_config.input_size):
        raise ShapeMismatchError(
            f"Windows are {train_x.shape[1:]}, config expects ({model_config.seq_len}, {model_config.input_size})"
        )
    val_positive = int(val_y.sum())
    if val_positive in (0, len(val_y)):
        raise SingleClassBatchError("Validation partition must contain both classes to select by AUC")

    seed = train_config.seed
    params = init_params(model_config, seed)
    shuffle_rng = np.random.default_rng([seed, _SHUFFLE_STREAM])
    dropout_rng = np.random.default_rng([seed, _DROPOUT_STREAM])
    state = OptimizerState()
    batch_size = train_config.batch_size
    n_train = len(train_y)

    logger.info(
        f"Training {model_config.summary} on {n_train} windows ({len(val_y)} validation) "
        f"for {train_config.epochs} epochs with {train_config.optimizer.value}"
    )
    history: list[EpochRecord] = []
    best: Checkpoint | None = None
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(n_train)
        running = np.empty(n_train, dtype=np.float32)
        loss_sum = 0.0
        for start in range(0, n_train, batch_size):
            index = order[start : start + batch_size]
            result = loss_and_grads(
                params, train_x[index], train_y[index], True, dropout_rng, train_config.clamp_eps
            )
            if not np.isfinite(result.loss):
                raise DivergedLossError(f"Loss became {result.loss} at epoch {epoch}, batch {start // batch_size + 1}")
            params, state = optimizer_step(params, result.grads, train_config, state)
            running[start : start + len(index)] = result.probabilities
            loss_sum += result.loss * len(index)
            logger.debug(f"epoch {epoch} batch {start // batch_size + 1}: loss {result.loss:.5f}")

        shuffled_y = train_y[order]
        train_auc = safe_auc(running, shuffled_y, "training AUC")
        val_probs = predict(params, val_x)
        val_loss, _ = bce_loss(val_probs, val_y, train_config.clamp_eps)
        if not np.isfinite(val_loss):
            raise DivergedLossError(f"Validation loss became {val_loss} at epoch {epoch}")
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n_train,
            val_loss=val_loss,
            train_acc=accuracy(running, shuffled_y, train_config.threshold),
            val_acc=accuracy(val_probs, val_y, train_config.threshold),
            train_auc=train_auc if train_auc is not None else 0.5,
            val_auc=roc_auc(val_probs, val_y),
        )
        history.append(record)
        logger.info(record.summary)
        if on_epoch is not None:
            on_epoch(record)
        if best is None or record.val_auc > best.best_val_auc:
            best = Checkpoint(params=params, best_val_auc=record.val_auc, seed=seed, epoch=epoch)
            logger.info(f"Captured checkpoint at epoch {epoch} (val AUC {record.val_auc:.4f})")

    assert best is not None
    return TrainResult(checkpoint=best, history=history)


def evaluate(
    checkpoint: Checkpoint,
    test: Sequence[Window],
    threshold: float = 0.5,
    timed_windows: int = TIMED_WINDOWS,
) -> EvaluationReport:
    """Test accuracy, AUC and mean single-window inference time.

    AUC is None when the test windows hold one class only; accuracy is still
    reported. Timing covers eval-mode forward passes over the first
    ``timed_windows`` windows one at a time.
    """
    _require_windows(test, "test")
    features, targets = stack_windows(test)
    params = checkpoint.params
    probs = predict(params, features)

    timed = features[: max(1, min(timed_windows, len(features)))]
    forward(params, timed[:1])
    started = time.perf_counter()
    for k in range(len(timed)):
        forward(params, timed[k : k + 1])
    mean_ms = (time.perf_counter() - started) * 1000.0 / len(timed)

    report = EvaluationReport(
        kind=checkpoint.kind,
        windows=len(test),
        accuracy=accuracy(probs, targets, threshold),
        auc=safe_auc(probs, targets, "test AUC"),
        mean_inference_ms=mean_ms,
    )
    logger.info(report.summary)
    return report


def velocity_baseline_auc(windows: Sequence[Window]) -> float | None:
    """AUC of the mid-hip lateral speed used directly as a crossing score."""
    features, targets = stack_windows(windows)
    return safe_auc(root_x_velocity(features), targets, "velocity baseline")


def write_metrics_csv(records: Sequence[EpochRecord], path: str | Path) -> None:
    """One row per epoch: ``epoch,train_loss,val_loss,train_acc,val_acc,train_auc,val_auc``."""
    frame = ListResponseModel[EpochRecord](response=list(records)).to_frame()
    frame = frame.reindex(columns=list(EpochRecord.csv_columns))
    atomic_write_bytes(Path(path), frame.to_csv(index=False, lineterminator="\n").encode("utf-8"))
    logger.debug(f"Wrote {len(records)} epoch records to {path}")
