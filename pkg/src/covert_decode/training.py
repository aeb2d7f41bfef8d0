"""Training loop: seeded minibatches, Adam updates, validation-plateau early
stopping, and batched evaluation."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .network import RecurrentModel, cross_entropy_mean
from .optim import adam_step, init_adam
from .rng import substream


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 10
    validation_fraction: float = 0.1
    stop_on_perfect_train: bool = False

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")


@dataclass
class TrainResult:
    epochs_run: int
    best_epoch: int
    history: list = field(default_factory=list)

    @property
    def final_train_accuracy(self) -> float:
        return self.history[-1]["train_accuracy"] if self.history else 0.0

    @property
    def best_train_accuracy(self) -> float:
        return max(h["train_accuracy"] for h in self.history) if self.history else 0.0


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _stratified_validation_split(labels: np.ndarray, fraction: float, rng):
    """Per-class tail split; returns (train_idx, val_idx)."""
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        n_val = int(round(fraction * members.size))
        n_val = min(n_val, members.size - 1)  # keep at least one training sample
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return np.sort(np.asarray(train_idx, dtype=np.int64)), np.sort(
        np.asarray(val_idx, dtype=np.int64)
    )


def predict_proba(model: RecurrentModel, x: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """Eval-mode class probabilities, batched to bound memory."""
    chunks = []
    for start in range(0, x.shape[0], batch_size):
        chunks.append(model.forward(x[start : start + batch_size], training=False))
    return np.concatenate(chunks, axis=0)


def predict(model: RecurrentModel, x: np.ndarray, batch_size: int = 32) -> np.ndarray:
    return predict_proba(model, x, batch_size).argmax(axis=1)


def evaluate_accuracy(model, x, y, batch_size: int = 32) -> float:
    return float((predict(model, x, batch_size) == np.asarray(y)).mean())


def train_step(model: RecurrentModel, x_batch, y_batch, adam_state, dropout_rng):
    """One forward/backward/update on a batch.

    Returns (loss, n_correct); correctness is judged from the same training
    forward pass, so per-epoch accuracy costs nothing extra.
    """
    y_batch = np.asarray(y_batch, dtype=np.int64)
    probs = model.forward(x_batch, training=True, rng=dropout_rng)
    loss = cross_entropy_mean(probs, y_batch)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite training loss: {loss}")
    n = probs.shape[0]
    n_correct = int((probs.argmax(axis=1) == y_batch).sum())
    dlogits = probs.astype(model.dtype, copy=True)
    dlogits[np.arange(n), y_batch] -= 1.0
    dlogits /= n
    model.backward(dlogits)
    adam_step(model.trainable_params(), model.collect_grads(), adam_state)
    model.zero_grads()
    return loss, n_correct


def train_model(
    model: RecurrentModel,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    seed: int,
) -> TrainResult:
    """Train in place with per-epoch shuffling and Adam.

    When ``validation_fraction`` > 0, a stratified slice of the training data
    is held out; training stops once validation accuracy has not improved for
    ``patience`` epochs and the best-epoch weights are restored. Randomness
    (validation split, shuffling, dropout) is drawn from named substreams of
    ``seed``.
    """
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature/label count mismatch")
    if x.shape[0] < 2:
        raise ValueError("need at least two training samples")

    use_validation = config.validation_fraction > 0.0 and config.patience > 0
    if use_validation:
        split_rng = substream(seed, "val_split")
        train_idx, val_idx = _stratified_validation_split(
            y, config.validation_fraction, split_rng
        )
        if val_idx.size == 0:
            use_validation = False
            train_idx = np.arange(x.shape[0])
    else:
        train_idx = np.arange(x.shape[0])
    x_train, y_train = x[train_idx], y[train_idx]

    adam_state = init_adam(
        model.trainable_params(),
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )
    shuffle_rng = substream(seed, "shuffle")
    dropout_rng = substream(seed, "dropout")

    history = []
    best_val = -1.0
    best_epoch = 0
    best_params = None
    epochs_run = 0
    eval_batch = max(config.batch_size, 128)
    for epoch in range(1, config.max_epochs + 1):
        epochs_run = epoch
        order = shuffle_rng.permutation(x_train.shape[0])
        losses = []
        correct = 0
        for batch_idx in _batches(x_train.shape[0], config.batch_size, order):
            loss, n_correct = train_step(
                model, x_train[batch_idx], y_train[batch_idx], adam_state, dropout_rng
            )
            losses.append(loss)
            correct += n_correct
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            # running accuracy from the training passes themselves (with
            # dropout active), not a separate full evaluation
            "train_accuracy": correct / x_train.shape[0],
        }
        if use_validation:
            entry["val_accuracy"] = evaluate_accuracy(model, x[val_idx], y[val_idx], eval_batch)
        history.append(entry)

        if use_validation:
            if entry["val_accuracy"] > best_val:
                best_val = entry["val_accuracy"]
                best_epoch = epoch
                best_params = {k: v.copy() for k, v in model.trainable_params().items()}
            elif epoch - best_epoch >= config.patience:
                break
        else:
            best_epoch = epoch
        if config.stop_on_perfect_train and entry["train_accuracy"] >= 0.98:
            # the running estimate sees dropout; confirm in eval mode
            exact = evaluate_accuracy(model, x_train, y_train, eval_batch)
            entry["train_accuracy_eval"] = exact
            if exact >= 1.0:
                break

    if best_params is not None:
        current = model.trainable_params()
        for key, value in best_params.items():
            current[key][...] = value
    return TrainResult(epochs_run=epochs_run, best_epoch=best_epoch, history=history)
