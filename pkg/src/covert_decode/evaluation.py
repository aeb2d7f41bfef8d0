"""Cross-validation plans, stratified splits, accuracy/confusion metrics, and
the paired t-test with Bonferroni correction."""

from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats

from .rng import substream


@dataclass
class FoldPlan:
    """Partition of trials into k stratified folds (assignments[i] = fold id)."""

    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Deterministic stratified k-fold: per-class counts differ by at most one
    across folds."""
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValueError(f"cross-validation needs k >= 2, got k={k}")
    rng = substream(seed, "kfold")
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            raise ValueError(
                f"class {cls} has only {members.size} trials; needs at least k={k}"
            )
        members = members[rng.permutation(members.size)]
        assignments[members] = np.arange(members.size) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def holdout_split(labels, test_fraction: float, seed: int):
    """Stratified train/test split; |test| = round(test_fraction * N) up to
    per-class rounding. Returns (train_indices, test_indices), both sorted."""
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = substream(seed, "holdout")
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        n_test = int(round(test_fraction * members.size))
        n_test = min(max(n_test, 0), members.size - 1)
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    if not test_idx:
        raise ValueError(f"test_fraction {test_fraction} produced an empty test set")
    return (
        np.sort(np.asarray(train_idx, dtype=np.int64)),
        np.sort(np.asarray(test_idx, dtype=np.int64)),
    )


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with true classes as rows, predictions as columns."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("prediction/label length mismatch")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def accuracy_from_confusion(cm: np.ndarray) -> float:
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


def paired_t_test(a, b):
    """Two-sided paired t-test.

    Returns (t, p) with t = mean(d) / (sd(d) / sqrt(n)), d = a - b, df = n-1.
    A zero-variance difference yields t = 0, p = 1 when the mean difference is
    zero, otherwise t = +/-inf, p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired t-test needs two equal-length 1-D samples")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return float(np.sign(mean) * np.inf), 0.0
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * float(sp_stats.t.sf(abs(t), df=n - 1))
    return float(t), min(p, 1.0)


def bonferroni(p_values, m: int):
    """Family-wise correction: p' = min(1, m * p) for each raw p."""
    if m < 1:
        raise ValueError(f"family size must be >= 1, got {m}")
    return [min(1.0, m * float(p)) for p in p_values]
