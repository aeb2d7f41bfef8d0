"""Symmetric FastICA (tanh contrast) for artifact removal.

Component selection is deliberately explicit: :func:`ica_reconstruct` takes
the exclusion set as an argument, and :func:`suggest_artifact_components`
offers an optional frontal-channel correlation heuristic. Nothing is removed
automatically.
"""

from dataclasses import dataclass

import numpy as np

from .containers import EegRecording
from .errors import DegenerateInputError
from .rng import substream

_RANK_TOL = 1e-10


@dataclass
class IcaDecomposition:
    """Result of a FastICA run.

    unmixing maps centered channel data to sources; mixing is its
    pseudo-inverse, so ``mixing @ sources + channel_means[:, None]``
    reconstructs the input when nothing is excluded.
    """

    unmixing: np.ndarray
    mixing: np.ndarray
    sources: np.ndarray
    channel_means: np.ndarray
    whitening: np.ndarray
    descriptor: str = ""

    @property
    def n_components(self) -> int:
        return self.unmixing.shape[0]


def _symmetric_decorrelation(w: np.ndarray) -> np.ndarray:
    # W <- (W W^T)^(-1/2) W keeps all rows orthonormal without favoring any
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, 1e-18, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fastica_decompose(
    recording: EegRecording,
    n_components: int,
    max_iter: int = 200,
    tol: float = 1e-4,
    seed: int = 0,
) -> IcaDecomposition:
    """Decompose a recording into independent components.

    Symmetric (parallel) FastICA with the tanh contrast function on whitened
    data. Deterministic for a fixed seed; the descriptor records whether the
    fixed-point iteration converged and after how many sweeps.
    """
    x = recording.data
    n_channels, n_samples = x.shape
    if not 1 <= n_components <= n_channels:
        raise ValueError(
            f"n_components must lie in [1, {n_channels}], got {n_components}"
        )
    if n_channels > n_samples:
        raise ValueError(f"need at least as many samples ({n_samples}) as channels ({n_channels})")
    if max_iter < 1 or tol <= 0:
        raise ValueError("max_iter must be >= 1 and tol positive")

    means = x.mean(axis=1)
    centered = x - means[:, np.newaxis]
    cov = centered @ centered.T / (n_samples - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    bad = np.flatnonzero(eigvals <= _RANK_TOL * max(eigvals[0], _RANK_TOL))
    if bad.size:
        raise DegenerateInputError(
            f"covariance is rank-deficient: whitened dimension {bad[0]} has "
            f"(near-)zero variance; check for duplicated or constant channels"
        )

    sel = slice(0, n_components)
    whitening = (eigvecs[:, sel] / np.sqrt(eigvals[sel])).T  # (k, n_channels)
    z = whitening @ centered

    rng = substream(seed, "ica_init")
    w = _symmetric_decorrelation(rng.standard_normal((n_components, n_components)))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        wz = w @ z
        g = np.tanh(wz)
        g_prime_mean = (1.0 - g**2).mean(axis=1)
        w_new = (g @ z.T) / n_samples - g_prime_mean[:, np.newaxis] * w
        w_new = _symmetric_decorrelation(w_new)
        delta = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if delta < tol:
            converged = True
            break

    unmixing = w @ whitening
    sources = unmixing @ centered
    mixing = np.linalg.pinv(unmixing)
    descriptor = (
        f"fastica(symmetric, tanh, n_components={n_components}, "
        f"iterations={iterations}, converged={converged}, tol={tol})"
    )
    return IcaDecomposition(
        unmixing=unmixing,
        mixing=mixing,
        sources=sources,
        channel_means=means,
        whitening=whitening,
        descriptor=descriptor,
    )


def ica_reconstruct(decomp: IcaDecomposition, excluded=()) -> np.ndarray:
    """Rebuild channel data with the given components removed.

    With an empty exclusion set this inverts the decomposition; excluding
    everything leaves only the channel means.
    """
    excluded = set(int(i) for i in excluded)
    for i in excluded:
        if not 0 <= i < decomp.n_components:
            raise ValueError(
                f"component index {i} out of range [0, {decomp.n_components})"
            )
    kept = [i for i in range(decomp.n_components) if i not in excluded]
    n_samples = decomp.sources.shape[1]
    if kept:
        data = decomp.mixing[:, kept] @ decomp.sources[kept, :]
    else:
        data = np.zeros((decomp.mixing.shape[0], n_samples))
    return data + decomp.channel_means[:, np.newaxis]


def suggest_artifact_components(
    decomp: IcaDecomposition,
    recording: EegRecording,
    frontal_channels,
    threshold: float = 0.7,
) -> list:
    """Flag components strongly correlated with designated frontal channels.

    A helper for ocular-artifact screening; returns component indices whose
    absolute Pearson correlation with any listed channel exceeds the
    threshold. Selection remains the caller's decision.
    """
    flagged = []
    centered_sources = decomp.sources - decomp.sources.mean(axis=1, keepdims=True)
    source_norms = np.linalg.norm(centered_sources, axis=1)
    for comp in range(decomp.n_components):
        if source_norms[comp] == 0:
            continue
        for ch in frontal_channels:
            sig = recording.data[int(ch)]
            sig = sig - sig.mean()
            denom = source_norms[comp] * np.linalg.norm(sig)
            if denom == 0:
                continue
            r = float(centered_sources[comp] @ sig / denom)
            if abs(r) > threshold:
                flagged.append(comp)
                break
    return flagged
