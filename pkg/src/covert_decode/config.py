"""Flat key-value run configuration.

Every key has a typed default; unknown keys are rejected so typos cannot
silently fall back to defaults. The effective configuration (defaults plus
overrides) is embedded verbatim in every report.
"""

from pathlib import Path

from .errors import ConfigError

PIPELINE_DEFAULTS = {
    "seed": 0,
    # preprocessing
    "sample_rate_hz": 500.0,
    "notch_hz": 50.0,
    "notch_q": 30.0,
    "bandpass_low_hz": 0.5,
    "bandpass_high_hz": 80.0,
    "bandpass_order": 4,
    "ica_enabled": True,
    "ica_components": 0,  # 0 means all channels
    "ica_max_iter": 200,
    "ica_tol": 1e-4,
    "ica_exclude": "",  # comma-separated component indices
    "epoch_seconds": 2.0,
    "baseline_ms": 100.0,
    # features
    "env_floor_rel": 1e-12,
    # model
    "model": "bilstm",
    "hidden_units": "512,256",
    "dropout_rates": "0.3,0.2",
    "merge_mode": "concat",
    "n_classes": 5,
    # training
    "learning_rate": 1e-4,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "batch_size": 32,
    "max_epochs": 60,
    "patience": 10,
    "validation_fraction": 0.1,
    "cv_folds": 5,
    "test_fraction": 0.2,
    # transfer
    "budgets": "0.15,0.2,0.25,0.3",
    "transfer_seeds": 5,
    "fine_tune_max_epochs": 40,
    "reinit_head": False,
    # execution
    "jobs": 1,
}

SYNTH_DEFAULTS = {
    "seed": 0,
    "n_classes": 5,
    "trials_per_class": 80,
    "n_channels": 64,
    "sample_rate_hz": 500.0,
    "epoch_seconds": 2.0,
    "components_per_class": 2,
    "cross_condition_rho": 0.8,
    "attenuation": 0.6,
    "noise_sigma": 0.5,
    "envelope_bandwidth_hz": 2.0,
    "envelope_jitter": 0.2,
    "phase_jitter": 0.6,
    "gap_seconds": 0.25,
}


def _parse_value(key: str, raw, default):
    if isinstance(raw, type(default)) and not isinstance(raw, str):
        return raw
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


class RunConfig:
    """Typed flat configuration backed by a defaults table."""

    def __init__(self, defaults=PIPELINE_DEFAULTS, overrides=None):
        self._defaults = dict(defaults)
        self._values = dict(defaults)
        if overrides:
            self.update(overrides)

    def update(self, overrides: dict):
        for key, raw in overrides.items():
            if key not in self._defaults:
                raise ConfigError(f"unknown configuration key: {key!r}")
            self._values[key] = _parse_value(key, raw, self._defaults[key])
        return self

    def __getitem__(self, key: str):
        if key not in self._values:
            raise ConfigError(f"unknown configuration key: {key!r}")
        return self._values[key]

    def effective(self) -> dict:
        """Plain dict of the full effective configuration (for reports)."""
        return dict(self._values)

    def float_list(self, key: str):
        text = str(self[key]).strip()
        if not text:
            return []
        try:
            return [float(part) for part in text.split(",") if part.strip() != ""]
        except ValueError as exc:
            raise ConfigError(f"bad float list for {key}: {text!r}") from exc

    def int_list(self, key: str):
        text = str(self[key]).strip()
        if not text:
            return []
        try:
            return [int(part) for part in text.split(",") if part.strip() != ""]
        except ValueError as exc:
            raise ConfigError(f"bad int list for {key}: {text!r}") from exc


def parse_kv_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line.rstrip()!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_kv_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_kv_text(path.read_text())
