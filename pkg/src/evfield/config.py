"""Structured run configuration: INI sections with a strict key schema.

Unknown sections or keys are rejected so typos fail loudly.  All physical
quantities use base units: seconds, Hz, log-radiance units, world units,
pixels.  Paths are resolved relative to the configuration file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

_SCHEMA = {
    "scene": {
        "kind": (str, "ramp"),            # ramp | fourier | voxel_blobs
        "slope": (float, 1.0),            # ramp: log-radiance per second
        "offset": (float, 0.0),
        "harmonics": (int, 6),            # fourier source band limit
        "amplitude": (float, 1.2),
        "decay": (float, 1.0),
        "base_freq": (int, 2),
        "source_seed": (int, 0),
        "resolution": (int, 32),          # voxel_blobs ground-truth grid
        "extent": (float, 1.0),
        "blobs": (int, 3),
        "background": (float, 0.8),
    },
    "sensor": {
        "width": (int, 16),
        "height": (int, 16),
        "color_filter": (str, "none"),
        "c_neg": (float, 0.25),
        "ratio": (float, 1.0),
        "c_pos": (float, None),           # overrides ratio when given
        "sigma": (float, 0.0),
        "refractory": (float, 0.0),       # seconds
        "seed": (int, 0),
    },
    "trajectory": {
        "radius": (float, 4.0),
        "height_span": (float, 2.0),
        "revolutions": (float, 4.0),
        "v_b": (float, 1.0),              # azimuth speed oscillation base
        "f": (float, 1.0),                # oscillation frequency, Hz
        "duration": (float, 4.0),
        "rate": (float, 1000.0),
    },
    "camera": {
        "fov_x_deg": (float, 45.0),
    },
    "simulate": {
        "t0": (float, 0.0),
        "workers": (int, 1),
    },
    "train": {
        "field": (str, "voxel"),          # voxel | signal
        "resolution": (int, 32),
        "harmonics": (int, 8),
        "iterations": (int, 4000),
        "lr": (float, 0.01),
        "batch_budget": (int, 65536),
        "lambda_diff": (float, 1.0),
        "lambda_grad": (float, 0.001),
        "weight_decay": (float, 1e-6),
        "learn_threshold": (bool, False),
        "learn_refractory": (bool, False),
        "init_ratio": (float, None),      # defaults to the sensor ratio
        "tau": (float, None),             # assumed refractory; defaults to sensor value
        "loss_mode": (str, "normalized"),
        "accumulation_window": (float, 1.0 / 24.0),
        "n_samples": (int, 64),
        "seed": (int, 0),
    },
    "output": {
        "events": (str, "events.ernf"),
        "poses": (str, "poses.txt"),
        "checkpoint": (str, "field.evfd"),
        "sidecar": (str, "train.evts"),
        "trace": (str, "trace.txt"),
    },
}

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "on": True,
               "false": False, "0": False, "no": False, "off": False}


def _convert(section, key, kind, raw):
    try:
        if kind is bool:
            word = raw.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError(raw)
            return _BOOL_WORDS[word]
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from exc


@dataclass
class RunConfig:
    values: dict
    base_dir: Path

    def __getitem__(self, section):
        return self.values[section]

    def path(self, section, key) -> Path:
        return (self.base_dir / self.values[section][key]).resolve()


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values = {section: {key: default for key, (_, default) in keys.items()}
              for section, keys in _SCHEMA.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kind, _ = _SCHEMA[section][key]
            values[section][key] = _convert(section, key, kind, raw)
    return RunConfig(values, path.parent.resolve())
