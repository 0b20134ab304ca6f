"""Pipeline configuration: JSON config file plus flag overrides; flags win.

A seed is always explicit: no command falls back to wall-clock entropy, so
identical config + seed reruns produce byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass
class PipelineConfig:
    seed: int
    corpus: str | None = None
    run_dir: str = "runs/default"
    cleaning: dict = field(default_factory=lambda: {
        "budget_lsh": 60, "budget_title": 50, "propagate_sim": 0.90,
        "keywords_file": None, "n_bits": 16})
    split: dict = field(default_factory=lambda: {
        "p": 0.7, "tau": 0.2, "n_bits": 16, "n_tables": 8, "exact": False})
    benchmark: dict = field(default_factory=lambda: {
        "delta": 0.15, "k_percent": 10.0, "tau_html": 0.2,
        "rates": [0.05, 0.1, 0.5, 1.0, 5.0],
        "m_map": {"0.05": 241, "0.1": 124, "0.5": 25, "1.0": 12, "5.0": 2},
        "margin": 0.01, "confidence": 0.95})
    model: dict = field(default_factory=lambda: {
        "lam": 1e-4, "tolerance": 1e-3, "class_weight": "balanced",
        "k_top": 300_000})

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")
        if not (0 < self.split["p"] < 1):
            raise ValueError(f"split.p must be in (0, 1), got {self.split['p']}")
        if not (0 <= self.split["tau"] <= 2):
            raise ValueError(f"split.tau must be in [0, 2], got {self.split['tau']}")
        if not (0 < self.benchmark["delta"] < 0.5):
            raise ValueError(f"benchmark.delta must be in (0, 0.5), got "
                             f"{self.benchmark['delta']}")
        if not (0 <= self.benchmark["k_percent"] <= 100):
            raise ValueError("benchmark.k_percent must be in [0, 100]")
        if not (0 <= self.cleaning["propagate_sim"] <= 1):
            raise ValueError("cleaning.propagate_sim must be in [0, 1]")


def load_config(path: str | Path | None, overrides: dict | None = None,
                seed: int | None = None) -> PipelineConfig:
    """Build the config from an optional JSON file and explicit overrides.

    ``overrides`` maps dotted keys ("split.tau") or top-level names to
    values; a seed must come from the file, the overrides, or the argument.
    """
    data: dict = {}
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    if seed is not None:
        data["seed"] = seed
    if "seed" not in data:
        raise ValueError("a seed is required (config file or --seed)")
    config = PipelineConfig(seed=data["seed"])
    for section in ("corpus", "run_dir"):
        if section in data:
            setattr(config, section, data[section])
    for section in ("cleaning", "split", "benchmark", "model"):
        if section in data:
            getattr(config, section).update(data[section])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            getattr(config, section)[name] = value
        else:
            setattr(config, key, value)
    config.validate()
    return config


def rates_and_m(config: PipelineConfig) -> tuple[list, dict]:
    rates = [float(r) for r in config.benchmark["rates"]]
    m_map = {float(k): int(v) for k, v in config.benchmark["m_map"].items()}
    return rates, {r: m_map[r] for r in rates}
