"""Experiment configuration: a sectioned key-value file, named presets for
the shipped hyperparameter defaults, and a content fingerprint that tags
every artifact an experiment writes.
"""

from __future__ import annotations

import configparser
import zlib
from dataclasses import dataclass, field

from .errors import ConfigError

# defaults per synthetic setup: (b, k, hidden widths, rho)
PRESETS = {
    "synth_d50_n100": dict(d=50, n=100, b=10, k=3, hidden=(20, 20, 20), rho=0.20),
    "synth_d100_n250": dict(d=100, n=250, b=10, k=4, hidden=(20, 20, 20), rho=0.50),
    "synth_d150_n500": dict(d=150, n=500, b=5, k=3, hidden=(20, 20), rho=0.20),
    "synth_d200_n1000": dict(d=200, n=1000, b=3, k=15, hidden=(20, 20, 20, 20), rho=0.50),
    "synth_d250_n1500": dict(d=250, n=1500, b=3, k=20, hidden=(20, 20, 20), rho=0.50),
    "desk": dict(d=20, n=500, b=5, k=3, hidden=(20, 20), rho=0.50),
}


@dataclass
class ExperimentConfig:
    # dgp
    d: int = 20
    n: int = 500
    seed: int = 0
    test_size: int = 2000
    # ebm
    k: int = 3
    b: int = 5
    rho: float = 0.5
    hidden: tuple = (20, 20)
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 64
    b_seed: int = 42
    patience: int = 30
    # learners
    learners: tuple = ("t", "x", "dr", "r")
    base_kind: str = "kernel"
    base_lam: float = 1e-2
    base_cv: bool = True
    # eval
    runs: int = 3
    # io
    out_dir: str = "results"

    def validate(self):
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if not self.k < self.d:
            raise ConfigError(f"k={self.k} must be < d={self.d}")
        if self.n < 2 * self.k:
            raise ConfigError(f"n={self.n} must be >= 2k={2 * self.k}")
        for name in ("b", "epochs", "batch_size", "runs", "test_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigError("rho must be in (0, 1]")
        if self.base_kind not in ("ridge", "kernel"):
            raise ConfigError(f"unknown base regressor {self.base_kind!r}")
        bad = [l for l in self.learners if l not in ("t", "x", "dr", "r")]
        if bad:
            raise ConfigError(f"unknown learners {bad}; valid kinds: t, x, dr, r")
        return self

    def canonical(self) -> str:
        items = [
            f"d={self.d}", f"n={self.n}", f"seed={self.seed}",
            f"test_size={self.test_size}", f"k={self.k}", f"b={self.b}",
            f"rho={self.rho!r}", f"hidden={','.join(map(str, self.hidden))}",
            f"epochs={self.epochs}", f"lr={self.lr!r}",
            f"batch_size={self.batch_size}", f"b_seed={self.b_seed}",
            f"patience={self.patience}",
            f"learners={','.join(self.learners)}",
            f"base_kind={self.base_kind}", f"base_lam={self.base_lam!r}",
            f"base_cv={self.base_cv}", f"runs={self.runs}",
        ]
        return ";".join(items)

    def fingerprint(self) -> str:
        return format(zlib.crc32(self.canonical().encode()), "08x")


def _get(parser, section, key, conv, current):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError):
            raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None
    return current


def _parse_hidden(raw) -> tuple:
    return tuple(int(w) for w in str(raw).replace("-", ",").split(",") if w.strip())


def _parse_bool(raw) -> bool:
    v = str(raw).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def load_config(path=None, preset=None, seed_override=None,
                out_override=None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        for key, value in PRESETS[preset].items():
            setattr(cfg, key, value)
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ConfigError(f"config file not found: {path}")
        if parser.has_option("DEFAULT", "preset") or parser.has_option("ebm", "preset"):
            name = (parser.get("ebm", "preset", fallback=None)
                    or parser.get("DEFAULT", "preset"))
            if name not in PRESETS:
                raise ConfigError(f"unknown preset {name!r}")
            for key, value in PRESETS[name].items():
                setattr(cfg, key, value)
        cfg.d = _get(parser, "dgp", "d", int, cfg.d)
        cfg.n = _get(parser, "dgp", "n", int, cfg.n)
        cfg.seed = _get(parser, "dgp", "seed", int, cfg.seed)
        cfg.test_size = _get(parser, "dgp", "test_size", int, cfg.test_size)
        cfg.k = _get(parser, "ebm", "k", int, cfg.k)
        cfg.b = _get(parser, "ebm", "b", int, cfg.b)
        cfg.rho = _get(parser, "ebm", "rho", float, cfg.rho)
        cfg.hidden = _get(parser, "ebm", "hidden", _parse_hidden, cfg.hidden)
        cfg.epochs = _get(parser, "ebm", "epochs", int, cfg.epochs)
        cfg.lr = _get(parser, "ebm", "lr", float, cfg.lr)
        cfg.batch_size = _get(parser, "ebm", "batch", int, cfg.batch_size)
        cfg.b_seed = _get(parser, "ebm", "b_seed", int, cfg.b_seed)
        cfg.patience = _get(parser, "ebm", "patience", int, cfg.patience)
        cfg.learners = _get(parser, "learners", "kinds",
                            lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
                            cfg.learners)
        cfg.base_kind = _get(parser, "learners", "base", str, cfg.base_kind)
        cfg.base_lam = _get(parser, "learners", "lam", float, cfg.base_lam)
        cfg.base_cv = _get(parser, "learners", "cv", _parse_bool, cfg.base_cv)
        cfg.runs = _get(parser, "eval", "runs", int, cfg.runs)
        cfg.out_dir = _get(parser, "io", "out_dir", str, cfg.out_dir)
    if seed_override is not None:
        cfg.seed = int(seed_override)
    if out_override is not None:
        cfg.out_dir = str(out_override)
    return cfg.validate()
