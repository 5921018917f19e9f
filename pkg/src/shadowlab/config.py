"""Declarative experiment configuration, read from TOML.

Grammar (all sections except ``[map]`` are optional)::

    seed = 0                      # master seed, overridden by --seed
    output = "results/sweep.csv"  # overridden by --out

    [map]
    family = "nonlinear"          # linear | nonlinear | cat
    k = 2                         # linear only
    a = 0.05                      # nonlinear only

    [noise]
    shape = "uniform-ball"        # uniform-ball | cosine-bump
    epsilon = [0.1, 0.05, 0.02]   # positive, strictly descending; a bare number is allowed

    [run]
    n = 10000                     # orbit length / Monte Carlo samples, >= 1000
    burn_in = 10000
    seeds = 10                    # seed replicas per estimate
    orbits = 100                  # random orbits in simulate / shadow
    ulam_k = 4096                 # cells per axis (default 1024 on S^1, 128 on T^2)
    ulam_q = 4                    # quadrature points per cell per axis
    birkhoff_log2 = [10, 20]      # Birkhoff schedule n = 2^10, ..., 2^20

    [dictionary]
    max_k = 8                     # highest frequency (per axis on the torus)
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .dynamics import MapSpec, map_from_config
from .errors import UsageError
from .noise import SHAPES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ExperimentConfig", "load_config", "config_from_dict"]

MIN_N = 1000
SECTIONS = {
    "map": None,
    "noise": {"shape", "epsilon"},
    "run": {"n", "burn_in", "seeds", "orbits", "ulam_k", "ulam_q", "birkhoff_log2"},
    "dictionary": {"max_k"},
}
TOP_KEYS = {"seed", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    map: dict
    shape: str = "uniform-ball"
    epsilons: tuple = (0.01,)
    n: int = 10_000
    burn_in: int = 10_000
    seeds: int = 10
    orbits: int = 100
    ulam_k: int = 1024
    ulam_q: int = 4
    birkhoff_log2: tuple = (10, 20)
    max_k: int | None = None
    seed: int = 0
    output: str | None = None

    @property
    def fmap(self) -> MapSpec:
        return map_from_config(self.map)

    @property
    def dim(self) -> int:
        return self.fmap.space.dim

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return _replace(self, seed=_int(seed, "seed", 0))

    def with_output(self, output: str) -> "ExperimentConfig":
        return _replace(self, output=str(output))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilons"] = list(self.epsilons)
        d["birkhoff_log2"] = list(self.birkhoff_log2)
        return d

    def digest(self) -> str:
        """SHA-256 of the normalized configuration, output path excluded."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _replace(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    d = asdict(cfg)
    d.update(kw)
    return ExperimentConfig(**d)


def _int(v, name: str, lo: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise UsageError(f"{name} must be an integer >= {lo}, got {v!r}")
    return v


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed config mapping and build an :class:`ExperimentConfig`."""
    unknown = set(raw) - set(SECTIONS) - TOP_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if "map" not in raw or not isinstance(raw["map"], dict):
        raise UsageError("config needs a [map] section")
    for sec, keys in SECTIONS.items():
        body = raw.get(sec, {})
        if not isinstance(body, dict):
            raise UsageError(f"[{sec}] must be a table")
        if keys is not None and set(body) - keys:
            raise UsageError(f"unknown keys in [{sec}]: {sorted(set(body) - keys)}")
    fmap = map_from_config(raw["map"])
    noise = raw.get("noise", {})
    run = raw.get("run", {})
    shape = noise.get("shape", "uniform-ball")
    if shape not in SHAPES:
        raise UsageError(f"unknown kernel shape {shape!r}; choose from {SHAPES}")
    eps = noise.get("epsilon", [0.01])
    eps = eps if isinstance(eps, list) else [eps]
    if not eps or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in eps):
        raise UsageError("[noise] epsilon must be a number or a nonempty list of numbers")
    eps = tuple(float(e) for e in eps)
    if any(not 0.0 < e < 0.25 for e in eps):
        raise UsageError(f"epsilon values must lie in (0, 0.25), got {list(eps)}")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise UsageError(f"epsilon values must be strictly descending, got {list(eps)}")
    log2 = run.get("birkhoff_log2", [10, 20])
    if (
        not isinstance(log2, list)
        or len(log2) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in log2)
        or not 1 <= log2[0] < log2[1] <= 26
    ):
        raise UsageError(f"birkhoff_log2 must be [lo, hi] with 1 <= lo < hi <= 26, got {log2!r}")
    max_k = raw.get("dictionary", {}).get("max_k")
    if max_k is not None:
        max_k = _int(max_k, "max_k", 1)
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise UsageError("output must be a string path")
    cfg = ExperimentConfig(
        map=dict(raw["map"]),
        shape=shape,
        epsilons=eps,
        n=_int(run.get("n", 10_000), "n", MIN_N),
        burn_in=_int(run.get("burn_in", 10_000), "burn_in", 0),
        seeds=_int(run.get("seeds", 10), "seeds", 1),
        orbits=_int(run.get("orbits", 100), "orbits", 1),
        ulam_k=_int(run.get("ulam_k", 1024 if fmap.space.dim == 1 else 128), "ulam_k", 16),
        ulam_q=_int(run.get("ulam_q", 4), "ulam_q", 1),
        birkhoff_log2=tuple(log2),
        max_k=max_k,
        seed=_int(raw.get("seed", 0), "seed", 0),
        output=output,
    )
    if cfg.dim == 2 and cfg.ulam_k > 512:
        raise UsageError(f"ulam_k={cfg.ulam_k} is too large for a torus grid (max 512)")
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        raw = tomllib.loads(text.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"invalid config {p}: {exc}") from None
    return config_from_dict(raw)
