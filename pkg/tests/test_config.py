from pathlib import Path

import pytest

from shadowlab.config import config_from_dict, load_config
from shadowlab.errors import UsageError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
BASE = {"map": {"family": "nonlinear", "a": 0.05}}


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert list(cfg.epsilons) == sorted(cfg.epsilons, reverse=True)
    assert cfg.n >= 1000


def test_defaults():
    cfg = config_from_dict(BASE)
    assert cfg.epsilons == (0.01,) and cfg.ulam_k == 1024 and cfg.seed == 0
    assert config_from_dict({"map": {"family": "cat"}}).ulam_k == 128
    assert config_from_dict({**BASE, "noise": {"epsilon": 0.02}}).epsilons == (0.02,)


@pytest.mark.parametrize(
    "raw",
    [
        {},
        {"map": {"family": "tent"}},
        {**BASE, "extra": 1},
        {**BASE, "run": {"nn": 5}},
        {**BASE, "noise": {"epsilon": [0.01, 0.02]}},
        {**BASE, "noise": {"epsilon": [0.02, 0.02]}},
        {**BASE, "noise": {"epsilon": [0.0]}},
        {**BASE, "noise": {"epsilon": [0.3]}},
        {**BASE, "noise": {"epsilon": []}},
        {**BASE, "noise": {"epsilon": ["x"]}},
        {**BASE, "noise": {"shape": "gaussian"}},
        {**BASE, "run": {"n": 999}},
        {**BASE, "run": {"n": 1e4}},
        {**BASE, "run": {"seeds": 0}},
        {**BASE, "run": {"ulam_k": 8}},
        {**BASE, "run": {"birkhoff_log2": [10]}},
        {**BASE, "run": {"birkhoff_log2": [12, 10]}},
        {**BASE, "dictionary": {"max_k": 0}},
        {**BASE, "seed": -1},
        {**BASE, "output": 3},
        {"map": {"family": "cat"}, "run": {"ulam_k": 1024}},
        {"map": "linear"},
    ],
)
def test_invalid_configs(raw):
    with pytest.raises(UsageError):
        config_from_dict(raw)


def test_load_errors(tmp_path):
    with pytest.raises(UsageError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[map\nfamily=1")
    with pytest.raises(UsageError):
        load_config(bad)


def test_digest_and_overrides():
    a = config_from_dict({**BASE, "output": "a.csv"})
    b = config_from_dict({**BASE, "output": "b.csv"})
    assert a.digest() == b.digest()
    assert a.with_seed(3).digest() != a.digest()
    assert a.with_seed(3).seed == 3 and a.with_output("x.csv").output == "x.csv"
    with pytest.raises(UsageError):
        a.with_seed(-2)
