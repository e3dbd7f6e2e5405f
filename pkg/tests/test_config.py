import pytest

from synthod.config import RunConfig, load_config
from synthod.core import ConfigError


def test_defaults():
    cfg = load_config(text="")
    assert cfg == RunConfig()
    assert cfg.sec_config.pace == cfg.pace


def test_parse_sections():
    cfg = load_config(text="""
[run]
seed = 11
[gmm]
m_range = 1, 3
[scm]
activations = tanh, sigmoid
[curriculum]
bins = 2-11, 11-21
[pace]
function = linear
[learner]
steps_per_update = none
optimizer = sgd
""")
    assert cfg.run.seed == 11
    assert cfg.gmm.m_range == (1, 3)
    assert cfg.scm.activations == ("tanh", "sigmoid")
    assert cfg.curriculum.bins == ((2, 11), (11, 21))
    assert cfg.sec_config.pace.function == "linear"
    assert cfg.learner.steps_per_update is None and cfg.learner.optimizer == "sgd"


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1\n",
    "[run]\nbogus = 1\n",
    "[run]\nseed = abc\n",
    "[gmm]\nm_range = 0, 3\n",
    "[curriculum]\nbins = 2-200\n",
    "[sec]\npolicy = greedy\n",
    "[learner]\noptimizer = rmsprop\n",
    "not an ini",
])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")
