"""key=value run configuration parsing."""

import pytest

from sketchfem.config import RunConfig, parse_config
from sketchfem.errors import ConfigError

FULL = """\
# benchmark run
mesh = meshes/square.txt
bundle = out/square.bundle
output_csv = out/report.csv
n_queries = 100
seed = 42
epsilon = 0.3
beta = 0.5
rho = 50
forcing = ball
threads = 2
field = uniform
field_lo = 0.1
field_hi = 100      # inline comment
"""


def test_parse_full_config():
    cfg = parse_config(FULL)
    assert cfg.mesh_path == "meshes/square.txt"
    assert cfg.bundle_path == "out/square.bundle"
    assert cfg.output_csv == "out/report.csv"
    assert cfg.n_queries == 100
    assert cfg.seed == 42
    assert cfg.c is None and cfg.epsilon == 0.3
    assert cfg.beta == 0.5
    assert cfg.rho == 50
    assert cfg.forcing == "ball"
    assert cfg.threads == 2
    assert cfg.field.kind == "uniform"
    assert cfg.field.params == {"lo": 0.1, "hi": 100.0}


def test_defaults():
    cfg = parse_config("mesh=a\nbundle=b\noutput_csv=c\nn_queries=1\nc=100\n")
    assert cfg.seed == 0
    assert cfg.beta == 0.5
    assert cfg.rho is None
    assert cfg.forcing == "ball"
    assert cfg.threads == 1
    assert cfg.field.kind == "uniform"
    assert cfg.field.params == {}
    assert isinstance(cfg, RunConfig)


def test_c_and_epsilon_are_exclusive():
    base = "mesh=a\nbundle=b\noutput_csv=c\nn_queries=1\n"
    with pytest.raises(ConfigError, match="either c or epsilon"):
        parse_config(base)
    with pytest.raises(ConfigError, match="not both"):
        parse_config(base + "c=100\nepsilon=0.3\n")


def test_rejects_malformed_lines():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config("just a line\n")
    with pytest.raises(ConfigError, match="empty"):
        parse_config("mesh =\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("mesh=a\nmesh=b\n")


def test_rejects_unknown_and_bad_values():
    base = "mesh=a\nbundle=b\noutput_csv=c\nn_queries=1\nc=100\n"
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config(base + "wat=1\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config(base.replace("n_queries=1", "n_queries=ten"))
    with pytest.raises(ConfigError, match="missing required"):
        parse_config("mesh=a\nbundle=b\nn_queries=1\nc=5\n")
    with pytest.raises(ConfigError):
        parse_config(base.replace("n_queries=1", "n_queries=0"))
    with pytest.raises(ConfigError):
        parse_config(base.replace("c=100", "c=0"))


def test_field_keys_typed():
    base = ("mesh=a\nbundle=b\noutput_csv=c\nn_queries=1\nc=10\n"
            "field = lognormal\nfield_nu = 1.5\nfield_kl_modes = 30\n")
    cfg = parse_config(base)
    assert cfg.field.kind == "lognormal"
    assert cfg.field.params == {"nu": 1.5, "kl_modes": 30}
    assert isinstance(cfg.field.params["kl_modes"], int)
