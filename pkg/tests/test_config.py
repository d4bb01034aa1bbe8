import pytest

from becotto.config import ConfigError, RunConfig, parse_config, write_config


def test_empty_config_gives_defaults():
    c = parse_config()
    assert (c.N, c.dt, c.L) == (64, 2.5e-3, 1.0)
    assert (c.omega_c, c.omega_h) == (0.334638, 0.337613)
    assert (c.T_c, c.T_h) == (0.003, 0.012)
    assert c.alpha == 1.0 and c.n_cycles == 4 and c.mass_policy == "fixed-total-mass"
    assert c.t_lambda is None and c.t_lambda_code > 0


def test_file_and_override_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nN = 32\n\ntau_ec = 40   # slower\nt_lambda = auto\n")
    c = parse_config(f, ["tau_ec=50", "checkpoint_strokes = no"])
    assert c.N == 32 and c.tau_ec == 50.0 and c.t_lambda is None and c.checkpoint_strokes is False


@pytest.mark.parametrize("flags, match", [
    (["omega_c=0.4"], "omega_h > omega_c"),
    (["alpha=0"], "0 < alpha <= 1"),
    (["T_h=0.001"], "T_h > T_c"),
    (["bogus=1"], "unknown"),
    (["N=12.5"], "cannot parse"),
    (["justtext"], "key = value"),
    (["heat_convention=weird"], "heat_convention"),
])
def test_invalid_configs(flags, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(None, flags)


def test_echo_roundtrip(tmp_path):
    c = parse_config(None, ["N=32", "seed=9", "alpha=0.25"])
    path = write_config(c, tmp_path)
    back = parse_config(path)
    assert back.N == 32 and back.seed == 9 and back.alpha == 0.25
    assert back.t_lambda == c.t_lambda_code
    assert isinstance(back, RunConfig)
    assert back.cycle_config().alpha == 0.25
