"""Run-config parsing: strict keys, lossless round-trips."""

import json

import pytest

from ckls import ConfigError, load_config, parse_config


def base_config():
    return {
        "params": {"a": 1.0, "b": 0.2, "sigma": 0.5, "gamma": 1.5, "r0": 1.0, "C": 1.0},
        "grid": {"t_end": 0.5, "n_steps": 64},
        "n_paths": 100,
        "seed": 42,
    }


class TestParse:
    def test_minimal_with_defaults(self):
        cfg = parse_config(base_config())
        assert cfg.params.gamma == 1.5
        assert cfg.c == 1.0
        assert cfg.delta_rule == "derived"
        assert cfg.aux_variant == "derived"
        assert cfg.scale_variant == "paper"
        assert cfg.output_format == "csv"

    def test_c_optional(self):
        obj = base_config()
        del obj["params"]["C"]
        assert parse_config(obj).c is None

    def test_roundtrip_lossless(self):
        obj = base_config()
        obj["delta_rule"] = "paper"
        obj["output"] = {"format": "binary", "path": "x.bin"}
        cfg = parse_config(obj)
        again = parse_config(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda o: o.update(bogus=1),
            lambda o: o["params"].update(kappa=0.5),
            lambda o: o["grid"].update(dt=0.1),
            lambda o: o.update(output={"format": "csv", "compression": "gz"}),
        ],
    )
    def test_unknown_keys_rejected(self, mutate):
        obj = base_config()
        mutate(obj)
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(obj)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda o: o.pop("params"),
            lambda o: o.pop("grid"),
            lambda o: o.pop("n_paths"),
            lambda o: o.pop("seed"),
        ],
    )
    def test_missing_required_rejected(self, mutate):
        obj = base_config()
        mutate(obj)
        with pytest.raises(ConfigError, match="missing required"):
            parse_config(obj)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda o: o["params"].update(C=0.0),
            lambda o: o["params"].update(a=-1.0),
            lambda o: o["grid"].update(n_steps=0),
            lambda o: o.update(n_paths=0),
            lambda o: o.update(seed=-1),
            lambda o: o.update(delta_rule="guessed"),
            lambda o: o.update(output={"format": "parquet"}),
        ],
    )
    def test_bad_values_rejected(self, mutate):
        obj = base_config()
        mutate(obj)
        with pytest.raises(ConfigError):
            parse_config(obj)


class TestLoad:
    def test_load_from_file(self, tmp_path):
        dest = tmp_path / "cfg.json"
        dest.write_text(json.dumps(base_config()))
        assert load_config(dest).seed == 42

    def test_bad_json(self, tmp_path):
        dest = tmp_path / "cfg.json"
        dest.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(dest)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.json")
