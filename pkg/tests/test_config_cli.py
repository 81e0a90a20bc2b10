import csv

import numpy as np
import pytest
import yaml

from coopsense.cli import main
from coopsense.config import crossroad_config, desk_config, load_config, parse_config
from coopsense.scenario import ConfigError

TINY = {"seed": 3, "scenario": {"n_s": 1, "targets": [
    {"kind": "pedestrian", "initial": [0.0, 0.0, 1.0, 0.0]}]},
    "channel": {"multipath": False},
    "tracking": {"tracker": "phd", "births": {"positions": [[0.0, 0.0]]}},
    "experiment": {"n_scans": 2, "burn_in": 0}}


def _write(tmp_path, data, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def test_defaults():
    cfg = parse_config({})
    assert cfg.n_scans == 200
    assert cfg.trackers == ("phd", "mbm")
    assert cfg.tracking.lambda_c == 0.1
    assert cfg.build_ofdm().k_s == 1901
    motion, meas = cfg.build_models()
    assert motion.dt == pytest.approx(0.05) and meas.p_d == 0.99


def test_time_fraction_sets_epochs():
    cfg = parse_config({"resources": {"rho_t": 0.5}})
    assert cfg.t_meas == pytest.approx(0.1)
    assert cfg.n_scans == 100


@pytest.mark.parametrize("data, path", [
    ({"resources": {"rho_p": 1.5}}, "resources.rho_p"),
    ({"tracking": {"lambda_c": 0}}, "tracking.lambda_c"),
    ({"experiment": {"n_scans": 0}}, "experiment.n_scans"),
    ({"scenario": {"targets": [{"kind": "bus", "initial": [0, 0, 0, 0]}]}}, "scenario.targets.0.kind"),
    ({"fusion": {"gamma_s": -1}}, "fusion.gamma_s"),
    ({"bogus": 1}, "bogus"),
])
def test_errors_carry_field_paths(data, path):
    with pytest.raises(ConfigError) as err:
        parse_config(data)
    assert path in str(err.value)


def test_n_s_bounded_by_ring():
    with pytest.raises(ConfigError):
        parse_config({"scenario": {"ring_size": 3, "n_s": 4}})


def test_with_value():
    cfg = parse_config({})
    assert cfg.with_value("rho_p", 0.2).resources.rho_p == 0.2
    assert cfg.with_value("gamma_s", 1e-7).fusion.gamma_s == 1e-7
    c = cfg.with_value("n_s", 8)
    assert c.scenario.n_s == 8 and c.scenario.ring_size == 8
    with pytest.raises(ConfigError):
        cfg.with_value("n_s", 2.5)
    with pytest.raises(ConfigError):
        cfg.with_value("xi_d", 1.0)
    with pytest.raises(ConfigError):
        cfg.with_value("rho_p", 2.0).validated()


def test_builders():
    cfg = desk_config()
    sc = cfg.build_scenario()
    assert [b.index for b in sc.stations] == [0, 2, 4]
    assert len(sc.targets) == 3
    assert len(cfg.build_births("phd").components) == 4
    assert cfg.build_births("mbm").components[0].weight == 1e-4
    assert cfg.build_env().n_paths == 1
    assert len(crossroad_config().build_scenario().stations) == 6


def test_load_config(tmp_path):
    assert load_config(_write(tmp_path, TINY)).seed == 3
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_example_config_matches_desk_config():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "configs" / "desk.yaml"
    assert load_config(path) == desk_config()


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_cli_run_and_determinism(tmp_path):
    cfg = _write(tmp_path, TINY)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "records.csv").read_bytes()
    assert a == (tmp_path / "b" / "records.csv").read_bytes()
    rows = _read(tmp_path / "a" / "records.csv")
    assert len(rows) == 2
    assert {"phd_ospa", "r_b", "c_dl", "shared_points"} <= rows[0].keys()
    assert len(_read(tmp_path / "a" / "summary.csv")) == 1


def test_cli_sweep_row_counts(tmp_path):
    data = dict(TINY, experiment={"n_scans": 2, "monte_carlo": 2, "burn_in": 0})
    cfg = _write(tmp_path, data)
    out = tmp_path / "sw"
    assert main(["--config", str(cfg), "--sweep", "rho_p", "--values", "0.2,0.4", "--out", str(out)]) == 0
    rows = _read(out / "records.csv")
    assert len(rows) == 2 * 2 * 2
    assert [r["value"] for r in _read(out / "summary.csv")] == ["0.2", "0.4"]
    c = [float(r["c_dl"]) for r in _read(out / "summary.csv")]
    assert c[1] < c[0]


def test_cli_overrides_and_dump(tmp_path):
    cfg = _write(tmp_path, TINY)
    out = tmp_path / "d"
    assert main(["--config", str(cfg), "--tracker", "mbm", "--seed", "9", "--dump-maps", "--out", str(out)]) == 0
    rows = _read(out / "records.csv")
    assert "mbm_ospa" in rows[0] and "phd_ospa" not in rows[0]
    dumps = sorted((out / "maps").iterdir())
    assert len(dumps) == 2
    head = np.frombuffer(dumps[0].read_bytes()[:16], dtype="<u4")
    assert head[0] == 0 and head[3] == 51


def test_cli_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, {"resources": {"rho_f": 0}})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "resources.rho_f" in capsys.readouterr().err
    assert main(["--sweep", "rho_p", "--out", str(tmp_path / "y")]) == 2


def test_cli_rejects_bad_values():
    with pytest.raises(SystemExit):
        main(["--sweep", "rho_p", "--values", "a,b"])
    with pytest.raises(SystemExit):
        main(["--sweep", "xi_d", "--values", "1"])
