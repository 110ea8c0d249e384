import json

import numpy as np
import pytest

from nhfloquet import cli
from nhfloquet.config import ConfigError, ExperimentConfig, apply_overrides, effective, from_dict, load_config
from nhfloquet.experiments import ResultTable, aggregate_q, realization_seed, run_experiment, write_csv


def small(experiment, **run):
    cfg = from_dict({"experiment": experiment})
    cfg.run.realizations = run.pop("realizations", 2)
    cfg.run.cycles = run.pop("cycles", 3)
    cfg.run.M_q = run.pop("M_q", 6)
    for k, v in run.items():
        setattr(cfg.run, k, v)
    return cfg


def test_empty_config_defaults():
    cfg = load_config()
    assert (cfg.geometry.Lx, cfg.geometry.Ly) == (2, 4)
    assert cfg.physics.J == 1.25 and cfg.physics.delta == 0.4
    assert cfg.physics.T == pytest.approx(2 * np.pi)
    assert cfg.run.M_q == 40 and cfg.run.M == 1000 and cfg.run.realizations == 20


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key physics.gama"):
        from_dict({"physics": {"gama": 0.1}})
    with pytest.raises(ConfigError, match="unknown key"):
        from_dict({"plots": {}})


@pytest.mark.parametrize(
    "data,needle",
    [
        ({"physics": {"gamma2": 0.2}}, "1/16"),
        ({"physics": {"gamma": 0.7}}, "1/2"),
        ({"physics": {"W": -1.0}}, ">= 0"),
        ({"run": {"realizations": 0}}, ">= 1"),
        ({"run": {"cycles": "ten"}}, "integer"),
        ({"experiment": "fig5"}, "experiment must be"),
        ({"geometry": {"Lx": 5}, "experiment": "nh-afai"}, "36"),
    ],
)
def test_out_of_range_rejected(data, needle):
    with pytest.raises(ConfigError, match=needle):
        from_dict(data)


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"experiment": "afai-baseline", "physics": {"W": 0.5}}))
    cfg = load_config(path, {"physics.gamma": 0.02, "run.cycles": None})
    assert cfg.experiment == "afai-baseline"
    assert cfg.physics.W == 0.5 and cfg.physics.gamma == 0.02 and cfg.run.cycles == 100
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)


def test_integer_coerced_to_float():
    cfg = apply_overrides(ExperimentConfig(), {"physics.W": 1})
    assert isinstance(cfg.physics.W, float)


def test_zero_disorder_test_forces_noiseless_uncorrected():
    cfg = effective(from_dict({"experiment": "zero-disorder-test", "physics": {"gamma": 0.2}}))
    assert cfg.physics.gamma == 0 and cfg.physics.gamma2 == 0 and not cfg.run.correction_enabled


def test_realization_seeds_are_prefix_stable():
    a = [np.random.default_rng(realization_seed(7, r)).random() for r in range(3)]
    b = [np.random.default_rng(realization_seed(7, r)).random() for r in range(5)]
    assert a == b[:3]
    assert len(set(b)) == 5


def test_aggregate_mean_and_stderr():
    qs = np.array([[1.0, 0.5], [0.0, 0.25], [0.5, 0.0]])
    agg = aggregate_q(np.array([1, 2]), qs)
    assert np.max(np.abs(agg.column("mean_Q") - qs.mean(axis=0))) <= 1e-12
    assert agg.column("stderr_Q")[0] == pytest.approx(np.std([1, 0, 0.5], ddof=1) / np.sqrt(3))
    assert agg.columns == ["cycle", "mean_Q", "stderr_Q"]


def test_write_csv_header(tmp_path):
    write_csv(tmp_path / "t.csv", ResultTable(["a", "b"], [(1, 0.1 + 0.2)]))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["# columns: a,b", "a,b", "1,0.3"]
    with pytest.raises(OSError, match="cannot write"):
        write_csv(tmp_path / "nope" / "t.csv", ResultTable(["a"], []))


def test_clean_baseline_experiment(tmp_path):
    cfg = small("afai-baseline", realizations=1, cycles=10)
    cfg.physics.W = cfg.physics.W_T = 0.0
    cfg.output.directory = str(tmp_path)
    tables = run_experiment(cfg)
    q = tables["afai-baseline.csv"].column("Q")
    assert np.max(np.abs(q - 1)) < 1e-3
    assert tables["afai-baseline.csv"].columns == ["realization", "cycle", "Q", "occ_row0", "occ_row1", "occ_row2", "occ_row3"]
    for name in tables:
        assert (tmp_path / name).read_text().startswith("# columns: ")


def test_aggregate_matches_per_realization(tmp_path):
    cfg = small("afai-baseline", realizations=3, cycles=4)
    tables = run_experiment(cfg, write=False)
    per = tables["afai-baseline.csv"]
    q = per.column("Q").reshape(3, 4)
    assert np.max(np.abs(tables["afai-baseline_aggregate.csv"].column("mean_Q") - q.mean(axis=0))) <= 1e-12


def test_nh_afai_tables():
    tables = run_experiment(small("nh-afai", realizations=2, cycles=2), write=False)
    assert set(tables) == {
        "nh-afai_green.csv",
        "nh-afai_blue.csv",
        "nh-afai_green_aggregate.csv",
        "nh-afai_blue_aggregate.csv",
        "nh-afai_comparison.csv",
    }
    comp = tables["nh-afai_comparison.csv"]
    assert len(comp.rows) == 2
    assert np.allclose(comp.column("mean_Q_green"), tables["nh-afai_green_aggregate.csv"].column("mean_Q"))


def test_localization_tables():
    cfg = small("localization", realizations=2, cycles=1, M=4)
    cfg.localization.record_stride = 5
    tables = run_experiment(cfg, write=False)
    dep = tables["localization_dephased.csv"]
    assert dep.columns[:3] == ["realization", "substep", "time"]
    assert len(dep.rows) == 2 * (1 + 20 // 5)
    agg = tables["localization_aggregate.csv"]
    assert {r[0] for r in agg.rows} == {"dephased", "baseline"}


def test_correction_demo_mixed_inputs():
    table = run_experiment(small("correction-demo"), write=False)["correction-demo.csv"]
    assert np.allclose(table.column("reg2_entropy_bits"), 0, atol=1e-9)
    assert np.allclose(table.column("reg1_entropy_bits"), 1, atol=1e-9)
    assert np.allclose(table.column("fidelity"), 1)


def test_worker_env_validation(monkeypatch):
    monkeypatch.setenv("NHFLOQUET_WORKERS", "zero")
    with pytest.raises(ConfigError):
        run_experiment(small("correction-demo"), write=False)


def test_cli_success(tmp_path, capsys):
    code = cli.main(["correction-demo", "--out", str(tmp_path), "--seed", "5"])
    assert code == 0
    assert (tmp_path / "correction-demo.csv").exists()
    assert "correction-demo.csv" in capsys.readouterr().out


def test_cli_range_error(tmp_path, capsys):
    code = cli.main(["nh-afai", "--gamma2", "0.2", "--out", str(tmp_path)])
    assert code != 0
    assert "1/16" in capsys.readouterr().err


def test_cli_bad_flag_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["afai-baseline", "--seed", "-3"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit):
        cli.main(["fig9"])


def test_cli_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = cli.main(["correction-demo", "--out", str(blocker / "sub")])
    assert code == 1
    assert "cannot create output directory" in capsys.readouterr().err


def test_cli_flags_reach_config(tmp_path):
    code = cli.main([
        "zero-disorder-test", "--cycles", "2", "--realizations", "1", "--w", "0", "--wt", "0", "--out", str(tmp_path),
    ])
    assert code == 0
    lines = (tmp_path / "zero-disorder-test_green.csv").read_text().splitlines()
    assert len(lines) == 2 + 2


def test_same_config_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / str(i)
        cfg = small("nh-afai", realizations=2, cycles=2)
        cfg.output.directory = str(d)
        run_experiment(cfg)
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]
