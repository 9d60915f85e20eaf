import json

import numpy as np

from localbp.cli import main


def test_generate_and_bp_run(tmp_path, capsys):
    gdir = tmp_path / "g"
    rc = main(["generate", "--n", "400", "--a", "3", "--b", "1", "--alpha", "0.2",
               "--seed", "7", "--out", str(gdir)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 400
    rc = main(["bp-run", "--graph", str(gdir), "--t", "3",
               "--out", str(tmp_path / "bp")])
    assert rc == 0
    result = json.loads(capsys.readouterr().out)
    assert 0.0 <= result["accuracy"] <= 1.0
    assert (tmp_path / "bp" / "vertices.csv").exists()


def test_generate_is_deterministic(tmp_path):
    for tag in ("a", "b"):
        main(["generate", "--n", "300", "--a", "4", "--b", "2", "--alpha", "0.1",
              "--seed", "3", "--out", str(tmp_path / tag)])
    for name in ("edges.csv", "labels.csv", "header.json"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes())


def test_bp_run_generate_inline(tmp_path, capsys):
    rc = main(["bp-run", "--generate", "--n", "500", "--a", "8", "--b", "2",
               "--alpha", "0.2", "--t", "2", "--seed", "1",
               "--out", str(tmp_path / "r")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["iterations"] == 2


def test_tree_sim_modes(tmp_path, capsys):
    rc = main(["tree-sim", "--a", "4", "--b", "2", "--alpha", "0.2", "--t", "2",
               "--replicas", "300", "--seed", "2", "--mode", "noisy",
               "--out", str(tmp_path / "t")])
    assert rc == 0
    capsys.readouterr()
    lines = (tmp_path / "t" / "metrics.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in lines] == ["metric", "q_star"]


def test_de_solve_prints_json(tmp_path, capsys):
    rc = main(["de-solve", "--mu", "1.0", "--alpha", "0.2",
               "--out", str(tmp_path / "d")])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["converged_low"]


def test_de_sweep_and_boundary_gap(tmp_path, capsys):
    rc = main(["de-sweep", "--mu-min", "0", "--mu-max", "2", "--mu-steps", "3",
               "--alphas", "0.1,0.3", "--out", str(tmp_path / "s")])
    assert rc == 0
    rc = main(["boundary-gap", "--a", "2.5", "--b", "1.5", "--alpha", "0.2",
               "--t", "2", "--replicas", "400", "--seed", "3",
               "--out", str(tmp_path / "bg")])
    assert rc == 0
    capsys.readouterr()
    lines = (tmp_path / "bg" / "metrics.csv").read_text().splitlines()
    assert len(lines) == 3


def test_compare_smoke(tmp_path, capsys):
    rc = main(["compare", "--n", "1500", "--a", "8", "--b", "2", "--alpha", "0.2",
               "--t", "2", "--replicas", "2", "--tree-replicas", "400",
               "--seed", "5", "--out", str(tmp_path / "c")])
    assert rc == 0
    capsys.readouterr()
    assert (tmp_path / "c" / "compare.csv").exists()


def test_oracle_subcommand(tmp_path, capsys):
    main(["generate", "--n", "8", "--a", "2", "--b", "1", "--alpha", "0.2",
          "--seed", "4", "--out", str(tmp_path / "g")])
    capsys.readouterr()
    rc = main(["oracle", "--graph", str(tmp_path / "g"), "--vertex", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 <= payload["p_plus"] <= 1.0
    assert payload["enumerated_states"] == 256


def test_validation_error_exit_code(tmp_path, capsys):
    rc = main(["generate", "--n", "100", "--a", "3", "--b", "1", "--alpha", "0.7",
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_oracle_too_large_exit_code(tmp_path, capsys):
    main(["generate", "--n", "30", "--a", "2", "--b", "1", "--alpha", "0.2",
          "--seed", "4", "--out", str(tmp_path / "g")])
    capsys.readouterr()
    rc = main(["oracle", "--graph", str(tmp_path / "g"), "--vertex", "0",
               "--out", str(tmp_path)])
    assert rc == 1


def test_regime_warning_emitted(tmp_path, capsys):
    rc = main(["generate", "--n", "100", "--a", "9", "--b", "0.05", "--alpha", "0.2",
               "--out", str(tmp_path / "w")])
    assert rc == 0
    err = capsys.readouterr().err
    assert "a/b" in err


def test_config_file_drives_experiment(tmp_path, capsys):
    cfg = {"schema": 1, "kind": "de_solve", "out_dir": str(tmp_path / "o"),
           "mu": 1.2, "alpha": 0.3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rc = main(["de-solve", "--mu", "9", "--alpha", "0.1", "--config", str(path),
               "--out", "ignored"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["out_dir"] == str(tmp_path / "o")
    saved = json.loads((tmp_path / "o" / "result.json").read_text())
    assert saved["mu"] == 1.2


def test_config_rejects_unknown_keys(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"schema": 1, "kind": "de_solve",
                                "out_dir": str(tmp_path / "o"), "mu": 1.2,
                                "alpha": 0.3, "muu": 4}))
    rc = main(["de-solve", "--mu", "1", "--alpha", "0.1", "--config", str(path),
               "--out", "x"])
    assert rc == 1
