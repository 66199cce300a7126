from swan_isac.cli import main
from swan_isac.harness import Template, load_config, read_csv


def test_init_config(tmp_path, capsys):
    path = tmp_path / "swan.ini"
    assert main(["init-config", "--out", str(path)]) == 0
    plan = load_config(path)
    assert plan.template == Template() and plan.trials == 1024
    assert plan.values == (12.0, 16.0, 20.0, 24.0)


def test_check_subset(capsys):
    assert main(["check", "scaling", "two-loop"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2
    assert main(["check", "bogus"]) == 2


def test_sweep_and_run(tmp_path, capsys):
    cfg = tmp_path / "fast.ini"
    cfg.write_text("[solver]\nouter_max = 3\ninner_max = 20\n")
    out = tmp_path / "s.csv"
    code = main(["sweep", "--config", str(cfg), "--trials", "2", "--scheme", "MIMO", "--values", "20,24",
                 "--seed", "9", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 4 and {r.value for r in rows} == {20.0, 24.0}
    assert main(["run", "--config", str(cfg), "--scheme", "proposed", "--seed", "9"]) == 0
    assert "crlb" in capsys.readouterr().out


def test_bad_scheme_reports_error(tmp_path, capsys):
    assert main(["sweep", "--scheme", "nothing", "--out", str(tmp_path / "x.csv")]) == 2
    assert "error" in capsys.readouterr().err
