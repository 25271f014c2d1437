import numpy as np
import pytest

from subspec.cli import build_phi_spec, parse_config, run, run_cli
from subspec.errors import ConfigError


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_config_basics():
    cfg = parse_config("""
# comment
task = spectrum
phi.kind = exp-decay
phi.c = 1.5   # inline comment
output_dir = results
""")
    assert cfg.task == "spectrum"
    assert cfg.get("phi.kind") == "exp-decay"
    assert cfg.get_float("phi.c") == 1.5
    assert str(cfg.output_dir) == "results"


def test_parse_config_errors():
    with pytest.raises(ConfigError):
        parse_config("task = dance")
    with pytest.raises(ConfigError):
        parse_config("task = spectrum\nnot a keyvalue line")
    with pytest.raises(ConfigError):
        parse_config("phi.kind = exp-decay")  # missing task


def test_build_phi_spec_kinds(tmp_path):
    from subspec.phi_models import make_phi
    cfg = parse_config("task = spectrum\nphi.kind = custom-log-profile\n"
                       "phi.log_expr = -x - 0.5*x**2\nphi.dlog_expr = -1 - x\n")
    m = make_phi(build_phi_spec(cfg))
    assert float(m.log_phi(np.asarray(2.0))) == pytest.approx(-4.0)
    assert float(m.dlog_phi(np.asarray(2.0))) == pytest.approx(-3.0)

    xs = np.linspace(0.0, 8.0, 81)
    path = tmp_path / "tab.csv"
    np.savetxt(path, np.column_stack([xs, np.exp(-xs)]), delimiter=",")
    cfg2 = parse_config(f"task = spectrum\nphi.kind = tabulated\nphi.csv = {path}\n")
    m2 = make_phi(build_phi_spec(cfg2))
    assert float(m2.log_phi(np.asarray(1.0))) == pytest.approx(-1.0, abs=1e-12)


def test_spectrum_task_and_determinism(tmp_path):
    cfgfile = _write(tmp_path, "run.cfg", """
task = spectrum
phi.kind = stretched-exp
phi.c = 2
resolution.X = 5
spectrum.n_keep = 10
""")
    out1 = tmp_path / "out1"
    out2 = tmp_path / "out2"
    assert run_cli(["run", str(cfgfile), "--out", str(out1)]) == 0
    assert run_cli(["run", str(cfgfile), "--out", str(out2)]) == 0
    csv1 = (out1 / "spectrum.csv").read_bytes()
    assert csv1 == (out2 / "spectrum.csv").read_bytes()  # byte-identical
    lines = csv1.decode().splitlines()
    assert lines[0] == "n,mu,lambda,converged"
    assert len(lines) == 11
    assert (out1 / "report.txt").exists()
    first_mu = float(lines[1].split(",")[1])
    assert first_mu == pytest.approx(1.0 / 13.6956, rel=1e-3)


def test_validate_task_exp_decay(tmp_path):
    cfgfile = _write(tmp_path, "val.cfg", """
task = validate
phi.kind = exp-decay
phi.c = 1
resolution.X = 12
""")
    out = tmp_path / "out"
    assert run_cli(["run", str(cfgfile), "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "[PASS]" in report and "[FAIL]" not in report
    assert "all checks passed" in report


def test_validate_task_power_slow_decay(tmp_path):
    # sub-exponential profile: auto window is capped, identities stay local
    from subspec.errors import SlowDecayWarning
    cfgfile = _write(tmp_path, "val2.cfg",
                     "task = validate\nphi.kind = power\nphi.c = 1\n")
    out = tmp_path / "out"
    with pytest.warns(SlowDecayWarning):
        assert run_cli(["run", str(cfgfile), "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "validation window capped" in report
    assert "[FAIL]" not in report


def test_compare_task_pass_and_fail(tmp_path):
    base = """
task = compare
phi.kind = custom-log-profile
phi.log_expr = -x - 0.5*x**2
phi.dlog_expr = -1 - x
compare.phi2.kind = custom-log-profile
compare.phi2.log_expr = -x - 0.5*x**2 - sin(exp(x))
compare.phi2.dlog_expr = -1 - x - exp(x)*cos(exp(x))
resolution.X = 5
resolution.panels = 120
spectrum.n_keep = 8
"""
    ok = _write(tmp_path, "ok.cfg", base + "compare.c = 2.7182818284590452\n")
    out = tmp_path / "ok"
    assert run_cli(["run", str(ok), "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "holds = True" in report
    lines = (out / "compare.csv").read_text().splitlines()
    assert lines[0] == "n,mu1,mu2,ratio,in_band"

    bad = _write(tmp_path, "bad.cfg", base + "compare.c = 1\n")
    outb = tmp_path / "bad"
    assert run_cli(["run", str(bad), "--out", str(outb)]) == 2
    report = (outb / "report.txt").read_text()
    assert "holds = False" in report
    assert "worst n = " in report


def test_robin_task(tmp_path):
    cfgfile = _write(tmp_path, "robin.cfg", """
task = robin
phi.kind = exp-decay
phi.c = 1
robin.gamma = -1
resolution.X = 13.8155
resolution.panels = 120
""")
    out = tmp_path / "out"
    assert run_cli(["run", str(cfgfile), "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "boundary sigma = -2" in report
    mus = np.loadtxt(out / "robin_spectrum.csv", delimiter=",", skiprows=1,
                     usecols=1)
    assert mus[-1] == pytest.approx(-1.0 / 3.0, abs=1e-3)


def test_scatter_task(tmp_path):
    cfgfile = _write(tmp_path, "sc.cfg", """
task = scatter
scatter.c = 1
scatter.alpha_list = 1.5, 2
resolution.X = 30
resolution.panels = 45
""")
    out = tmp_path / "out"
    assert run_cli(["run", str(cfgfile), "--out", str(out)]) == 0
    lines = (out / "scatter.csv").read_text().splitlines()
    assert lines[0] == "alpha,trace_numeric,bound_nu_route,bound_derivative_route,criterion_met"
    assert len(lines) == 3


def test_oracle_task(tmp_path):
    cfgfile = _write(tmp_path, "oracle.cfg", """
task = oracle
phi.kind = stretched-exp
phi.c = 2
oracle.k = 3
""")
    out = tmp_path / "out"
    assert run_cli(["run", str(cfgfile), "--out", str(out)]) == 0
    rows = np.loadtxt(out / "oracle.csv", delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape[0] == 3
    assert np.all(rows[:, 3] <= 1e-2)


def test_error_exit_codes(tmp_path):
    missing = tmp_path / "nope.cfg"
    assert run_cli(["run", str(missing)]) == 1
    bad = _write(tmp_path, "bad.cfg", "task = spectrum\nphi.kind = bogus\n")
    assert run_cli(["run", str(bad), "--out", str(tmp_path / "o")]) == 1
    # oracle on a non-compact model is a module error, rendered as exit 1
    noncompact = _write(tmp_path, "nc.cfg",
                        "task = oracle\nphi.kind = exp-decay\nphi.c = 1\n")
    assert run_cli(["run", str(noncompact), "--out", str(tmp_path / "o2")]) == 1


def test_threads_flag_smoke(tmp_path, monkeypatch):
    monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
    cfgfile = _write(tmp_path, "run.cfg", """
task = spectrum
phi.kind = exp-decay
phi.c = 1
resolution.X = 8
resolution.panels = 32
""")
    assert run_cli(["run", str(cfgfile), "--out", str(tmp_path / "o"),
                    "--threads", "2"]) == 0
