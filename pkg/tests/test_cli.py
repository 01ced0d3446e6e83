import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from lvgm.cli import main, parse_config_text
from lvgm.data import read_csv
from lvgm.errors import ConfigError


def run(tmp_path, command, text, *flags, name="cfg.txt"):
    cfg = tmp_path / name
    cfg.write_text(text)
    return main([command, "--config", str(cfg), *flags])


def generate(tmp_path, family="gaussian", d=8, n=100, extra="", tag="g"):
    code = run(tmp_path, "generate", f"""
family = {family}
d = {d}
n = {n}
seed = 3
data_out = {tag}.csv
truth_out = {tag}.json
{extra}
""", name=f"{tag}.cfg")
    assert code == 0
    return tmp_path / f"{tag}.csv", tmp_path / f"{tag}.json"


def test_generate_shape_and_truth(tmp_path):
    data, truth = generate(tmp_path)
    X = read_csv(data)
    assert (X.d, X.n) == (8, 100)
    t = json.loads(truth.read_text())
    assert t["format"] == "lvgm-truth/1" and t["d"] == 8 and t["seed"] == 3
    assert len(t["B"]) == 8 and len(t["theta"]) == 16


def test_generate_is_deterministic_across_threads(tmp_path):
    a, ta = generate(tmp_path, "ising", d=5, n=2500, extra="threads = 1", tag="a")
    b, tb = generate(tmp_path, "ising", d=5, n=2500, extra="threads = 3", tag="b")
    assert a.read_bytes() == b.read_bytes() and ta.read_bytes() == tb.read_bytes()


def test_generate_exponential_domain(tmp_path):
    data, _ = generate(tmp_path, "exponential", d=6, n=200)
    assert np.all(read_csv(data).values > 0)


def test_fit_with_scaling_constants(tmp_path):
    data, _ = generate(tmp_path, "gaussian", d=6, n=300)
    code = run(tmp_path, "fit", f"family = gaussian\ndata = {data}\nmodel_out = m.json\nc1 = 0.5\nc2 = 5\n")
    assert code == 0
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["penalty"]["lambda"] == pytest.approx(0.5 * np.sqrt(6 / 300))
    assert m["penalty"]["gamma"] == pytest.approx(5 * np.sqrt(6) / 300)
    assert m["diagnostics"]["converged"] is True
    assert set(m["diagnostics"]) >= {"objective", "iterations", "support_size", "rank"}


def test_reduced_matches_full(tmp_path):
    data, _ = generate(tmp_path, "gaussian", d=6, n=300)
    base = f"family = gaussian\ndata = {data}\nlambda = 0.05\ngamma = 0.01\n"
    assert run(tmp_path, "fit", base + "model_out = full.json\n") == 0
    assert run(tmp_path, "fit", base + "model_out = red.json\n", "--reduced") == 0
    from lvgm.jsonio import load_model

    full, red = load_model(tmp_path / "full.json"), load_model(tmp_path / "red.json")
    assert np.linalg.norm(full.theta - red.theta) <= 1e-4


def test_empty_penalty_reproduces_mle(tmp_path):
    data, _ = generate(tmp_path, "gaussian", d=3, n=400)
    code = run(tmp_path, "fit", f"family = gaussian\ndata = {data}\nmodel_out = m.json\nlambda = 0\n", "--no-latent")
    assert code == 0
    from lvgm.jsonio import load_model

    X = read_csv(data).values
    S = np.cov(X, bias=True)
    assert np.allclose(load_model(tmp_path / "m.json").theta, np.linalg.inv(S), rtol=1e-5, atol=1e-6)


def test_domain_violation_reports_location(tmp_path, capsys):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n0,-1\n")
    code = run(tmp_path, "fit", "family = poisson\ndata = x.csv\nmodel_out = m.json\nlambda = 0.1\ngamma = 0.1\n")
    assert code == 2
    assert "variable 1, sample 1" in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


@pytest.mark.parametrize("text,msg", [
    ("family = gaussian\ndata = x.csv\nmodel_out = m.json\nlambda = 1\nbogus = 2\n", "unknown key"),
    ("family = gaussian\ndata = x.csv\nlambda = 1\n", "missing required"),
    ("family = gaussian\ndata = nope.csv\nmodel_out = m.json\nlambda = 1\n", "does not exist"),
    ("family = gaussian\ndata = x.csv\nmodel_out = no/dir/m.json\nlambda = 1\n", "output directory"),
    ("family = gaussian\ndata = x.csv\nmodel_out = m.json\nlambda = -1\ngamma = 0\n", "nonnegative"),
    ("family = gaussian\ndata = x.csv\nmodel_out = m.json\nlambda = abc\n", "bad value"),
    ("family = bernoulli\ndata = x.csv\nmodel_out = m.json\n", "bad value"),
    ("family = gaussian\ndata = x.csv\nmodel_out = m.json\nlambda = 1\nlambda = 2\n", "duplicate"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, msg):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n3,4\n5,7\n")
    assert run(tmp_path, "fit", text) == 2
    assert msg in capsys.readouterr().err


def test_reduced_rejected_for_other_families(tmp_path):
    data, _ = generate(tmp_path, "ising", d=4, n=50)
    assert run(tmp_path, "fit", f"family = ising\ndata = {data}\nmodel_out = m.json\nlambda = 1\ngamma = 1\n",
               "--reduced") == 2


def test_nonconvergence_exit_3(tmp_path):
    data, _ = generate(tmp_path, "ising", d=6, n=300)
    code = run(tmp_path, "fit", f"family = ising\ndata = {data}\nmodel_out = m.json\nlambda = 0.01\ngamma = 0.01\nmax_iter = 3\n")
    assert code == 3
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["diagnostics"]["converged"] is False


def test_select_then_evaluate(tmp_path):
    data, truth = generate(tmp_path, "ising", d=8, n=600, tag="train")
    test, _ = generate(tmp_path, "ising", d=8, n=200, extra="", tag="test")
    sel = f"""family = ising
data = {data}
report_out = report.json
model_out = model.json
num_subsamples = 6
num_lambda = 5
num_gamma = 5
threads = 1
"""
    assert run(tmp_path, "select", sel, name="sel.cfg") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert set(rep) == {"stage1", "report", "structure", "refit_converged"}
    assert rep["report"]["num_subsamples"] == 6
    assert run(tmp_path, "select", sel.replace("model.json", "flat.json").replace("report.json", "r2.json"),
               "--no-latent", name="sel2.cfg") == 0
    ev = f"""model = model.json
baseline_model = flat.json
test_data = {test}
truth = {truth}
metrics_out = metrics.json
"""
    code = run(tmp_path, "evaluate", ev, name="ev.cfg")
    met = json.loads((tmp_path / "metrics.json").read_text())
    assert code == (0 if met["converged"] else 3)
    assert {"holdout_nll", "holdout_nll_baseline", "fdr", "pwr", "recovery_success"} <= set(met)
    assert 0 <= met["fdr"] <= 1 and 0 <= met["pwr"] <= 1


def test_experiment_is_deterministic_across_threads(tmp_path):
    base = """family = gaussian
d = 6
ns = 200, 400
trials = 2
n_lambda = 3
n_gamma = 3
c1_min = 1
c1_max = 4
seed = 11
"""
    assert run(tmp_path, "experiment", base + "threads = 1\nresults_out = a.csv\n", name="a.cfg") == 0
    assert run(tmp_path, "experiment", base + "threads = 3\nresults_out = b.csv\n", name="b.cfg") == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    lines = a.splitlines()
    assert lines[0] == "family,graph,r,d,n,trials,successes,frequency"
    assert len(lines) == 3


def test_parse_config_comments_and_defaults():
    cfg = parse_config_text("family = ising  # spins\n\n# nothing\ndata=a\nmodel_out=b\nlambda=1\n", "fit")
    assert cfg["family"] == "ising" and cfg["lambda"] == 1.0 and cfg["gamma"] is None
    assert cfg["max_iter"] == 5000 and cfg["center"] is True
    with pytest.raises(ConfigError):
        parse_config_text("just words\n", "fit")


def test_bad_command_line():
    assert main(["frobnicate", "--config", "x"]) == 2
    assert main(["fit"]) == 2


@pytest.mark.skipif(shutil.which("lvgm") is None, reason="console script not installed")
def test_console_script(tmp_path):
    (tmp_path / "c.cfg").write_text("family = gaussian\n")
    out = subprocess.run(["lvgm", "fit", "--config", str(tmp_path / "c.cfg")], capture_output=True, text=True)
    assert out.returncode == 2 and "missing required" in out.stderr
    out = subprocess.run([sys.executable, "-m", "lvgm.cli", "fit", "--config", str(tmp_path / "c.cfg")],
                         capture_output=True, text=True)
    assert out.returncode == 2
