import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pavecop.bench import cli
from pavecop.bench.config import ConfigError, Experiment, parse_config
from pavecop.bench.constants import BoundCase, FactKind, all_constants, fact_constant, theorem_bound
from pavecop.bench.runner import CSV_COLUMNS, run_experiment
from pavecop.models import KnRule

RATE_SMALL = """
experiment = rate
gamma = 0.5
n0 = 200
factor = 2
count = 3
reps = 4
seed = 3
"""


def _cfg(text, **extra):
    lines = [text] + [f"{k} = {v}" for k, v in extra.items()]
    return parse_config("\n".join(lines))


# ---------------------------------------------------------------------------
# constants


def test_theorem_bound_examples():
    assert theorem_bound(0.5) == pytest.approx(3 * 2 ** -0.5 + 1, abs=1e-12)
    assert theorem_bound(0.5) == pytest.approx(3.1213, abs=1e-4)
    assert theorem_bound(1.0) == pytest.approx(3 * 2 ** -0.75 + 2 ** 0.75, abs=1e-12)
    assert theorem_bound(1.0) == pytest.approx(3.4656, abs=1e-4)
    assert theorem_bound(0.7, BoundCase.THM23) == theorem_bound(0.7, BoundCase.THM21)


def test_theorem_bound_both_regimes_evaluable_at_half():
    left = theorem_bound(0.5)
    right = (3 * 2 ** -0.75 + 0.5 * 2 ** 0.75) * 0.5 ** -0.25
    # the upper branch just above 1/2 is the second formula
    assert theorem_bound(0.5 + 1e-12) == pytest.approx(right, rel=1e-9)
    assert math.isfinite(left) and math.isfinite(right)


@pytest.mark.parametrize("gamma", [0.0, -0.1, 1.2])
def test_theorem_bound_errors(gamma):
    with pytest.raises(ValueError):
        theorem_bound(gamma)


def test_fact_constant_examples():
    assert fact_constant(FactKind.LIL_BETA, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert fact_constant(FactKind.LIL_BETA, 0.5 + 1e-15) == pytest.approx(1.0, abs=1e-12)
    assert fact_constant(FactKind.BAHADUR_KIEFER, 1.0) == pytest.approx(0.8409, abs=1e-4)
    assert fact_constant(FactKind.BAHADUR_KIEFER, 0.0) == pytest.approx(2 ** 0.25)
    for g in (0.0, 0.3, 1.0):
        assert fact_constant(FactKind.LIL_GSTAR, g) == 0.25
        assert fact_constant(FactKind.OSCILLATION, g) == 1.0


def test_all_constants_at_zero():
    c = all_constants(0.0)
    assert c["theorem_thm21"] is None and c["bahadur_kiefer"] == pytest.approx(2 ** 0.25)


# ---------------------------------------------------------------------------
# configuration


def test_parse_example():
    cfg = parse_config("experiment = rate\ngamma = 0.5\nn0 = 1024\nfactor = 4\ncount = 6\nseed = 7")
    assert cfg.experiment is Experiment.RATE
    assert cfg.kn_spec.rule is KnRule.PROPORTIONAL and cfg.kn_spec.gamma == 0.5
    assert cfg.schedule.sizes == [1024 * 4 ** i for i in range(6)]
    assert cfg.seed == 7 and cfg.reps == 100 and cfg.grid_m == 512


def test_gamma_out_of_range_names_condition():
    with pytest.raises(ConfigError, match="H3"):
        parse_config("gamma = 1.5")


@pytest.mark.parametrize("drop", ["experiment", "seed", "n0", "count", "gamma", "factor"])
def test_missing_key_is_named(drop):
    text = "\n".join(ln for ln in RATE_SMALL.strip().splitlines() if not ln.startswith(drop))
    with pytest.raises(ConfigError, match=f"'{drop}'"):
        parse_config(text)


def test_line_numbers_in_errors():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("experiment = rate\nseed = 1\nbogus = 2\n")
    with pytest.raises(ConfigError, match="line 2.*duplicate"):
        parse_config("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="line 1.*n0"):
        parse_config("n0 = 12.5\n")


def test_invalid_combinations():
    with pytest.raises(ConfigError, match="kernel"):
        _cfg(RATE_SMALL.replace("rate", "rate_smoothed"))
    with pytest.raises(ConfigError):
        _cfg(RATE_SMALL.replace("factor = 2", "factor = 1"))
    with pytest.raises(ConfigError):
        _cfg(RATE_SMALL, sup_method="bogus")


def test_comments_and_assertions():
    cfg = _cfg(RATE_SMALL + "# a comment\n", assert_running_max_in="0.1, 2", assert_min_fraction=0.9)
    assert cfg.assertions.running_max_in == (0.1, 2.0)
    assert cfg.assertions.min_fraction == 0.9


# ---------------------------------------------------------------------------
# reports


@pytest.fixture(scope="module")
def rate_report():
    return run_experiment(parse_config(RATE_SMALL))


def test_rows_canonical_order(rate_report):
    keys = [(r.n, r.rep) for r in rate_report.rows]
    assert keys == sorted(keys)
    assert len(keys) == 3 * 4
    head = rate_report.to_csv().splitlines()[0]
    assert head == ",".join(CSV_COLUMNS)


def test_rate_normalizer_column(rate_report):
    for row in rate_report.rows:
        n, kn = row.n, row.kn
        l1 = max(math.log(n), 1.0)
        l2 = max(math.log(l1), 1.0)
        ref = n ** 0.5 * kn ** -0.25 * l2 ** -0.25 * l1 ** -0.5
        assert abs(row.normalizer - ref) <= 1e-12 * ref
        assert row.bound == pytest.approx(3 * 2 ** -0.5 + 1)
        assert row.ratio == pytest.approx(row.observed * row.normalizer / row.bound, rel=1e-15)


def test_running_max_monotone(rate_report):
    prev = None
    for entry in rate_report.summary:
        if prev is not None:
            assert np.all(entry["running"] >= prev)
            assert entry["mean_running_max"] >= prev.mean()
        prev = entry["running"]
        assert 0.0 <= entry["exceed_fraction"] <= 1.0


def test_threads_do_not_change_csv(rate_report):
    again = run_experiment(parse_config(RATE_SMALL), threads=3)
    assert again.to_csv() == rate_report.to_csv()
    assert again.summary_csv() == rate_report.summary_csv()


def test_general_rate_with_independence_matches(rate_report):
    gen = run_experiment(parse_config(RATE_SMALL.replace("= rate", "= rate_general")))
    for a, b in zip(rate_report.rows, gen.rows):
        assert (a.n, a.rep) == (b.n, b.rep)
        assert abs(a.observed - b.observed) < 1e-10


def test_summary_rate_columns(rate_report):
    lines = rate_report.summary_csv().splitlines()
    assert lines[0].endswith("h_n,h_n_log")
    for line in lines[1:]:
        cells = line.split(",")
        assert float(cells[-2]) > 0 and float(cells[-1]) >= float(cells[-2])


def test_lil_ratio_uses_constant():
    cfg = parse_config("experiment = lil_tail_quantile\ngamma = 0.8\nn0 = 256\nfactor = 2\ncount = 2\n"
                       "reps = 2\nseed = 1\n")
    rep = run_experiment(cfg)
    for row in rep.rows:
        assert row.normalizer == pytest.approx(max(math.log(max(math.log(row.n), 1)), 1) ** -0.5)
        assert row.bound == pytest.approx(fact_constant(FactKind.LIL_BETA, 0.8))
        assert row.ratio == pytest.approx(row.observed * row.normalizer / row.bound)


@pytest.mark.parametrize("text", [
    "experiment = bahadur_kiefer\ngamma = 1\nn0 = 500\ncount = 1\nreps = 2\nseed = 2\n",
    "experiment = oscillation\ngamma = 1\nn0 = 400\nfactor = 2\ncount = 2\nreps = 2\ngrid_m = 16\nseed = 2\n",
    "experiment = lil_gstar\ngamma = 1\nn0 = 300\ncount = 1\nreps = 2\nseed = 2\n",
    "experiment = rate_smoothed\ngamma = 0.5\nn0 = 300\ncount = 1\nreps = 2\nkernel = epanechnikov\n"
    "grid_m = 32\nseed = 2\n",
    "experiment = rate_general\nmodel = clayton\ntheta = 2\ngamma = 0.3\nn0 = 300\ncount = 1\nreps = 2\nseed = 2\n",
])
def test_other_experiments_produce_finite_rows(text):
    rep = run_experiment(parse_config(text))
    assert rep.rows
    for row in rep.rows:
        assert math.isfinite(row.observed) and row.observed >= 0
        assert math.isfinite(row.ratio)


def test_oscillation_conditions_logged():
    rep = run_experiment(parse_config(
        "experiment = oscillation\ngamma = 1\nn0 = 400\nfactor = 2\ncount = 3\nreps = 1\ngrid_m = 8\nseed = 2\n"))
    assert all(rep.details["h_conditions"].values())
    assert rep.summary[0]["h_n"] == pytest.approx(400 ** -0.5)


def test_cov_check_small():
    rep = run_experiment(parse_config("experiment = cov_check\nreps = 2000\ncov_m = 8\nseed = 4\n"))
    assert rep.passed
    assert len(rep.rows) == 3 * 81
    assert {r.experiment for r in rep.rows} == {"cov_check_sheet", "cov_check_bridge", "cov_check_tied_down"}


def test_test_calibration_small():
    rep = run_experiment(parse_config(
        "experiment = test_calibration\nmodel = clayton\ntheta = 3\ngamma = 1\nn0 = 150\ncount = 1\n"
        "reps = 40\nnull_reps = 200\nseed = 5\nassert_power_margin = 0.1\n"))
    d = rep.details
    assert {"size", "power", "p95_mc", "p95_gauss", "p95_rel_diff"} <= set(d)
    assert rep.passed
    labels = {r.experiment for r in rep.rows}
    assert labels == {"test_calibration_null", "test_calibration_alt"}


@given(st.integers(0, 2 ** 64 - 1))
@settings(max_examples=20, deadline=None)
def test_seed_range(seed):
    assert parse_config(RATE_SMALL.replace("seed = 3", f"seed = {seed}")).seed == seed


# ---------------------------------------------------------------------------
# command line


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text(RATE_SMALL + "assert_exceed_fraction_max = 1.0\noutput = r.csv\n")
    assert cli.main(["run", str(good), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    info = json.loads(out.strip().splitlines()[-1])
    assert info["rows"] == 12
    assert (tmp_path / "o" / "r.csv").exists()
    assert (tmp_path / "o" / "r_summary.csv").exists()
    details = json.loads((tmp_path / "o" / "r_details.json").read_text())
    assert details["checks"][0]["passed"] is True

    bad = tmp_path / "bad.cfg"
    bad.write_text(RATE_SMALL + "assert_median_below = 0.0\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "FAIL" in capsys.readouterr().out

    broken = tmp_path / "broken.cfg"
    broken.write_text("experiment = nope\nseed = 1\n")
    assert cli.main(["run", str(broken)]) == 1
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 1


def test_cli_constants(capsys):
    assert cli.main(["constants", "--gamma", "0.5"]) == 0
    lines = dict(ln.split(",") for ln in capsys.readouterr().out.strip().splitlines())
    assert float(lines["theorem_thm21"]) == pytest.approx(3.1213, abs=1e-4)
    assert float(lines["lil_beta"]) == pytest.approx(1.0)
    assert cli.main(["constants", "--gamma", "2"]) == 1
