import json
import math
import subprocess
import sys

import pytest

from minmaxquad import aggregation as agg
from minmaxquad import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    return code, json.loads(out), err


RESULT_KEYS = {"value", "abs_error", "evaluations", "converged"}


class TestIntegrate:
    @pytest.mark.parametrize("argv,value", [
        (["--n", "3", "--kernel", "(v-u)"], 0.5),
        (["--n", "2", "--kernel", "(sqrt(u*v)-u)/(v-u)"], math.log(4) - 1),
        (["--n", "5", "--kernel", "1"], 1.0),
        (["--n", "3", "--kernel", "x1*(v-u)"], 0.25),  # x1 is the middle value: E[X(2)(X(3)-X(1))]
        (["--n", "3", "--builtin", "variance-range"], 5 / 36),
        (["--n", "4", "--builtin", "range", "--domain", "-1", "3"], 4 * 3 / 5 * 4 ** 4),
    ])
    def test_values(self, capsys, argv, value):
        if "--domain" not in argv:
            argv = argv + ["--domain", "0", "1"]
        code, doc, _ = run_json(capsys, "integrate", *argv)
        assert code == 0
        assert set(doc) == RESULT_KEYS
        assert doc["value"] == pytest.approx(value, rel=1e-9, abs=1e-12)
        assert doc["converged"] is True

    def test_text_matches_json(self, capsys):
        _, doc, _ = run_json(capsys, "integrate", "--n", "3", "--kernel", "v-u")
        code, out, _ = run(capsys, "integrate", "--n", "3", "--kernel", "v-u")
        assert code == 0
        assert repr(doc["value"]) in out

    def test_two_sources_is_spec_error(self, capsys):
        code, _, err = run(capsys, "integrate", "--n", "3", "--kernel", "v", "--builtin", "range")
        assert code == 2 and "exactly one" in err

    def test_no_source(self, capsys):
        code, _, err = run(capsys, "integrate", "--n", "3")
        assert code == 2

    def test_syntax_error(self, capsys):
        code, _, err = run(capsys, "integrate", "--n", "3", "--kernel", "(v-u")
        assert code == 2 and "error:" in err

    def test_unknown_variable(self, capsys):
        code, _, err = run(capsys, "integrate", "--n", "3", "--kernel", "w*u")
        assert code == 2

    def test_middle_variable_out_of_range(self, capsys):
        code, _, _ = run(capsys, "integrate", "--n", "3", "--kernel", "x2*u")
        assert code == 2

    def test_bad_domain(self, capsys):
        code, _, _ = run(capsys, "integrate", "--n", "3", "--kernel", "v", "--domain", "1", "0")
        assert code == 2

    def test_bad_tolerance(self, capsys):
        code, _, _ = run(capsys, "integrate", "--n", "3", "--kernel", "v", "--rel", "-1")
        assert code == 2

    def test_nonconvergence_exit_3(self, capsys):
        code, out, _ = run(capsys, "integrate", "--n", "3", "--kernel", "abs(v - 0.3)^0.5 * exp(u)",
                           "--rel", "1e-14", "--abs", "1e-300", "--max-evals", "50")
        assert code == 3
        assert "value" in out  # best estimate still printed

    def test_eval_domain_error(self, capsys):
        code, _, err = run(capsys, "integrate", "--n", "3", "--kernel", "ln(u - 2)")
        assert code in (2, 3)
        assert "error" in err


class TestOrness:
    KEYS = {"orness_average", "andness_average", "global_orness", "abs_error", "orness_exact", "converged"}

    def test_geometric(self, capsys):
        code, doc, _ = run_json(capsys, "orness", "--builtin", "geometric", "--n", "3")
        assert code == 0 and set(doc) == self.KEYS
        assert doc["orness_average"] == pytest.approx(math.sqrt(3) * math.pi / 2 - 47 / 20, abs=1e-8)
        assert doc["orness_average"] + doc["andness_average"] == pytest.approx(1.0, abs=1e-15)
        assert doc["orness_exact"] is None

    def test_arithmetic(self, capsys):
        code, doc, _ = run_json(capsys, "orness", "--builtin", "arithmetic", "--n", "6")
        assert code == 0
        assert doc["orness_average"] == pytest.approx(0.5, abs=1e-10)
        assert doc["global_orness"] == pytest.approx(0.5, abs=1e-10)

    def test_choquet_minimum_file(self, capsys, tmp_path):
        path = tmp_path / "min.json"
        path.write_text(agg.SetFunction.minimum(4).to_json())
        code, doc, _ = run_json(capsys, "orness", "--choquet", str(path), "--n", "4")
        assert code == 0
        assert doc["orness_exact"] == "0"
        assert doc["orness_average"] == pytest.approx(0.0, abs=1e-10)

    def test_choquet_text_shows_fraction(self, capsys, tmp_path):
        path = tmp_path / "mean.json"
        path.write_text(agg.SetFunction.arithmetic_mean(3).to_json())
        code, out, _ = run(capsys, "orness", "--choquet", str(path))
        assert code == 0 and "1/2" in out

    def test_choquet_n_mismatch(self, capsys, tmp_path):
        path = tmp_path / "min.json"
        path.write_text(agg.SetFunction.minimum(3).to_json())
        code, _, _ = run(capsys, "orness", "--choquet", str(path), "--n", "4")
        assert code == 2

    def test_choquet_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "orness", "--choquet", str(tmp_path / "nope.json"))
        assert code == 2

    def test_choquet_bad_json(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, _, _ = run(capsys, "orness", "--choquet", str(path))
        assert code == 2

    def test_min_any_n(self, capsys):
        code, doc, _ = run_json(capsys, "orness", "--builtin", "min", "--n", "7")
        assert code == 0
        assert doc["orness_average"] == pytest.approx(0.0, abs=1e-12)

    def test_non_internal_builtin(self, capsys):
        code, _, _ = run(capsys, "orness", "--builtin", "product", "--n", "3")
        assert code == 2

    def test_kernel_not_accepted(self, capsys):
        code, _, _ = run(capsys, "orness", "--kernel", "u", "--n", "3")
        assert code == 2


class TestIdempotency:
    KEYS = {"idempotency_average", "global_idempotency", "abs_error", "average_exact", "global_exact", "converged"}

    @pytest.mark.parametrize("n,avg,glob,avg_text,glob_text", [
        (3, 0.4, 0.5, "2/5", "1/2"),
        (2, 2 / 3, 0.75, "2/3", "3/4"),
    ])
    def test_product(self, capsys, n, avg, glob, avg_text, glob_text):
        code, doc, _ = run_json(capsys, "idempotency", "--builtin", "product", "--n", str(n))
        assert code == 0 and set(doc) == self.KEYS
        assert doc["idempotency_average"] == pytest.approx(avg, abs=1e-9)
        assert doc["global_idempotency"] == pytest.approx(glob, abs=1e-9)
        assert (doc["average_exact"], doc["global_exact"]) == (avg_text, glob_text)

    def test_min(self, capsys):
        code, doc, _ = run_json(capsys, "idempotency", "--builtin", "min", "--n", "5")
        assert code == 0
        assert doc["idempotency_average"] == pytest.approx(1.0, abs=1e-9)
        assert doc["global_idempotency"] == pytest.approx(1.0, abs=1e-9)

    def test_wrong_kind_is_spec_error(self, capsys):
        code, _, _ = run(capsys, "idempotency", "--builtin", "max", "--n", "3", "--kind", "conjunctive")
        assert code == 2

    def test_geometric_rejected(self, capsys):
        code, _, _ = run(capsys, "idempotency", "--builtin", "geometric", "--n", "3")
        assert code == 2


class TestExpectCdf:
    def test_relative_range_mean(self, capsys):
        code, doc, _ = run_json(capsys, "expect", "--g", "(v-u)/v", "--dist", "uniform:0,1", "--n", "3")
        assert code == 0 and set(doc) == RESULT_KEYS
        assert doc["value"] == pytest.approx(2 / 3, abs=1e-9)

    def test_relative_range_cdf(self, capsys):
        code, doc, _ = run_json(capsys, "cdf", "--g", "(v-u)/v", "--dist", "uniform:0,1", "--n", "4",
                                "--z", "0.5")
        assert code == 0 and set(doc) == RESULT_KEYS
        assert doc["value"] == pytest.approx(0.125, abs=1e-8)

    def test_exponential_max(self, capsys):
        code, doc, _ = run_json(capsys, "expect", "--g", "v", "--dist", "exp:1", "--n", "2")
        assert code == 0
        assert doc["value"] == pytest.approx(1.5, abs=1e-9)

    def test_heterogeneous(self, capsys):
        code, doc, _ = run_json(capsys, "expect", "--g", "v-u", "--dist", "uniform:0,1", "--dist", "uniform:0,2")
        assert code == 0
        # E|X - Y| for X ~ U(0,1), Y ~ U(0,2)
        assert doc["value"] == pytest.approx(2 / 3, abs=1e-9)

    def test_dist_file(self, capsys, tmp_path):
        path = tmp_path / "d.json"
        path.write_text(json.dumps({"kind": "exponential", "lambda": 2.0}))
        code, doc, _ = run_json(capsys, "expect", "--g", "u", "--dist-file", str(path), "--n", "3")
        assert code == 0
        assert doc["value"] == pytest.approx(1 / 6, abs=1e-9)

    def test_n_mismatch(self, capsys):
        code, _, _ = run(capsys, "expect", "--g", "v", "--dist", "exp:1", "--dist", "exp:2", "--n", "3")
        assert code == 2

    @pytest.mark.parametrize("dist", ["uniform:1,0", "exp:-1", "normal:0,1", "uniform:0", "exp:x"])
    def test_bad_dist(self, capsys, dist):
        code, _, _ = run(capsys, "expect", "--g", "v", "--dist", dist, "--n", "2")
        assert code == 2

    def test_bad_functional_variable(self, capsys):
        code, _, _ = run(capsys, "expect", "--g", "x1", "--dist", "exp:1", "--n", "3")
        assert code == 2

    def test_cdf_needs_single_dist(self, capsys):
        code, _, _ = run(capsys, "cdf", "--g", "v", "--dist", "exp:1", "--dist", "exp:2", "--z", "1")
        assert code == 2


class TestVerify:
    KEYS = {"reduced", "reduced_abs_error", "reduced_seconds", "oracle", "oracle_std_error", "oracle_samples",
            "oracle_seconds", "tensor", "tensor_seconds", "gap_sigmas", "passed"}

    def test_variance_range(self, capsys):
        code, doc, _ = run_json(capsys, "verify", "--builtin", "variance-range", "--n", "3", "--samples", "200000")
        assert code == 0 and set(doc) == self.KEYS
        assert doc["passed"] is True
        assert doc["reduced"] == pytest.approx(5 / 36, abs=1e-9)
        assert abs(doc["gap_sigmas"]) <= 4

    def test_geometric_orness(self, capsys):
        code, doc, _ = run_json(capsys, "verify", "--builtin", "geometric-orness", "--n", "2",
                                "--samples", "200000")
        assert code == 0 and doc["passed"]
        assert doc["reduced"] == pytest.approx(math.log(4) - 1, abs=1e-9)

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_constant_exact(self, capsys, n):
        code, doc, _ = run_json(capsys, "verify", "--kernel", "1", "--n", str(n), "--samples", "10000")
        assert code == 0
        assert doc["reduced"] == doc["oracle"] == 1.0
        assert doc["oracle_std_error"] == 0.0

    def test_expectation(self, capsys):
        code, doc, _ = run_json(capsys, "verify", "--g", "v-u", "--dist", "uniform:0,1", "--n", "3",
                                "--samples", "100000")
        assert code == 0 and doc["passed"] and doc["tensor"] is None

    def test_failure_exit_4(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "verify_passes", lambda *a, **k: False)
        code, out, _ = run(capsys, "verify", "--kernel", "v-u", "--n", "3", "--samples", "1000")
        assert code == 4 and "FAIL" in out

    def test_both_sources(self, capsys):
        code, _, _ = run(capsys, "verify", "--kernel", "v", "--g", "v", "--dist", "exp:1", "--n", "2")
        assert code == 2

    def test_seed_reproducible(self, capsys):
        argv = ("verify", "--kernel", "v*u", "--n", "3", "--samples", "50000", "--seed", "5")
        _, a, _ = run_json(capsys, *argv)
        _, b, _ = run_json(capsys, *argv)
        assert a["oracle"] == b["oracle"]


def test_table(capsys):
    code, doc, _ = run_json(capsys, "table")
    assert code == 0
    assert doc["max_gap"] <= 1e-6
    groups = {r["quantity"] for r in doc["rows"]}
    assert groups == {"geometric orness", "choquet orness", "choquet global=average", "product idempotency",
                      "product global idemp.", "relative range moment"}
    assert len(doc["rows"]) == 4 + 6 + 12 + 9


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "minmaxquad", "integrate", "--n", "3", "--kernel", "v-u",
                           "--format", "json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(0.5)


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["integrate", "--n"])
    assert info.value.code == 2
