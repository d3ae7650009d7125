import json

import numpy as np
import pytest

import rickwarp.propcheck as propcheck
from rickwarp.cli import main
from rickwarp.curvature import WarpedMetric, verify_metric
from rickwarp.io import MetricFileError, read_metric, sidecar_path, write_metric
from rickwarp.kchain import ProfileCheck


def round_cap_metric(p=2, q=2, n=801):
    """Unit round sphere from the cap tip ``t = 0`` to just short of the other pole."""
    t = np.linspace(0.0, np.pi / 2 - 0.05, n)
    cols = np.sin(t), np.cos(t), -np.sin(t), np.cos(t), -np.sin(t), -np.cos(t)
    return WarpedMetric(p, q, t, *cols, junctions={"mid": float(t[400])}, cap_radius=1.0,
                        provenance={"fixture": "round-cap"})


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    """One CLI construction of (2, 2, 4) shared by the tests below."""
    d = tmp_path_factory.mktemp("built")
    code = main(["construct", "--p", "2", "--q", "2", "--k", "4", "--ratio", "1.0",
                 "--rho-over-n", "auto", "--out", str(d / "m224")])
    return code, d


class TestMetricFile:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        t = np.cumsum(rng.uniform(1e-3, 1.0, 50))
        cols = [rng.standard_normal(50) * 10.0 ** rng.integers(-12, 12, 50) for _ in range(6)]
        cols[0] = np.abs(cols[0]) + 1e-3
        cols[3] = np.abs(cols[3]) + 1e-3
        m = WarpedMetric(3, 2, t, *cols, junctions={"j": float(t[7])}, provenance={"seed": 5})
        path, side = write_metric(tmp_path / "x.csv", m)
        back = read_metric(path)
        np.testing.assert_array_equal(back.t, m.t)
        for a, b in zip(back.columns(), m.columns()):
            np.testing.assert_array_equal(a, b)
        assert back.junctions == {"j": float(t[7])} and (back.p, back.q) == (3, 2)
        assert back.provenance["seed"] == 5 and "version" in back.provenance

    def test_bad_header(self, tmp_path):
        path, _ = write_metric(tmp_path / "x.csv", round_cap_metric())
        lines = path.read_text().splitlines()
        lines[0] = lines[0].replace("h1", "dh")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MetricFileError):
            read_metric(path)

    def test_missing_sidecar(self, tmp_path):
        path, side = write_metric(tmp_path / "x.csv", round_cap_metric())
        side.unlink()
        with pytest.raises(MetricFileError):
            read_metric(path)

    def test_malformed_sidecar(self, tmp_path):
        path, side = write_metric(tmp_path / "x.csv", round_cap_metric())
        side.write_text(json.dumps({"q": 2}))
        with pytest.raises(MetricFileError):
            read_metric(path)

    def test_junction_off_grid(self, tmp_path):
        path, side = write_metric(tmp_path / "x.csv", round_cap_metric())
        doc = json.loads(side.read_text())
        doc["junctions"]["mid"] += 1e-7
        side.write_text(json.dumps(doc))
        with pytest.raises(MetricFileError):
            read_metric(path)

    def test_non_increasing_t(self, tmp_path):
        path, _ = write_metric(tmp_path / "x.csv", round_cap_metric())
        lines = path.read_text().splitlines()
        lines[3], lines[4] = lines[4], lines[3]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MetricFileError):
            read_metric(path)

    def test_sidecar_name(self):
        assert sidecar_path("a/b.csv").name == "b.json"


class TestVerify:
    def test_round_cap_passes(self, tmp_path, capsys):
        path, _ = write_metric(tmp_path / "cap.csv", round_cap_metric())
        code, out, _ = run(capsys, "verify", path, "--k", 4, "--report", tmp_path / "r.json")
        assert code == 0 and json.loads(out)["verdict"] == "pass"
        assert json.loads((tmp_path / "r.json").read_text())["verdict"] == "pass"

    def test_corrupted_fixture_fails_with_witness(self, tmp_path, capsys):
        m = round_cap_metric()
        h2 = m.h2.copy()
        h2[300:310] = 5.0
        bad = WarpedMetric(m.p, m.q, m.t, m.h, m.h1, h2, m.f, m.f1, m.f2, junctions=m.junctions,
                           cap_radius=1.0)
        path, _ = write_metric(tmp_path / "bad.csv", bad)
        code, out, _ = run(capsys, "verify", path, "--k", 4)
        doc = json.loads(out)
        assert code == 1 and doc["verdict"] == "fail"
        assert m.t[299] <= doc["worst_sample"]["t"] <= m.t[310]
        assert doc["worst_sample"]["chain_min"] < 0

    def test_missing_file_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(capsys, "verify", tmp_path / "nope.csv", "--k", 4)
        assert code == 64 and "cannot read" in err

    def test_malformed_file_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "junk.csv"
        path.write_text("hello\n1,2\n")
        code, _, _ = run(capsys, "verify", path, "--k", 4)
        assert code == 64

    def test_inadmissible_k(self, tmp_path, capsys):
        path, _ = write_metric(tmp_path / "cap.csv", round_cap_metric())
        code, _, _ = run(capsys, "verify", path, "--k", 3)
        assert code == 1


class TestConstruct:
    def test_pass_and_files(self, built):
        code, d = built
        assert code == 0
        assert (d / "m224.csv").exists() and (d / "m224.json").exists()
        report = json.loads((d / "m224.report.json").read_text())
        assert report["verdict"] == "pass" and report["kappa"] > 0

    def test_reverify_matches_embedded_report(self, built, capsys):
        _, d = built
        code, out, _ = run(capsys, "verify", d / "m224.csv", "--k", 4)
        embedded = json.loads((d / "m224.report.json").read_text())["report"]
        doc = json.loads(out)
        assert code == 0 and doc["verdict"] == embedded["verdict"]
        assert doc["margin_minima"] == embedded["margin_minima"]

    def test_sidecar_provenance(self, built):
        _, d = built
        prov = read_metric(d / "m224.csv").provenance
        assert prov["kappa"] > 0 and prov["params"]["k"] == 4 and "version" in prov

    def test_necessity_exit_1(self, tmp_path, capsys):
        code, _, err = run(capsys, "construct", "--p", 2, "--q", 2, "--k", 3, "--out", tmp_path / "x")
        assert code == 1 and "k >=" in err

    def test_infeasible_exit_2(self, tmp_path, capsys):
        code, _, err = run(capsys, "construct", "--p", 2, "--q", 2, "--k", 4, "--rho-over-n", "1e9",
                           "--out", tmp_path / "x")
        assert code == 2 and "kappa" in err

    def test_nonconvergence_exit_3(self, tmp_path, capsys):
        code, _, err = run(capsys, "construct", "--p", 3, "--q", 3, "--k", 5, "--ratio", 0.5,
                           "--out", tmp_path / "x")
        assert code == 3 and "slope" in err

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"p": 2, "q": 2, "k": 4, "ratio": 1.0}))
        code, out, _ = run(capsys, "kappa", "--config", cfg)
        assert code == 0 and json.loads(out)["kappa"] > 0

    def test_config_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"p": 2, "q": 2, "k": 4, "bogus": 1}))
        code, _, _ = run(capsys, "kappa", "--config", cfg)
        assert code == 1

    def test_missing_flags(self, capsys):
        code, _, err = run(capsys, "kappa", "--p", 2)
        assert code == 1 and "--q" in err

    def test_bad_rho_is_usage(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["construct", "--p", "2", "--q", "2", "--k", "4", "--rho-over-n", "lots"])
        assert info.value.code == 64


class TestKappa:
    def test_positive_and_deterministic(self, capsys):
        code1, out1, _ = run(capsys, "kappa", "--p", 2, "--q", 2, "--k", 4, "--ratio", 1.0)
        code2, out2, _ = run(capsys, "kappa", "--p", 2, "--q", 2, "--k", 4, "--ratio", 1.0)
        assert code1 == code2 == 0 and out1 == out2
        assert json.loads(out1)["kappa"] > 0

    def test_inadmissible(self, capsys):
        code, _, _ = run(capsys, "kappa", "--p", 2, "--q", 2, "--k", 3)
        assert code == 1


class TestPropcheck:
    def test_clean_run_and_repeatable(self, capsys):
        args = ("propcheck", "--trials", 30, "--seed", 7, "--samples", 500)
        code1, out1, _ = run(capsys, *args)
        code2, out2, _ = run(capsys, *args)
        assert code1 == 0 and out1 == out2
        doc = json.loads(out1)
        assert doc["violations"] == [] and doc["checked"] == 30

    def test_planted_counterexample_reported(self, tmp_path, capsys):
        # lambda_12 very negative: the profile (base 2, two vectors from block 1) sums below zero
        fx = [{"dims": [1, 3, 3], "lambda": [[None, -5.0, 1.0], [-5.0, 1.0, 1.0], [1.0, 1.0, 1.0]], "k": 3}]
        path = tmp_path / "fx.json"
        path.write_text(json.dumps(fx))
        code, out, _ = run(capsys, "propcheck", "--trials", 0, "--fixture", path, "--samples", 200)
        doc = json.loads(out)
        assert code == 0 and doc["counterexamples"] == 1
        ex = doc["counterexample_examples"][0]
        assert ex["witness_value"] == pytest.approx(ex["min_profile"]) and ex["min_profile"] < 0

    def test_broken_criterion_is_flagged(self, monkeypatch, capsys):
        # fault injection: a checker that always says yes must be caught by sampling
        monkeypatch.setattr(propcheck, "check_profile_hypothesis",
                            lambda block, k: ProfileCheck(True, 1.0, 1.0, None))
        code, out, _ = run(capsys, "propcheck", "--trials", 40, "--seed", 1, "--samples", 500)
        doc = json.loads(out)
        assert code == 1 and doc["violations"]
        assert doc["violations"][0]["violation"] == "soundness"

    def test_zero_trials_without_fixture(self, capsys):
        code, _, _ = run(capsys, "propcheck", "--trials", 0)
        assert code == 1

    def test_bad_fixture_file(self, tmp_path, capsys):
        path = tmp_path / "fx.json"
        path.write_text("{not json")
        code, _, _ = run(capsys, "propcheck", "--fixture", path)
        assert code == 64


class TestPlan:
    def test_three_two_five(self, capsys):
        code, out, _ = run(capsys, "plan", "--n", 3, "--m", 2, "--r", 5)
        doc = json.loads(out)
        assert code == 0 and doc["k_min"] == 4 and doc["betti_total"] == 12

    def test_three_three_one(self, capsys):
        code, out, _ = run(capsys, "plan", "--n", 3, "--m", 3, "--r", 1)
        assert code == 0 and json.loads(out)["k_min"] == 5

    def test_two_two_rejected(self, capsys):
        code, _, err = run(capsys, "plan", "--n", 2, "--m", 2, "--r", 1)
        assert code == 1 and "n = m >= 3" in err

    def test_plan_feeds_construct(self, tmp_path, capsys):
        plan = tmp_path / "plan.json"
        code, _, _ = run(capsys, "plan", "--n", 3, "--m", 2, "--r", 1, "--with-kappa", "--out", plan)
        assert code == 0
        doc = json.loads(plan.read_text())
        assert doc["rho"] == pytest.approx(doc["kappa"] / 2)
        code, out, _ = run(capsys, "kappa", "--plan", plan)
        assert code == 0 and json.loads(out)["k"] == 4


def test_usage_error_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 64


def test_library_verify_agrees_with_cli_fixture():
    assert verify_metric(round_cap_metric(), 4).verdict == "pass"
