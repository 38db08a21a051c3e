import io

import numpy as np
import pytest

from elastic_mining import csvio
from elastic_mining.cli import main
from elastic_mining.mining_model import argmax_gamma

from .test_econometrics import HP_FIXTURE_TREND

REFERENCE = ["--block-reward", "169441", "--hash-cost", "1.31", "--gamma", "1"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines())


def read_rows(text):
    cols = csvio.read_table(io.StringIO(text))
    cols.pop("_line")
    return cols


def sign_changes(values):
    s = np.sign(values)
    return np.flatnonzero(s[1:] != s[:-1])


@pytest.fixture
def synth_csv(tmp_path):
    path = tmp_path / "panel.csv"
    code, _, _ = run("synth", "--seed", 3, "--currencies", "BTC,ETH", "--rows", 400, "-o", path)
    assert code == 0
    return path


class TestEquilibrium:
    def test_reference_inputs(self):
        code, out, _ = run("equilibrium", *REFERENCE, "--attacker", "32336")
        assert code == 0
        r = kv(out)
        assert r["verdict"] == "TwoRoots"
        assert r["h2_stability"] == "stable"
        assert r["h1_stability"] == "unstable"
        assert 32336 < float(r["h1"]) < float(r["h2"])
        assert float(r["baseline_h"]) == pytest.approx(97008, abs=1)

    def test_collapse(self):
        code, out, _ = run("equilibrium", *REFERENCE, "--attacker", "40000")
        assert code == 0
        r = kv(out)
        assert r["verdict"] == "Collapse"
        assert float(r["m_max"]) == pytest.approx(37756, rel=2e-3)
        assert "h1" not in r

    def test_attacker_beyond_capacity_is_domain_error(self):
        code, _, err = run("equilibrium", *REFERENCE, "--attacker", "200000")
        assert code == 3
        assert err.startswith("error:")

    @pytest.mark.parametrize("bad", [["--gamma", "1.5"], ["--hash-cost", "-1"],
                                     ["--hash-cost", "nan"], ["--attacker", "x"]])
    def test_bad_flags(self, bad):
        argv = ["equilibrium", "--block-reward", "10", "--hash-cost", "1", "--attacker", "1"] + bad
        assert run(*argv)[0] == 2

    def test_missing_subcommand(self):
        assert run()[0] == 2

    def test_share_flag(self):
        by_share = kv(run("equilibrium", *REFERENCE, "--attacker-share", "0.25")[1])
        direct = kv(run("equilibrium", *REFERENCE, "--attacker", 0.25 * 169441 / 1.31)[1])
        assert by_share == direct


class TestMmaxTable:
    def test_endpoints_and_order(self):
        code, out, _ = run("mmax-table", "--steps", 11, "--format", "csv")
        assert code == 0
        cols = read_rows(out)
        gamma, a, f = (np.array(cols[k]) for k in ("gamma", "alpha_max", "f_alpha_max"))
        assert len(gamma) == 11
        assert f[0] == pytest.approx(0.3475, abs=5e-4)
        assert f[-1] == pytest.approx(0.2919, abs=5e-4)
        assert np.all(np.diff(gamma) > 0)
        assert np.all(np.diff(f) <= 0)
        for g, x in zip(gamma, a):
            assert argmax_gamma(x) == pytest.approx(g, abs=1e-6)

    def test_human_table(self):
        code, out, _ = run("mmax-table", "--steps", 2)
        lines = out.splitlines()
        assert code == 0 and len(lines) == 3
        assert lines[1].split()[-1] == "0.3475"
        assert lines[2].split()[-1] == "0.2919"

    def test_steps_validated(self):
        assert run("mmax-table", "--steps", 1)[0] == 2


class TestCurve:
    def test_reference_crossings_bracket_roots(self):
        r = kv(run("equilibrium", *REFERENCE, "--attacker-share", "0.25")[1])
        code, out, _ = run("curve", *REFERENCE, "--attacker-share", "0.25")
        assert code == 0
        cols = read_rows(out)
        h, rev, cost = (np.array(cols[k]) for k in ("h", "revenue", "cost"))
        assert np.all(cost == 1.31)
        idx = sign_changes(rev - cost)
        assert len(idx) == 2
        for k, root in zip(idx, (float(r["h1"]), float(r["h2"]))):
            assert h[k] <= root <= h[k + 1]

    def test_collapse_has_no_crossings(self):
        code, out, _ = run("curve", *REFERENCE, "--attacker", "40000", "--points", 50)
        cols = read_rows(out)
        assert code == 0
        assert len(sign_changes(np.array(cols["revenue"]) - np.array(cols["cost"]))) == 0

    def test_writes_file(self, tmp_path):
        path = tmp_path / "c.csv"
        code, out, _ = run("curve", *REFERENCE, "--attacker", "30000", "--points", 10, "-o", path)
        assert code == 0 and out == ""
        assert len(path.read_text().splitlines()) == 11

    def test_bad_range(self):
        argv = ["curve", *REFERENCE, "--attacker", "30000"]
        assert run(*argv, "--points", 5)[0] == 2
        assert run(*argv, "--h-min", 0)[0] == 2
        assert run(*argv, "--h-min", 5e5, "--h-max", 1e5)[0] == 2


class TestSimulate:
    def test_protocol_byte_identical(self):
        argv = ["simulate", "protocol", "--alpha", 0.35, "--gamma", 1, "--blocks", 200_000,
                "--replicas", 8, "--seed", 42]
        first = run(*argv)
        assert first[0] == 0
        assert run(*argv) == first
        assert run(*argv, "--workers", 2) == first
        r = kv(first[1])
        assert abs(float(r["pool_reward_rate"]) - float(r["closed_form_pool"])) <= 3 * float(
            r["pool_reward_se"])

    def test_protocol_requires_seed_and_valid_alpha(self):
        assert run("simulate", "protocol", "--alpha", 0.3, "--gamma", 0)[0] == 2
        assert run("simulate", "protocol", "--alpha", 0.7, "--gamma", 0, "--seed", 1)[0] == 2

    def test_dynamics_below_unstable_root(self):
        r = kv(run("equilibrium", *REFERENCE, "--attacker-share", "0.25")[1])
        h0 = 0.99 * float(r["h1"])
        code, out, _ = run("simulate", "dynamics", *REFERENCE, "--attacker-share", 0.25,
                           "--h0", h0)
        assert code == 0
        assert kv(out)["terminal"] == "Collapsed"
        assert float(kv(out)["h_final"]) == 0.0

    def test_dynamics_at_stable_root(self):
        r = kv(run("equilibrium", *REFERENCE, "--attacker-share", "0.25")[1])
        code, out, _ = run("simulate", "dynamics", *REFERENCE, "--attacker-share", 0.25,
                           "--h0", r["h2"])
        assert code == 0
        d = kv(out)
        assert d["terminal"] == "ConvergedStable"
        assert int(d["steps"]) <= 1

    def test_dynamics_trajectory_csv(self, tmp_path):
        path = tmp_path / "traj.csv"
        code, _, _ = run("simulate", "dynamics", *REFERENCE, "--attacker-share", 0.25,
                         "--h0", 150000, "--trajectory", path)
        assert code == 0
        cols = csvio.read_csv(path, required=("step", "h", "profit"))
        assert cols["step"][0] == 0 and cols["h"][0] == 150000


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestDetrend:
    def test_linear_input_has_flat_cycle(self, tmp_path):
        dates = np.datetime64("2020-01-01") + np.arange(200)
        body = "".join(f"{d},{10 + 0.5 * k}\n" for k, d in enumerate(dates))
        path = _write(tmp_path / "lin.csv", "date,hashrate\n" + body)
        code, out, _ = run("detrend", "-i", path, "--no-log")
        cols = read_rows(out)
        assert code == 0
        assert np.max(np.abs(cols["cycle"])) <= 1e-9
        raw, trend, cycle = (np.array(cols[k]) for k in ("raw", "trend", "cycle"))
        np.testing.assert_allclose(trend + cycle, raw, rtol=1e-10)

    def test_fixture_matches_dense_oracle(self, tmp_path):
        body = "".join(f"2020-01-0{k + 1},{v}\n" for k, v in enumerate([1, 2, 4, 3, 5]))
        path = _write(tmp_path / "fx.csv", "date,hashrate\n" + body)
        code, out, _ = run("detrend", "-i", path, "--no-log", "--lambda", 10)
        assert code == 0
        np.testing.assert_allclose(read_rows(out)["trend"], HP_FIXTURE_TREND, rtol=1e-11)

    def test_bk_trims_24_rows(self, synth_csv):
        code, out, _ = run("detrend", "-i", synth_csv, "--currency", "BTC", "--filter", "bk")
        assert code == 0
        assert len(read_rows(out)["date"]) == 400 - 24

    def test_cf_conserves(self, synth_csv):
        code, out, _ = run("detrend", "-i", synth_csv, "--currency", "ETH", "--filter", "cf")
        cols = read_rows(out)
        np.testing.assert_allclose(np.array(cols["trend"]) + cols["cycle"], cols["raw"],
                                   rtol=1e-10)

    def test_multi_currency_needs_selection(self, synth_csv):
        assert run("detrend", "-i", synth_csv)[0] == 2

    def test_malformed_value_reports_line(self, tmp_path):
        path = _write(tmp_path / "bad.csv", "date,hashrate\n2020-01-01,1\n2020-01-02,abc\n")
        code, _, err = run("detrend", "-i", path)
        assert code == 2
        assert "line 3" in err

    def test_bad_date_reports_line(self, tmp_path):
        path = _write(tmp_path / "bad.csv", "date,hashrate\n2020-01-01,1\n01/02/2020,2\n")
        code, _, err = run("detrend", "-i", path)
        assert code == 2 and "line 3" in err

    def test_missing_column(self, tmp_path):
        path = _write(tmp_path / "bad.csv", "date,price\n2020-01-01,1\n")
        assert run("detrend", "-i", path)[0] == 2

    def test_gap_is_precondition_failure(self, tmp_path):
        rows = [f"2020-01-{d:02d},{d}\n" for d in (1, 2, 3, 5, 6, 7)]
        path = _write(tmp_path / "gap.csv", "date,hashrate\n" + "".join(rows))
        assert run("detrend", "-i", path)[0] == 4

    def test_too_short_for_bk(self, tmp_path):
        rows = [f"2020-01-{d:02d},{d}\n" for d in range(1, 11)]
        path = _write(tmp_path / "short.csv", "date,hashrate\n" + "".join(rows))
        assert run("detrend", "-i", path, "--filter", "bk")[0] == 4

    def test_missing_file(self, tmp_path):
        assert run("detrend", "-i", tmp_path / "nope.csv")[0] == 2


class TestRegress:
    def test_recovers_planted_elasticity(self, tmp_path):
        path = tmp_path / "p.csv"
        run("synth", "--seed", 7, "--rows", 1300, "-o", path)
        code, out, _ = run("regress", "-i", path, "--format", "kv")
        r = kv(out)
        assert code == 0
        assert float(r["coefficient_syn"]) == pytest.approx(0.15, abs=0.02)
        assert float(r["p_value_syn"]) < 0.01
        code, out, _ = run("regress", "-i", path)
        assert "***" in out.splitlines()[2]
        assert "t-values in parentheses" in out

    def test_zero_noise_caps_t(self, tmp_path):
        path = tmp_path / "p.csv"
        run("synth", "--seed", 1, "--rows", 300, "--noise", 0, "-o", path)
        r = kv(run("regress", "-i", path, "--format", "kv")[1])
        assert float(r["coefficient_syn"]) == pytest.approx(0.15, abs=1e-9)
        assert float(r["t_value_syn"]) == 1e6

    def test_bk_drops_24_per_currency(self, synth_csv):
        hp = kv(run("regress", "-i", synth_csv, "--format", "kv")[1])
        bk = kv(run("regress", "-i", synth_csv, "--format", "kv", "--filter", "bk")[1])
        for cur in ("btc", "eth"):
            assert int(hp[f"n_obs_{cur}"]) - int(bk[f"n_obs_{cur}"]) == 24

    def test_scale_flag_leaves_estimate(self, synth_csv):
        base = kv(run("regress", "-i", synth_csv, "--format", "kv")[1])
        scaled = kv(run("regress", "-i", synth_csv, "--format", "kv",
                        "--scale", f"BTC={2**32}")[1])
        assert float(scaled["coefficient_btc"]) == pytest.approx(
            float(base["coefficient_btc"]), rel=1e-8)

    def test_difference_flag(self, synth_csv):
        r = kv(run("regress", "-i", synth_csv, "--format", "kv", "--difference", "ETH=thr")[1])
        assert int(r["n_obs_eth"]) == 399
        assert int(r["n_obs_btc"]) == 400

    @pytest.mark.parametrize("flag", [["--scale", "BTC=0"], ["--scale", "XYZ=2"],
                                      ["--difference", "BTC=foo"], ["--scale", "noequals"]])
    def test_bad_assignments(self, synth_csv, flag):
        assert run("regress", "-i", synth_csv, *flag)[0] == 2

    def test_missing_schema_column(self, tmp_path):
        path = _write(tmp_path / "m.csv", "date,price,difficulty,hashrate\n2020-01-01,1,1,1\n")
        code, _, err = run("regress", "-i", path)
        assert code == 2 and "coinbase_reward" in err


def test_csv_round_trip_is_idempotent(synth_csv, tmp_path):
    text = synth_csv.read_text()
    markets = csvio.read_markets(synth_csv)
    again = io.StringIO()
    csvio.write_markets(again, markets)
    assert again.getvalue() == text
    copy = _write(tmp_path / "copy.csv", again.getvalue())
    reread = csvio.read_markets(copy)
    for a, b in zip(markets, reread):
        for col in ("price", "difficulty", "hashrate", "coinbase_reward"):
            np.testing.assert_array_equal(getattr(a, col), getattr(b, col))


def test_fmt_round_trips_printed_values():
    for x in (0.1, 1 / 3, 97008.2061068702, 1e-300, 2.0**40, -0.0):
        assert float(csvio.fmt(float(csvio.fmt(x)))) == float(csvio.fmt(x))
