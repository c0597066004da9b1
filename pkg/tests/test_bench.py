"""Harness contracts: counting, determinism, CSV/JSON output, CLI exit codes."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from bdris.bench import (ExperimentSpec, SweepSpec, compare_architectures,
                         parse_mask_label, run)
from bdris.channel import ScenarioConfig
from bdris.cli import main as cli_main

FAST = ScenarioConfig(n=2, k=2, m=6, mask_kind="single", seed=0, gamma_db=1.0)
FAST_PARAMS = {"max_iters": 120}


def fast_spec(**kwargs):
    base = dict(mode="sumrate", scenario=FAST, params=dict(FAST_PARAMS),
                seeds=[1, 2])
    base.update(kwargs)
    return ExperimentSpec(**base)


class TestRun:
    def test_row_and_summary_counts(self):
        spec = fast_spec(sweep=SweepSpec(variable="m", values=[6, 8]))
        result = run(spec)
        assert len(result.rows) == 4
        assert len(result.summary) == 2
        # one row per (axis value, seed), sorted
        assert [(r.axis, r.seed) for r in result.rows] == \
            [(6, 1), (6, 2), (8, 1), (8, 2)]

    def test_deterministic_rows(self):
        spec = fast_spec()
        a, b = run(spec), run(spec)
        for ra, rb in zip(a.rows, b.rows):
            assert ra.objective == rb.objective
            assert ra.iters == rb.iters
            assert ra.residual == rb.residual
            assert ra.status == rb.status

    def test_summary_matches_rows(self):
        spec = fast_spec(sweep=SweepSpec(variable="p_t_dbm", values=[20.0, 30.0]))
        result = run(spec)
        for s in result.summary:
            objs = [r.objective for r in result.rows if r.axis == s.axis]
            assert abs(s.objective_mean - np.mean(objs)) <= 1e-12

    def test_mask_sweep_axis(self):
        spec = fast_spec(sweep=SweepSpec(variable="mask_kind",
                                         values=["single", "group:3", "fully"]))
        result = run(spec)
        assert len(result.rows) == 6

    def test_powermin_rows_have_margin(self):
        spec = fast_spec(mode="powermin", params={"max_iters": 400})
        result = run(spec)
        for r in result.rows:
            assert r.margin is not None

    def test_output_files(self, tmp_path):
        out = tmp_path / "exp.csv"
        spec = fast_spec(output_path=str(out))
        result = run(spec)
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["axis", "seed", "objective", "objective_alt_units",
                           "iters", "residual", "time_ms", "status", "margin"]
        assert len(rows) == 1 + len(result.rows)
        # shortest round-trip float format
        assert float(rows[1][2]) == result.rows[0].objective
        summary = (tmp_path / "exp.csv.summary.csv").read_text()
        assert summary.startswith("axis,n,objective_mean")
        prov = json.loads((tmp_path / "exp.csv.provenance.json").read_text())
        assert prov["rng_algorithm"].startswith("numpy.random")
        assert prov["spec"]["scenario"]["m"] == 6

    def test_sumrate_units(self):
        result = run(fast_spec())
        r = result.rows[0]
        assert abs(r.objective_alt - r.objective / np.log(2)) < 1e-12

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            run(fast_spec(mode="maxmin"))
        with pytest.raises(ValueError):
            run(fast_spec(seeds=[]))
        with pytest.raises(ValueError):
            run(fast_spec(sweep=SweepSpec(variable="bandwidth", values=[1])))
        with pytest.raises(ValueError):
            run(fast_spec(params={"momentum": 0.9}))


class TestCompare:
    def test_single_mask_degenerate(self):
        cmp = compare_architectures(fast_spec(), ["single"])
        assert len(cmp.ranked) == 1
        assert cmp.ranked[0].n_parameters == 6
        assert not cmp.pairs

    def test_two_masks_pairing(self):
        cmp = compare_architectures(fast_spec(), ["fully", "single"])
        assert len(cmp.pairs) == 1
        p = cmp.pairs[0]
        assert p.first_wins + p.second_wins + p.ties == 2
        labels = [m.label for m in cmp.ranked]
        assert set(labels) == {"fully", "single"}

    def test_parameter_counts_reported(self):
        cmp = compare_architectures(
            fast_spec(), ["tree_tridiagonal", "group:3"])
        counts = {m.label: m.n_parameters for m in cmp.ranked}
        assert counts["tree_tridiagonal"] == 2 * 6 - 1
        assert counts["group:3"] == 2 * (3 * 4 // 2)

    def test_sweep_rejected(self):
        spec = fast_spec(sweep=SweepSpec(variable="m", values=[6]))
        with pytest.raises(ValueError):
            compare_architectures(spec, ["single"])


class TestMaskLabels:
    def test_parse_variants(self):
        assert parse_mask_label("single") == ("single", None)
        assert parse_mask_label("group:4") == ("group", 4)
        assert parse_mask_label("group(4)") == ("group", 4)
        assert parse_mask_label("group", 2) == ("group", 2)
        with pytest.raises(ValueError):
            parse_mask_label("group")


class TestCli:
    def write_config(self, tmp_path, doc):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def spec_doc(self, mode="sumrate"):
        import dataclasses

        return {"mode": mode, "scenario": dataclasses.asdict(FAST),
                "params": dict(FAST_PARAMS), "seeds": [0]}

    def test_sumrate_roundtrip(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, self.spec_doc())
        out = tmp_path / "res.csv"
        code = cli_main(["sumrate", "--config", cfg, "--seed-list", "3,4",
                         "--out", str(out)])
        assert code == 0
        assert out.exists()
        with out.open() as fh:
            assert len(list(csv.reader(fh))) == 3   # header + 2 seeds
        assert "objective" in capsys.readouterr().out

    def test_scenario_only_config(self, tmp_path):
        import dataclasses

        cfg = self.write_config(tmp_path, dataclasses.asdict(
            ScenarioConfig(n=2, k=2, m=4, mask_kind="single")))
        code = cli_main(["sumrate", "--config", cfg, "--seed-list", "1"])
        assert code == 0

    def test_mode_mismatch_is_error(self, tmp_path):
        cfg = self.write_config(tmp_path, self.spec_doc(mode="powermin"))
        assert cli_main(["sumrate", "--config", cfg]) == 1

    def test_missing_config_file_is_error(self):
        assert cli_main(["sumrate", "--config", "/nonexistent.json"]) == 1

    def test_compare_output(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, self.spec_doc())
        code = cli_main(["compare", "--config", cfg,
                         "--masks", "single,fully", "--seed-list", "1,2"])
        assert code == 0
        txt = capsys.readouterr().out
        assert "free params" in txt
        assert "wins" in txt

    def test_infeasible_exit_code(self, tmp_path):
        # absurd SINR targets at tiny power make the certificate fail
        doc = self.spec_doc(mode="powermin")
        doc["scenario"]["gamma_db"] = 60.0
        doc["params"] = {"max_iters": 5}
        cfg = self.write_config(tmp_path, doc)
        out = tmp_path / "res.csv"
        code = cli_main(["powermin", "--config", cfg, "--seed-list", "1",
                         "--out", str(out)])
        assert code == 2
        assert out.exists()   # output still written

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "bdris.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "sumrate" in proc.stdout

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            cli_main(["frobnicate"])
        assert exc.value.code == 1
