import csv
import json
import os

import pytest

from mixlr import io as mio
from mixlr.cli import EXIT_GOLDEN, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from mixlr.genotypes import FrequencyTable
from mixlr.model import Genotype, Peak, Profile
from mixlr.study import ENGINE_MLE, NONDONOR_RESAMPLED, LrRecord
from mixlr.toy import check_golden


class TestRoundTrips:
    def test_profile_csv(self, tmp_path, toy_profile):
        path = tmp_path / "profile.csv"
        mio.write_profile_csv(path, toy_profile)
        back = mio.read_profile_csv(path)
        assert back.analytical_threshold == toy_profile.analytical_threshold
        assert [(p.allele, p.height, p.size) for p in back.peaks("L")] == [
            (p.allele, p.height, p.size) for p in toy_profile.peaks("L")
        ]

    def test_profile_csv_with_sizes(self, tmp_path):
        prof = Profile({"L": [Peak("12", 800.0, size=150.5)]}, 40.0)
        path = tmp_path / "p.csv"
        mio.write_profile_csv(path, prof)
        back = mio.read_profile_csv(path)
        assert back.peaks("L")[0].size == 150.5

    def test_frequency_table(self, tmp_path, toy_table):
        path = tmp_path / "freq.csv"
        mio.write_frequency_table(path, toy_table)
        back = mio.read_frequency_table(path)
        assert back.frequencies == toy_table.frequencies
        assert back.n_individuals == toy_table.n_individuals

    def test_genotype_csv(self, tmp_path):
        g = {"L": Genotype("A", "B"), "M": Genotype("10", "10")}
        path = tmp_path / "g.csv"
        mio.write_genotype_csv(path, g)
        assert mio.read_genotype_csv(path) == g

    def test_records_csv_with_exclusion(self, tmp_path):
        records = [
            LrRecord(0, NONDONOR_RESAMPLED, ENGINE_MLE, 1.25, c2_hp=14.0, c2_hd=9.0),
            LrRecord(1, NONDONOR_RESAMPLED, ENGINE_MLE, None),
        ]
        path = tmp_path / "records.csv"
        mio.write_records_csv(path, records)
        text = path.read_text()
        assert "EXCLUSION" in text
        back = mio.read_records_csv(path)
        assert back == records

    def test_calibration_csv_grouping(self, tmp_path):
        path = tmp_path / "cal.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["log10_lr", "label", "system"])
            w.writerow(["1.5", "HP", "sysA"])
            w.writerow(["EXCLUSION", "HA", "sysA"])
            w.writerow(["-0.5", "HA", "sysB"])
        grouped = mio.read_calibration_csv(path)
        assert grouped["sysA"] == [(1.5, "HP"), (None, "HA")]
        assert grouped["sysB"] == [(-0.5, "HA")]

    def test_metadata_stamp(self):
        meta = mio.output_metadata(seed=7, config={"a": 1})
        assert meta["format"] == mio.FORMAT_VERSION
        assert meta["seed"] == 7
        assert len(meta["config_hash"]) == 16


@pytest.fixture
def toy_files(tmp_path, toy_profile, toy_table):
    mio.write_profile_csv(tmp_path / "profile.csv", toy_profile)
    mio.write_frequency_table(tmp_path / "freq.csv", toy_table)
    mio.write_genotype_csv(tmp_path / "poi.csv", {"L": Genotype("B", "B")})
    (tmp_path / "hp.json").write_text(
        json.dumps({"noc": 2, "fixed": {"1": "poi.csv"}, "label": "Hp"})
    )
    (tmp_path / "hd.json").write_text(json.dumps({"noc": 1, "label": "Hd"}))
    return tmp_path


class TestCli:
    def test_toy_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "toy"
        assert main(["toy", "--mode", "lattice", "--out", str(out)]) == EXIT_OK
        assert (out / "toy_grid.csv").exists()
        report = json.loads((out / "toy_report.json").read_text())
        assert report["lattice"]["int_h2"] == pytest.approx(0.2050, abs=1e-3)

    def test_toy_check_matches_library(self, capsys):
        # the CLI self-check and the library report identically
        expected = EXIT_OK if not check_golden() else EXIT_GOLDEN
        assert main(["toy", "--mode", "lattice", "--check"]) == expected

    def test_lr_both_engines(self, toy_files, tmp_path, capsys):
        out = tmp_path / "lr.json"
        code = main(
            [
                "lr",
                "--profile", str(toy_files / "profile.csv"),
                "--freq", str(toy_files / "freq.csv"),
                "--hp", str(toy_files / "hp.json"),
                "--hd", str(toy_files / "hd.json"),
                "--engine", "both",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        captured = capsys.readouterr().out
        assert "MLE log10 LR:" in captured and "Integrated LR:" in captured
        payload = json.loads(out.read_text())
        assert payload["int"]["marginal_hd"] > 0
        assert "metadata" in payload

    def test_missing_file_is_io_error(self, toy_files, capsys):
        code = main(
            [
                "lr",
                "--profile", "/does/not/exist.csv",
                "--freq", str(toy_files / "freq.csv"),
                "--hp", str(toy_files / "hp.json"),
                "--hd", str(toy_files / "hd.json"),
            ]
        )
        assert code == EXIT_IO

    def test_bad_policy_is_validation_error(self, toy_files, capsys):
        code = main(
            [
                "lr",
                "--profile", str(toy_files / "profile.csv"),
                "--freq", str(toy_files / "freq.csv"),
                "--hp", str(toy_files / "hp.json"),
                "--hd", str(toy_files / "hd.json"),
                "--policy", "bogus",
            ]
        )
        assert code == EXIT_VALIDATION

    def test_study_and_calibrate_end_to_end(self, tmp_path, capsys):
        freqs = {
            "L0": {"10": 0.4, "11": 0.35, "12": 0.25},
            "L1": {"10": 0.4, "11": 0.35, "12": 0.25},
        }
        table = FrequencyTable(freqs, n_individuals=500)
        mio.write_frequency_table(tmp_path / "freq.csv", table)
        (tmp_path / "study.json").write_text(
            json.dumps(
                {
                    "freq": "freq.csv",
                    "noc": 1,
                    "n_cases": 2,
                    "n_nondonors_per_case": 2,
                    "engines": ["MLE"],
                    "n_starts": 2,
                }
            )
        )
        out = tmp_path / "study_out"
        code = main(
            ["study", "--config", str(tmp_path / "study.json"), "--seed", "3",
             "--out", str(out)]
        )
        assert code == EXIT_OK
        records = mio.read_records_csv(out / "records.csv")
        assert len(records) == 2 * 3
        summary = json.loads((out / "summary.json").read_text())
        assert "MLE/TRUE_DONOR" in summary["groups"]

        # feed the study's non-donor/donor records into the calibration audit
        cal_in = tmp_path / "cal.csv"
        with open(cal_in, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["log10_lr", "label"])
            for r in records:
                label = "HP" if r.donor_label == "TRUE_DONOR" else "HA"
                w.writerow(
                    ["EXCLUSION" if r.log10_lr is None else repr(r.log10_lr), label]
                )
        cal_out = tmp_path / "cal_out"
        code = main(
            ["calibrate", "--records", str(cal_in), "--out", str(cal_out)]
        )
        assert code == EXIT_OK
        assert (cal_out / "calibration_all.csv").exists()
        assert (cal_out / "plotdata_all.csv").exists()
        verdicts = json.loads((cal_out / "verdicts.json").read_text())
        assert verdicts["systems"]["all"]["n_hp"] == 2

    def test_empty_calibration_records_is_validation_error(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text("log10_lr,label\n")
        code = main(["calibrate", "--records", str(path), "--out", str(tmp_path / "o")])
        assert code == EXIT_VALIDATION
