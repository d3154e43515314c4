"""The thirteen acceptance criteria, one test each.

A single battery run is shared by criteria 1 to 12; criterion 13 runs the
``verify-all`` subcommand twice in fresh processes and compares bytes.
Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import subprocess
import sys

import numpy as np
import pytest

from epi_lab.battery import run_battery

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def battery():
    return {r.id: r for r in run_battery(seed=0)}


def record(cid, ok, text):
    line = f"criterion {cid:>2}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


class TestAcceptance:
    def test_c01_gaussian_closed_forms(self, battery):
        r = battery[1]
        ok = record(1, r.value < 1e-6, f"max deviation {r.value:.3g} (< 1e-6)")
        assert ok, r.detail

    def test_c02_debruijn(self, battery):
        r = battery[2]
        ok = record(2, r.value < 1e-3, f"max residual {r.value:.3g} (< 1e-3)")
        assert ok, r.detail

    def test_c03_entropy_representation(self, battery):
        r = battery[3]
        gap = float(r.detail.rsplit(" ", 1)[-1])
        ok = record(3, r.value < 1e-2 and gap < 2e-2,
                    f"max |h - closed form| {r.value:.3g} (< 1e-2); route gap {gap:.3g} (< 2e-2)")
        assert ok, r.detail

    def test_c04_high_snr_continuous(self, battery):
        r = battery[4]
        mono = r.detail.endswith("True")
        ok = record(4, r.value < 1e-2 and mono,
                    f"residual at 1e4 {r.value:.6g} (< 1e-2); strictly decreasing {mono}")
        assert ok, r.detail

    def test_c05_high_snr_discrete(self, battery):
        r = battery[5]
        ok = record(5, r.value < 1e-3, f"|I - ln 2| at 1e4 {r.value:.3g} (< 1e-3)")
        assert ok, r.detail

    def test_c06_high_snr_mixed(self, battery):
        r = battery[6]
        assert math.isnan(r.threshold)
        ok = record(6, r.passed, f"strictly decreasing {r.passed}; final residual {r.value:.6g} "
                                 "(no tolerance)")
        assert ok, r.detail

    def test_c07_low_snr(self, battery):
        r = battery[7]
        ok = record(7, r.value < 1e-3, f"max I at 1e-4 {r.value:.3g} (< 1e-3)")
        assert ok, r.detail

    def test_c08_rate_fits(self, battery):
        r = battery[8]
        ok = record(8, r.passed, r.detail)
        assert ok, r.detail

    def test_c09_pyramid_closed_form(self, battery):
        r = battery[9]
        ok = record(9, r.value < 1e-8, f"max |J closed - J quad| {r.value:.3g} (< 1e-8)")
        assert ok, r.detail

    def test_c10_domination(self, battery):
        r = battery[10]
        ok = record(10, r.passed and r.value <= 0.0,
                    f"max(negative part - bound) {r.value:.4g} (<= 0)")
        assert ok, r.detail

    def test_c11_epi_battery(self, battery):
        r = battery[11]
        uu = float(r.detail.split("power slack ")[1].split(" ")[0])
        hold = "all hold: True" in r.detail
        ok = record(11, hold and r.value <= 1e-6 and abs(uu - (math.e - 2)) < 1e-3,
                    f"all forms hold {hold}; Gaussian |slack| {r.value:.3g} (<= 1e-6); "
                    f"U+U slack {uu:.6g} (e - 2 within 1e-3)")
        assert ok, r.detail

    def test_c12_discrete_violation(self, battery):
        r = battery[12]
        ok = record(12, r.passed and r.value < 0, f"power-form slack {r.value:.6g} (< 0)")
        assert ok, r.detail

    def test_c13_verify_all_deterministic(self, tmp_path):
        outs = []
        for k in range(2):
            prefix = str(tmp_path / f"run{k}")
            proc = subprocess.run([sys.executable, "-m", "epi_lab.cli", "verify-all",
                                   "--out", prefix, "--seed", "0"],
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outs.append(open(prefix + ".csv", "rb").read())
        same = outs[0] == outs[1]
        ok = record(13, same, f"two verify-all runs, {len(outs[0])} bytes each, identical {same}")
        assert ok
        assert outs[0].count(b"\n") == 14


def test_battery_order(battery):
    np.testing.assert_array_equal(sorted(battery), np.arange(1, 14))
