"""Production code against the committed golden oracle outputs."""

import csv
from pathlib import Path

import numpy as np

from triqa.loss import LossWeights, combined_loss, combined_loss_grad, std_normal_cdf
from triqa.imaging import resize_bilinear
from triqa.metrics import krcc, plcc, srcc
from triqa.train import init_adam_state, optimizer_step

GOLDEN = Path(__file__).parent / "oracles" / "golden"


def load_rows(name):
    with open(GOLDEN / name, encoding="utf-8") as f:
        lines = [l for l in f if not l.startswith("#")]
    return list(csv.DictReader(lines))


class TestPhiGolden:
    def test_cdf_matches_reference(self):
        for row in load_rows("phi.csv"):
            z, phi = float(row["z"]), float(row["phi"])
            assert abs(std_normal_cdf(z) - phi) <= 1e-15 * max(1.0, abs(phi))


class TestLossGolden:
    def test_combined_loss_and_gradient(self):
        for row in load_rows("loss_cases.csv"):
            qx, qy = float(row["qx"]), float(row["qy"])
            hx, hy = float(row["qhat_x"]), float(row["qhat_y"])
            w = LossWeights(alpha=float(row["alpha"]), beta=float(row["beta"]))
            loss = combined_loss(qx, qy, hx, hy, w)
            gx, gy = combined_loss_grad(qx, qy, hx, hy, w)
            assert abs(loss - float(row["loss"])) < 1e-12
            assert abs(gx - float(row["grad_x"])) < 1e-12
            assert abs(gy - float(row["grad_y"])) < 1e-12


class TestBilinearGolden:
    def test_resampled_pixels(self):
        rows = load_rows("bilinear_cases.csv")
        by_case = {}
        for row in rows:
            by_case.setdefault(int(row["case"]), []).append(row)
        for case, case_rows in by_case.items():
            first = case_rows[0]
            src = np.random.default_rng(case).random(
                (int(first["src_h"]), int(first["src_w"]), 3)
            )
            out = resize_bilinear(src, int(first["out_h"]), int(first["out_w"]))
            for row in case_rows:
                got = out[int(row["i"]), int(row["j"]), int(row["c"])]
                assert abs(got - float(row["value"])) < 1e-13


class TestRankGolden:
    def test_correlations(self):
        for row in load_rows("rank_cases.csv"):
            x = np.array([float(v) for v in row["x"].split(";")])
            y = np.array([float(v) for v in row["y"].split(";")])
            assert abs(srcc(x, y) - float(row["srcc"])) < 1e-12
            assert abs(krcc(x, y) - float(row["krcc"])) < 1e-12
            assert abs(plcc(x, y) - float(row["plcc"])) < 1e-12


class TestAdamGolden:
    def test_scalar_trajectories(self):
        rows = load_rows("adam_cases.csv")
        by_case = {}
        for row in rows:
            by_case.setdefault(int(row["case"]), []).append(row)
        for case_rows in by_case.values():
            first = case_rows[0]
            params = {"w": np.array([0.0])}
            state = init_adam_state(params)
            betas = (float(first["beta1"]), float(first["beta2"]))
            for row in sorted(case_rows, key=lambda r: int(r["step"])):
                optimizer_step(
                    params,
                    {"w": np.array([float(row["grad"])])},
                    state,
                    lr=float(row["lr"]),
                    betas=betas,
                    epsilon=float(row["eps"]),
                )
                assert abs(params["w"][0] - float(row["w"])) < 1e-12
