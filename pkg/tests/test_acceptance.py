"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""

import math
import time

import numpy as np
import pytest

from spectralmatch.cli import main
from spectralmatch.dataset import parse_rows, parse_summary
from spectralmatch.energy import EnergyWeights, Mapping
from spectralmatch.errors import InputError
from spectralmatch.features import DescriptorSet
from spectralmatch.geometry import (
    Homography,
    classify_pair,
    estimate_homography,
    interpolate_keypoints,
    reprojection_errors,
)
from spectralmatch.graph import build_joint_graph, joint_graph
from spectralmatch.metrics import (
    GroundTruth,
    RegionBox,
    correspondence_r2,
    mae,
    overlap_shares,
    relevance_r1,
)
from spectralmatch.optimizer import CorrespondenceSet, MatchConfig, match_multiresolution, refine_level
from spectralmatch.spectral import SpectralEmbedding, cross_jsed, eig_sym, jsed, spectral_embedding
from spectralmatch.synth import texture, translate_wrap

from oracles import energy_of, random_instance, windowed_search


@pytest.fixture
def verdict(capsys):
    def report(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail
    return report


def test_c1_eigensolver(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_res = worst_rec = 0.0
    for k in range(200):
        n = 1 + k % 16
        A = rng.normal(size=(n, n))
        M = (A + A.T) / 2
        vals, V = eig_sym(M)
        fro = np.linalg.norm(M)
        worst_res = max(worst_res, np.max(np.linalg.norm(M @ V - V * vals, axis=0)) / (1 + fro))
        worst_rec = max(worst_rec, np.linalg.norm(V @ np.diag(vals) @ V.T - M) / fro)
    k3, _ = eig_sym(np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]]))
    k3_err = float(np.max(np.abs(k3 - [0, 3, 3])))
    elapsed = time.perf_counter() - t0
    ok = worst_res <= 1e-8 and worst_rec <= 1e-7 and k3_err <= 1e-9 and elapsed < 5
    verdict(1, "eigensolver oracle", ok,
            f"residual/(1+|M|) {worst_res:.2e}, reconstruction {worst_rec:.2e}, K3 err {k3_err:.1e}, {elapsed:.2f}s")


def test_c2_embedding(verdict):
    worst = 0.0
    for c in (0.05, 0.3, math.exp(-1), 0.7, 0.99):
        emb = spectral_embedding(joint_graph([[1.0]], [[1.0]], [[c]]), m=1)
        worst = max(worst, abs(emb.eigenvalues[0] - 2 * c / (1 + c)), abs(jsed(emb, 0, 1) - math.sqrt(2)))
    rng = np.random.default_rng(202)
    flip_worst = 0.0
    for _ in range(50):
        n1, n2 = rng.integers(2, 12, 2)
        g = build_joint_graph(DescriptorSet(rng.normal(size=(n1, 9))), DescriptorSet(rng.normal(size=(n2, 9))))
        emb = spectral_embedding(g, m=int(min(8, n1 + n2 - 1)))
        signs = rng.choice([-1.0, 1.0], size=emb.m)
        flipped = SpectralEmbedding(emb.n1, emb.n2, emb.eigenvalues, emb.coords * signs)
        flip_worst = max(flip_worst, float(np.max(np.abs(cross_jsed(emb) - cross_jsed(flipped)))))
    ok = worst <= 1e-9 and flip_worst <= 1e-12
    verdict(2, "embedding correctness", ok, f"2-node error {worst:.1e}, sign-flip max diff {flip_worst:.1e}")


def test_c3_self_match(verdict):
    cfg = MatchConfig(descriptor="hog", weights=EnergyWeights(1.0, 0.0, 0.0))
    t0 = time.perf_counter()
    hits = total = 0
    worst_mae = 0.0
    for seed in range(10):
        img = texture(np.random.default_rng(1000 + seed), 64)
        res = match_multiresolution(img, img, cfg)
        hits += int(np.sum(np.all(res.source == res.target, axis=1)))
        total += len(res)
        gt = GroundTruth(np.hstack([res.source, res.source]))
        worst_mae = max(worst_mae, mae(gt, res, math.hypot(64, 64)))
    elapsed = time.perf_counter() - t0
    ok = hits == total and worst_mae == 0.0 and elapsed < 30
    verdict(3, "self-match", ok, f"identity {hits}/{total}, max MAE {worst_mae}, {elapsed:.2f}s")


def test_c4_translation(verdict):
    shift = 32  # two 16-px patches
    t0 = time.perf_counter()
    hits = total = 0
    monotone = True
    for seed in range(10):
        img = texture(np.random.default_rng(2000 + seed), 128)
        res = match_multiresolution(img, translate_wrap(img, shift, 0))
        interior = res.source[:, 0] + shift < 128
        off = res.target[interior] - res.source[interior]
        hits += int(np.sum(np.all(off == [shift, 0], axis=1)))
        total += int(interior.sum())
        for lv in res.trace:
            monotone &= all(b <= a for a, b in zip(lv.energies, lv.energies[1:]))
    elapsed = time.perf_counter() - t0
    rate = hits / total
    ok = rate >= 0.9 and monotone and elapsed < 60
    verdict(4, "translation recovery", ok,
            f"exact offset {hits}/{total} = {rate:.3f}, energy non-increasing {monotone}, {elapsed:.2f}s")


def test_c5_separable_argmin(verdict):
    rng = np.random.default_rng(505)
    exact = 0
    for _ in range(20):
        costs, start, grid = random_instance(rng, max_patches=25)
        radius = int(rng.integers(0, 3))
        out, energies = refine_level(Mapping(start, costs.shape[1]), costs, grid, radius, 20)
        ref = windowed_search(costs, start, grid, radius, 20)
        exact += int(energies[-1] == energy_of(costs, ref) and np.array_equal(out.assignments, ref))
    verdict(5, "separable-argmin oracle", exact == 20, f"{exact}/20 instances identical to exhaustive search")


def _pred(src, dst):
    src, dst = np.asarray(src, float).reshape(-1, 2), np.asarray(dst, float).reshape(-1, 2)
    return CorrespondenceSet(src, dst, np.zeros(len(src)), np.ones(len(src), bool))


def test_c6_metrics(verdict):
    box = RegionBox(0, 0, 10, 10)
    r1 = relevance_r1(RegionBox(5, 0, 10, 10), None, box, None)
    r2 = correspondence_r2(GroundTruth(np.zeros((1, 4))), _pred([3, 4], [0, 0]), 10.0)
    m = mae(GroundTruth(np.array([[10.0, 10, 20, 20]])), _pred([10, 10], [23, 24]), 100.0)

    rng = np.random.default_rng(606)
    monotone = True
    for _ in range(100):
        gt = GroundTruth(rng.uniform(0, 100, (8, 4)))
        pred = _pred(gt.src + rng.normal(scale=3, size=(8, 2)), gt.dst + rng.normal(scale=15, size=(8, 2)))
        vals = [correspondence_r2(gt, pred, t) for t in np.linspace(0, 60, 13)]
        monotone &= all(b >= a for a, b in zip(vals, vals[1:]))
    partition = True
    for _ in range(200):
        boxes = [RegionBox(*rng.integers(0, 30, 2), *rng.integers(1, 20, 2)) for _ in range(4)]
        partition &= sum(overlap_shares(*boxes)) == 1

    ok = r1 == 1 / 3 and r2 == 1.0 and m == 5.0 and monotone and partition
    verdict(6, "metric hand-checks", ok,
            f"R1 {r1!r}, R2 worked example {r2}, MAE {m}, R2 monotone {monotone}, partition exact {partition}")


def test_c7_homography(verdict):
    rng = np.random.default_rng(707)
    worst_fit = worst_trip = 0.0
    fitted = 0
    monotone = True
    for _ in range(100):
        H = np.eye(3)
        H[:2, :2] += rng.normal(scale=0.2, size=(2, 2))
        H[:2, 2] = rng.normal(scale=20, size=2)
        H[2, :2] = rng.normal(scale=1e-3, size=2)
        truth = Homography(H)
        src = rng.uniform(0, 128, (int(rng.integers(4, 15)), 2))
        pairs = np.hstack([src, interpolate_keypoints(truth, src)])
        try:
            fit = estimate_homography(pairs)
        except InputError:
            continue
        fitted += 1
        worst_fit = max(worst_fit, float(reprojection_errors(fit, pairs).max()))
        back = interpolate_keypoints(fit.inverse(), interpolate_keypoints(fit, src))
        worst_trip = max(worst_trip, float(np.abs(back - src).max()))
        noisy = pairs.copy()
        noisy[:, 2:] += rng.normal(scale=8, size=(len(src), 2))
        labels = [classify_pair(fit, noisy, rho) for rho in np.linspace(0, 40, 21)]
        monotone &= labels == sorted(labels, key=lambda s: s != "difficult")
    ok = fitted == 100 and worst_fit <= 1e-6 and worst_trip <= 1e-9 and monotone
    verdict(7, "homography", ok,
            f"{fitted}/100 fitted, max reprojection {worst_fit:.1e} px, round trip {worst_trip:.1e} px, "
            f"rho-monotone {monotone}")


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    assert main(["synth", str(root / "ds")]) == 0
    t0 = time.perf_counter()
    rc = main(["eval", str(root / "ds" / "manifest.txt"), "-o", str(root / "w1" / "report"), "--workers", "1"])
    return root, rc, time.perf_counter() - t0


REPORT_FILES = ("report.txt", "report.rows", "report.summary", "report_r2.png", "report_mae.png")


@pytest.mark.slow
def test_c8_synthetic_benchmark(benchmark, verdict):
    root, rc, elapsed = benchmark
    out = root / "w1"
    text = (out / "report.txt").read_text()
    taus = (10.0, 20.0, 30.0, 40.0)
    rows = parse_rows((out / "report.rows").read_text(), len(taus))
    summary = parse_summary((out / "report.summary").read_text())

    audit = 0.0
    for split in ("easy", "difficult", "all"):
        sel = [r for r in rows if split == "all" or r.difficulty == split]
        n, vals = summary[split]
        assert n == len(sel)
        recomputed = [math.fsum(r.r2[k] for r in sel) / n for k in range(len(taus))]
        recomputed.append(math.fsum(r.mae for r in sel) / n)
        audit = max(audit, max(abs(a - b) for a, b in zip(recomputed, vals)))
    easy_r2_40 = summary["easy"][1][3]
    n_easy, n_diff = summary["easy"][0], summary["difficult"][0]
    formed = ("easy/difficult" in text and "R2@40" in text and len(rows) == 20
              and (n_easy, n_diff) == (10, 10) and "failed 0" in text)
    ok = rc == 0 and formed and easy_r2_40 >= 0.8 and audit <= 1e-12 and elapsed < 300
    verdict(8, "synthetic benchmark", ok,
            f"easy R2@40 {easy_r2_40:.4f} (difficult {summary['difficult'][1][3]:.4f}), "
            f"pairs {n_easy}+{n_diff}, audit {audit:.1e}, report well-formed {formed}, {elapsed:.1f}s")


@pytest.mark.slow
def test_c9_determinism(benchmark, verdict):
    root, _, _ = benchmark
    rc = main(["eval", str(root / "ds" / "manifest.txt"), "-o", str(root / "w4" / "report"), "--workers", "4"])
    same = [(root / "w1" / f).read_bytes() == (root / "w4" / f).read_bytes() for f in REPORT_FILES]
    ok = rc == 0 and all(same)
    verdict(9, "determinism", ok, f"{sum(same)}/{len(same)} report files byte-identical with --workers 4")
