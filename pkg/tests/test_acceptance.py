"""Acceptance suite: one PASS/FAIL line per criterion.

The lines are printed as each check finishes and repeated in the pytest
terminal summary. Criteria 1 to 3 and 7 share one full simulation study
(N = 10,000, 25 iterations), which takes roughly a quarter of an hour on a
single core; deselect it with ``-m "not slow"``.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import special, stats

from findworld.boost import BoostParams, ObjectiveState, objective_grad, penalized_risk
from findworld.dataset import SplitSpec, split_indices
from findworld.hmda import EXTRACT_TARGETS, hmda_encode, read_raw, synthetic_fixture
from findworld.metrics import auc, ks_critical
from findworld.preprocess import AdjacencyInfo, warp_apply, warp_fit
from findworld.scm import default_spec, paired_worlds
from findworld.study import SIM_WORLDS, StudyConfig, derive_seeds, run_study
from findworld.tradeoff import GridExhausted, find_lambda_star

RESULTS = []

EPS = 0.01
MIN_REVERSALS = 20
FULL_RUNTIME = 20 * 60
REDUCED_RUNTIME = 2 * 60
PANEL_FLOOR = 0.95
REAL_DP_CEILING = 0.90
AUC_BAND = 0.03
GAP_FAIR = 0.03
GAP_REAL = 0.10
GRAD_RTOL = 1e-4
HMDA_ROWS_RTOL = 0.01
HMDA_RATE_TOL = 0.01

PANEL = ("dp", "fpr_balance", "fnr_balance", "ppv_parity")


def record(number, name, passed, detail, advisory=False):
    tag = "PASS" if passed else "FAIL"
    if advisory:
        tag += " (advisory)"
    line = f"[{tag}] criterion {number} {name}: {detail}"
    print(line)
    RESULTS.append(line)
    return passed


def check(number, name, passed, detail, advisory=False):
    ok = record(number, name, passed, detail, advisory)
    if not advisory:
        assert ok, detail


@pytest.fixture(scope="module")
def full_study(tmp_path_factory):
    cfg = StudyConfig(out_dir=str(tmp_path_factory.mktemp("full")), n=10_000, iterations=25,
                      steps=9, eps=EPS, plots=False)
    start = time.perf_counter()
    summary = run_study(cfg)
    elapsed = time.perf_counter() - start
    records = [json.loads(p.read_text()) for p in
               sorted(Path(cfg.out_dir).glob("iterations/iter_*/metrics.json"))]
    return cfg, summary, records, elapsed


def reversal(rec):
    rel = rec.get("relations", {})
    return (rel.get("real", {}).get("label") == "tradeoff"
            and all(rel.get(w, {}).get("label") == "aligned" for w in ("find", "adapted", "warped")))


@pytest.mark.slow
def test_c1_tradeoff_reversal(full_study):
    _, summary, records, elapsed = full_study
    hits = sum(reversal(r) for r in records)
    detail = (f"{hits}/{len(records)} iterations with real=tradeoff and find/adapted/warped=aligned "
              f"(need >= {MIN_REVERSALS}); {len(summary['failures'])} search failures; "
              f"runtime {elapsed / 60:.1f} min (limit {FULL_RUNTIME // 60})")
    check(1, "trade-off reversal", hits >= MIN_REVERSALS and elapsed <= FULL_RUNTIME, detail)


@pytest.fixture(scope="module")
def reduced_runs(tmp_path_factory):
    # both runs share an output directory because the summary records its config
    cfg = StudyConfig(out_dir=str(tmp_path_factory.mktemp("reduced")), n=2_000, iterations=5, seed=11)
    runs = []
    for _ in range(2):
        start = time.perf_counter()
        run_study(cfg)
        runs.append(((Path(cfg.out_dir) / "summary.json").read_bytes(), time.perf_counter() - start))
    return runs


def test_c1_reduced_runtime(reduced_runs):
    elapsed = reduced_runs[0][1]
    check("1b", "reduced-config runtime", elapsed <= REDUCED_RUNTIME,
          f"N=2,000 R=5 study took {elapsed:.0f} s (limit {REDUCED_RUNTIME} s)")


@pytest.mark.slow
def test_c2_impossibility_escape(full_study):
    _, summary, _, _ = full_study
    panel = summary["panel"]
    low = {(w, k): panel[w][k]["mean"] for w in ("find", "adapted", "warped") for k in PANEL
           if panel[w][k]["mean"] < PANEL_FLOOR}
    real_dp = panel["real"]["dp"]["mean"]
    aucs = [panel[w]["auc"]["mean"] for w in SIM_WORLDS]
    band = max(aucs) - min(aucs)
    worst = min(panel[w][k]["mean"] for w in ("find", "adapted", "warped") for k in PANEL)
    detail = (f"min fair-world panel mean {worst:.3f} (need >= {PANEL_FLOOR}), below floor: "
              f"{sorted(low) or 'none'}; real DP {real_dp:.3f} (need <= {REAL_DP_CEILING}); "
              f"AUC band {band:.3f} (need <= {AUC_BAND})")
    check(2, "impossibility escape", not low and real_dp <= REAL_DP_CEILING and band <= AUC_BAND, detail)


@pytest.mark.slow
def test_c3_equal_base_rates(full_study):
    _, summary, records, _ = full_study
    gaps = summary["base_rate_gap"]
    worst = {w: max(r["base_rate_gap"][w] for r in records) for w in SIM_WORLDS}
    fair_ok = all(gaps[w]["mean"] < GAP_FAIR for w in ("find", "adapted", "warped"))
    detail = ("mean gap " + ", ".join(f"{w} {gaps[w]['mean']:.4f}" for w in SIM_WORLDS)
              + "; max " + ", ".join(f"{w} {worst[w]:.4f}" for w in SIM_WORLDS)
              + f" (fair worlds < {GAP_FAIR}, real > {GAP_REAL})")
    check(3, "equal base rates", fair_ok and gaps["real"]["mean"] > GAP_REAL, detail)


def fd_gradient(scores, labels, groups, lam, h=1e-6):
    g = np.empty_like(scores)
    for i in range(scores.size):
        up, dn = scores.copy(), scores.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (penalized_risk(up, labels, groups, lam) - penalized_risk(dn, labels, groups, lam)) / (2 * h)
    return g


def test_c4_gradient_oracle():
    rng = np.random.default_rng(2024)
    worst, checked = 0.0, 0
    while checked < 100:
        n = int(rng.integers(20, 201))
        lam = float(rng.choice([0.0, 0.1, 1.0, 10.0]))
        scores = rng.normal(0, 1.5, n)
        labels = (rng.random(n) < 0.5).astype(float)
        groups = (rng.random(n) < 0.4).astype(float)
        if groups.min() == groups.max():
            continue
        state = ObjectiveState.from_scores(scores, groups)
        if lam > 0 and abs(state.disparity) < 1e-3:
            continue  # central differences straddle the kink
        g, h = objective_grad(state, labels, groups, lam)
        g_fd = fd_gradient(scores, labels, groups, lam)
        # hessian of the loss term, by differencing the analytic loss gradient
        eps = 1e-5
        h_fd = (special.expit(scores + eps) - special.expit(scores - eps)) / (2 * eps)
        err_g = np.max(np.abs(g - g_fd) / np.maximum(np.abs(g_fd), 1e-3))
        err_h = np.max(np.abs(h - h_fd) / np.abs(h_fd))
        worst = max(worst, err_g, err_h)
        checked += 1
    check(4, "gradient oracle", worst < GRAD_RTOL,
          f"{checked} instances, worst relative error {worst:.2e} (need < {GRAD_RTOL:g})")


def pair_auc(scores, labels):
    pos, neg = scores[labels == 1], scores[labels == 0]
    diff = pos[:, None] - neg[None, :]
    return ((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (pos.size * neg.size)


def test_c5_auc_oracle():
    rng = np.random.default_rng(5)
    mismatches, done = 0, 0
    while done < 1000:
        n = int(rng.integers(2, 51))
        labels = (rng.random(n) < 0.5).astype(float)
        if labels.min() == labels.max():
            continue
        scores = rng.integers(0, 8, n) / 7.0 if done % 2 else rng.random(n)
        mismatches += auc(scores, labels) != pair_auc(scores, labels)
        done += 1
    check(5, "AUC oracle", mismatches == 0, f"{mismatches} exact mismatches in {done} instances (ties included)")


def test_c6_warp_properties():
    # two-Gamma location-shift toy
    n = 5000
    rng = np.random.default_rng(0)
    a = np.r_[np.ones(n), np.zeros(n)]
    x = rng.gamma(3.0, 1.5, 2 * n) + 2.0 * a
    y = (rng.random(2 * n) < special.expit((x - 5) / 2)).astype(float)
    from findworld.dataset import BINARY, NUMERIC, Dataset

    ds = Dataset({"A": a, "X": x, "Y": y}, {"A": BINARY, "X": NUMERIC, "Y": BINARY}, "A", "Y")
    adj = AdjacencyInfo.from_parents({"A": [], "X": ["A"], "Y": ["A", "X"]}, "A", "Y")
    out = warp_apply(warp_fit(ds, adj), ds)
    g = ds.pa == 1
    ks = stats.ks_2samp(out["X"][g], ds["X"][~g]).statistic
    crit = ks_critical(g.sum(), (~g).sum())
    dev = np.mean(np.abs(out["X"][g] - (ds["X"][g] - 2.0))) / ds["X"][~g].std()
    rho_toy = stats.spearmanr(ds["X"][g], out["X"][g]).statistic
    # default model: warped residual ranks within the protected group
    spec = default_spec()
    real, _ = paired_worlds(spec, 10_000, 1)
    model = warp_fit(real, AdjacencyInfo.from_scm(spec))
    warped = warp_apply(model, real)
    g = real.pa == model.source
    rhos = []
    for v, node in model.nodes.items():
        if node["source"].family == "logistic":
            continue
        parents = node["parents"]
        before = node["source"].residual(real[v][g], node["source"].mean(real.features(parents)[g]))
        after = node["target"].residual(warped[v][g], node["target"].mean(warped.features(parents)[g]))
        rhos.append((v, stats.spearmanr(before, after).statistic))
    ok = (ks < crit and dev < 0.05 and rho_toy == pytest.approx(1.0, abs=1e-12)
          and all(r == pytest.approx(1.0, abs=1e-12) for _, r in rhos))
    detail = (f"toy KS {ks:.4f} (crit {crit:.4f}), quantile-map deviation {dev:.4f} sd (need < 0.05), "
              f"toy Spearman {rho_toy:.6f}; default-model residual Spearman "
              + ", ".join(f"{v} {r:.6f}" for v, r in rhos))
    check(6, "warp properties", ok, detail)


@pytest.mark.slow
def test_c7_lambda_star_contract(full_study):
    cfg, _, records, _ = full_study
    found = [r for r in records if r.get("lambda_star") is not None]
    biased_ok = all(r["lambda_star_disparity"] < EPS for r in found)
    exhausted = len(records) - len(found)
    spec = default_spec()
    fair_hits = []
    for r in records[:5]:
        seeds = derive_seeds(cfg.seed, r["iteration"])
        _, find = paired_worlds(spec, cfg.n, seeds["simulate"])
        tr, te = split_indices(cfg.n, SplitSpec(cfg.train_fraction, seeds["split"]))
        params = BoostParams(**r["params"])
        try:
            star = find_lambda_star(find.take(tr), find.take(te), params, eps=EPS, grid=cfg.grid)
            fair_hits.append((star.lambda_star == cfg.grid[0], star.evaluated[0][1]))
        except GridExhausted:
            fair_hits.append((False, float("nan")))
    n_fair = sum(h for h, _ in fair_hits)
    detail = (f"biased DGP: {len(found)} searches all below eps={biased_ok}, {exhausted} exhausted; "
              f"FiND: lambda* = grid minimum in {n_fair}/{len(fair_hits)} iterations "
              f"(test C at lambda=0: {', '.join(f'{c:.4f}' for _, c in fair_hits)})")
    check(7, "lambda* contract", biased_ok and exhausted == 0 and n_fair == len(fair_hits), detail)


def test_c8_hmda_pipeline(tmp_path):
    raw = synthetic_fixture(tmp_path / "raw.csv", seed=0)
    ds, report = hmda_encode(read_raw(raw))
    from findworld.dataset import save_csv

    save_csv(ds, tmp_path / "hmda.csv")
    y, a = ds.target, ds.pa
    rates = (y.mean(), y[a == 0].mean(), y[a == 1].mean())
    targets = (EXTRACT_TARGETS["base_rate"], EXTRACT_TARGETS["base_rate_a_prime"], EXTRACT_TARGETS["base_rate_a"])
    rows_ok = abs(ds.n_rows - EXTRACT_TARGETS["rows"]) <= HMDA_ROWS_RTOL * EXTRACT_TARGETS["rows"]
    rates_ok = all(abs(r - t) < HMDA_RATE_TOL for r, t in zip(rates, targets))
    summary = run_study(StudyConfig(out_dir=str(tmp_path / "study"), hmda_csv=str(tmp_path / "hmda.csv"),
                                    curves=False, plots=False))
    panel = summary["panel"]
    worst = min(panel[w][k]["mean"] for w in ("adapted", "warped") for k in PANEL)
    detail = (f"synthetic fixture: {ds.n_rows} rows, base rates "
              + "/".join(f"{r:.3f}" for r in rates)
              + f"; min adapted/warped panel {worst:.3f}; real DP {panel['real']['dp']['mean']:.3f}")
    check(8, "HMDA pipeline", rows_ok and rates_ok and worst >= PANEL_FLOOR, detail, advisory=True)


def test_c9_determinism(reduced_runs):
    (a, _), (b, _) = reduced_runs
    same = a == b
    check(9, "determinism", same, "two same-seed N=2,000 R=5 study runs: summary.json "
          + ("byte-identical" if same else "differs"))
