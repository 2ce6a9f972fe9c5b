"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line through the ``acceptance`` fixture; the
lines are repeated in the terminal summary.
"""

import filecmp
import math
import time

import numpy as np
import pytest

from phlab import dynamics as dyn
from phlab import experiments as ex
from phlab import hyperbolic_times as ht
from phlab import measures as ms
from phlab.cli import main
from phlab.pliss import PlissParams, brute_force_pliss, pliss_like_indices


# -- 1: Pliss oracle equivalence ---------------------------------------------------


def test_criterion_01_pliss_oracle(acceptance):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = violations = checked = 0
    for _ in range(10_000):
        N = int(rng.integers(1, 501))
        L = float(rng.uniform(-2, 2))
        a = rng.uniform(L, L + 4, size=N)
        gamma = L + float(rng.uniform(0.5, 3.0))
        Gamma = gamma + float(rng.uniform(0.1, 1.0))
        res = pliss_like_indices(a, PlissParams(L, gamma, Gamma))
        mismatches += list(res.indices) != brute_force_pliss(a, gamma).tolist()
        checked += 1
        violations += res.m < res.guaranteed_count
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and violations == 0 and elapsed < 30
    acceptance.record(1, ok, f"{checked} sequences, {mismatches} mismatches, {violations} bound violations, {elapsed:.1f}s")
    assert ok


# -- 2: frequency bound tightness and HT reduction ----------------------------------


def test_criterion_02_tightness_and_reduction(acceptance):
    rng = np.random.default_rng(7)
    tight = True
    for _ in range(50):
        N = int(rng.integers(1, 300))
        gamma = float(rng.uniform(-1, 1))
        delta = float(rng.uniform(0.01, 1))
        res = pliss_like_indices(np.full(N, gamma + delta), PlissParams(gamma - 1, gamma, gamma + delta, 0.0))
        tight &= res.m == N == res.guaranteed_count and res.theta_bound == 1.0

    da = dyn.MapSpec("DerivedFromAnosov", epsilon=0.02)
    cfg = ht.HTConfig(math.exp(-0.43), 1, 300)
    X = np.random.default_rng(8).random((100, 3))
    rates = dyn.cu_rates(da, X, cfg.ell, cfg.horizon).rates
    same = sum(
        list(ht.tau_set_from_rates(r, cfg.gamma, cfg.tol).times) == ht.hyperbolic_times_scan(r, cfg.gamma, cfg.tol)
        for r in rates
    )
    nontrivial = sum(0 < len(ht.tau_set_from_rates(r, cfg.gamma).times) < cfg.horizon for r in rates)
    # the map-level routine agrees with the scan of its own rates
    x = X[0]
    pts = dyn.forward_orbit(da, x, cfg.horizon)
    own = ht.hyperbolic_times_scan(dyn.block_rates_along(da, pts, 1), cfg.gamma, cfg.tol)
    same_map = list(ht.tau_set(da, x, cfg).times) == own
    ok = tight and same == 100 and same_map
    acceptance.record(2, ok, f"constant sequences tight={tight}; tau_set == scan on {same}/100 orbits ({nontrivial} non-trivial)")
    assert ok


# -- 3: Lyapunov exactness on the linear model -------------------------------------------


def test_criterion_03_linear_lyapunov(acceptance):
    t0 = time.perf_counter()
    lin = dyn.MapSpec()
    w = np.linalg.eigvals(np.array(dyn.DEFAULT_MATRIX, float))
    ref = math.log(sorted(np.abs(w))[1])
    est = dyn.lyapunov_estimate(lin, [0.1, 0.2, 0.3], 10_000)
    err = abs(est.value - ref)
    da = dyn.MapSpec("DerivedFromAnosov", epsilon=0.02)
    rng = np.random.default_rng(3)
    resid = 0.0
    for spec in (lin, da):
        for _ in range(20):
            x = rng.random(3)
            m, n = (int(v) for v in rng.integers(0, 20, size=2))
            whole = dyn.cocycle_product(spec, x, m + n)
            split = dyn.cocycle_product(spec, dyn.forward_orbit(spec, x, m)[-1], n) @ dyn.cocycle_product(spec, x, m)
            resid = max(resid, np.linalg.norm(whole - split, 2) / np.linalg.norm(whole, 2))
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-8 and resid <= 1e-10 and elapsed < 10
    acceptance.record(3, ok, f"|lambda - log mu_c| = {err:.2e}, cocycle residual {resid:.2e}, {elapsed:.1f}s")
    assert ok


# -- 4: Gibbs u-state construction -------------------------------------------------------


def test_criterion_04_u_state_construction(acceptance):
    t0 = time.perf_counter()
    lin = dyn.MapSpec()
    g = 32
    x0 = np.array([0.123, 0.456, 0.789])
    disk = ms.UnstableDisk.segment(lin, x0, 0.5, n_samples=256)
    mu_disk = ms.push_forward_disk_measure(lin, disk, 200, g)
    mu_birk = ms.birkhoff_measure(lin, x0, 1_000_000, g)
    uniform = ms.GridMeasure.uniform(g, 3)
    d_uni = ms.w1_distance(mu_disk, uniform)
    d_cross = ms.w1_distance(mu_disk, mu_birk)
    elapsed = time.perf_counter() - t0
    ok = d_uni <= 5 / g and d_cross <= 5 / g and elapsed < 120
    acceptance.record(4, ok, f"W1(disk, Leb) = {d_uni:.4f}, W1(disk, Birkhoff) = {d_cross:.4f} (limit {5 / g:.4f}), {elapsed:.0f}s")
    assert ok


# -- 5: density formula ------------------------------------------------------------------


def _on_leaf(spec, x, s):
    e_u = dyn.cu_frames(spec, x)[..., 0]
    return dyn.wrap(x + s * e_u)


def test_criterion_05_u_density(acceptance):
    rng = np.random.default_rng(5)
    lin = dyn.MapSpec()
    lin_err = 0.0
    for _ in range(10):
        x = rng.random(3)
        r = ms.u_density_ratio(lin, x, _on_leaf(lin, x, float(rng.uniform(-0.04, 0.04))), T=40)
        lin_err = max(lin_err, abs(r.ratio - 1.0))
    cauchy = True
    worst = 0.0
    for eps in (0.01, 0.02, 0.04):
        da = dyn.MapSpec("DerivedFromAnosov", epsilon=eps)
        for _ in range(5):
            x = rng.random(3)
            y = _on_leaf(da, x, float(rng.uniform(-0.04, 0.04)))
            r = {T: ms.u_density_ratio(da, x, y, T=T) for T in (10, 20, 40)}
            for a, b in ((10, 20), (20, 40), (10, 40)):
                gap = abs(r[a].log_ratio - r[b].log_ratio)
                cauchy &= gap <= r[a].tail_bound and math.isfinite(r[a].tail_bound)
                worst = max(worst, gap)
    ok = lin_err <= 1e-12 and cauchy
    acceptance.record(5, ok, f"linear |ratio - 1| = {lin_err:.1e}; perturbed partial products within tail bounds: {cauchy} (largest gap {worst:.1e})")
    assert ok


# -- 6 and 7: hyperbolic times and Pesin blocks ------------------------------------------


@pytest.fixture(scope="module")
def ht_rows():
    t0 = time.perf_counter()
    cfg = ex.ExperimentConfig(sweep=(0.0, 0.02), ensemble=64, ht_horizon=500, block_depth=64, block_samples=512, sigma_fraction=0.95)
    rows = ex.ht_frequency_vs_ell(cfg, epsilon=0.02)
    return rows, time.perf_counter() - t0


def test_criterion_06_ht_abundance(ht_rows, acceptance):
    rows, elapsed = ht_rows
    by = {r["ell"]: r for r in rows}
    ok = (
        all(r["sigma_ok"] for r in rows)
        and by[8]["mean_frequency"] > by[1]["mean_frequency"]
        and by[8]["p05_frequency"] >= 0.9
        and elapsed < 300
    )
    acceptance.record(
        6,
        ok,
        f"sigma = {rows[0]['sigma']:.4f}; mean frequency l=1 {by[1]['mean_frequency']:.3f}, l=8 {by[8]['mean_frequency']:.3f}; "
        f"5th percentile l=8 {by[8]['p05_frequency']:.3f}; {elapsed:.0f}s",
    )
    assert ok


def test_criterion_07_block_growth(ht_rows, acceptance):
    rows, _ = ht_rows
    rows = sorted(rows, key=lambda r: r["ell"])
    monotone = all(
        b["block_fraction"] >= a["block_fraction"] - 2 * max(a["block_half_width"], b["block_half_width"])
        for a, b in zip(rows, rows[1:])
    )
    lin = dyn.MapSpec()
    lin_fracs = [
        ht.block_measure(lin, ht.HTConfig(1 / lin.moduli[1], ell), depth=64, samples=128, rng=0).fraction
        for ell in (1, 2, 4, 8)
    ]
    ok = monotone and lin_fracs == [1.0] * 4
    fr = ", ".join(f"l={r['ell']}: {r['block_fraction']:.3f}" for r in rows)
    acceptance.record(7, ok, f"DA block fractions {fr}; linear with sigma = 1/mu_c: {lin_fracs}")
    assert ok


# -- 8 and 9: statistical stability and the cu-disk inequality ----------------------------


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    report = ex.stability_sweep(ex.ExperimentConfig())
    return report, time.perf_counter() - t0


def test_criterion_08_statistical_stability(sweep, acceptance):
    report, elapsed = sweep
    w1 = report.column("w1")
    noise = report.column("noise")
    counts = report.column("count")
    ordered = all(w1[i] <= w1[i + 1] + 2 * noise[i + 1] for i in range(len(w1) - 1))
    ok = report.ok and counts == [1] * len(counts) and w1[0] == 0.0 and ordered and elapsed < 900
    table = ", ".join(f"eps={r.epsilon:g}: W1={r.w1:.4f} noise={r.noise:.4f} count={r.count}" for r in report.rows)
    acceptance.record(8, ok, f"{table}; {elapsed:.0f}s")
    assert ok


def test_criterion_09_cu_inequality(sweep, acceptance):
    report, _ = sweep
    cfg = ex.ExperimentConfig()
    eps_ineq = 1e-3
    K = {}
    for eps, mu in sorted(report.measures.items()):
        spec = cfg.spec(eps)
        K[eps] = ms.cu_characterization_test(spec, mu, 1, eps_ineq, sigma=report.sigma)["K_empirical"]
    vals = np.array(list(K.values()))
    finite = bool(np.all(np.isfinite(vals))) and len(vals) == len(cfg.sweep)
    spread = float(vals.max() / vals.min()) if finite else math.inf
    lin = dyn.MapSpec()
    atom = ms.GridMeasure.point_mass([0.0, 0.0, 0.0], cfg.resolution)
    K_atom = ms.cu_characterization_test(lin, atom, 1, eps_ineq, sigma=report.sigma)["K_empirical"]
    ok = finite and spread < 2.0 and K_atom > 10 * K[0.0]
    ks = ", ".join(f"eps={e:g}: {k:.4f}" for e, k in K.items())
    acceptance.record(9, ok, f"K_empirical {ks}; max/min {spread:.3f}; point-mass control {K_atom:.3f}")
    assert ok


# -- 10: determinism ----------------------------------------------------------------------

_SMALL_SWEEP = """\
schema = 1
sweep = 0, 0.02
ensemble = 32
orbit_length = 2000
resolution = 8
ht_horizon = 100
block_samples = 64
seed = 11
"""


def _cli_runs(tmp_path):
    seq = tmp_path / "seq.txt"
    seq.write_text("\n".join(str(v) for v in np.random.default_rng(0).uniform(0, 4, 200)))
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(_SMALL_SWEEP)
    common = ["--seed", "5"]
    return {
        "pliss": ["pliss", str(seq), "--gamma", "1.5", "--Gamma", "2", "--lower-bound", "0"],
        "orbit": ["orbit", "--family", "da", "--epsilon", "0.02", "--steps", "500", "--ell", "2", *common],
        "lyapunov": ["lyapunov", "--family", "da", "--epsilon", "0.02", "--steps", "2000", *common],
        "hts": ["hts", "--family", "da", "--epsilon", "0.02", "--ensemble", "8", "--horizon", "100", "--samples", "32", "--depth", "16", *common],
        "measure": ["measure", "--steps", "2000", "--resolution", "8", *common],
        "measure-disk": ["measure", "--mode", "disk", "--steps", "5", "--resolution", "8", "--disk-length", "0.05", *common],
        "stability": ["stability", "--config", str(cfg)],
    }


def test_criterion_10_determinism(tmp_path, monkeypatch, capsys, acceptance):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    identical, failures = [], []
    for name, argv in _cli_runs(tmp_path).items():
        dirs = [tmp_path / f"{name}-{k}" for k in (1, 2)]
        codes = [main([*argv, "--out", str(d)]) for d in dirs]
        capsys.readouterr()
        files = sorted(p.name for p in dirs[0].iterdir())
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
        same = codes == [0, 0] and not mismatch and not errors and sorted(p.name for p in dirs[1].iterdir()) == files
        (identical if same else failures).append(name)
    ok = not failures
    acceptance.record(10, ok, f"byte-identical: {identical}; differing: {failures}")
    assert ok
