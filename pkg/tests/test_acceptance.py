"""Acceptance criteria, one test per criterion.

Each test ends with ``verdict(n, ok, detail)``, which prints a PASS/FAIL line
(collected again in the terminal summary) and asserts.
"""

import csv
import io
import itertools
import math
from pathlib import Path

import numpy as np

from altlin import bench, oracle, problems, solvers
from altlin.linalg import IndexMask, nuclear_norm, project_mask
from altlin.smoothing import SmoothedL1, SmoothedMaskedL1, SmoothedNuclear
from altlin.solvers import SolverConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
BOUND_ITERS = 2000


def _bound_failures(cases, method, kind, smoothed):
    failures = []
    for case in cases:
        obj = case.smooth if smoothed else case.exact
        mu = case.mu_smooth if smoothed else case.mu_exact
        opt = case.opt_smooth if smoothed else case.opt_exact
        dist = case.dist_smooth if smoothed else case.dist_exact
        tr = solvers.solve(method, obj, SolverConfig(mu=mu, max_iter=BOUND_ITERS))
        assert len(tr) == BOUND_ITERS
        rep = oracle.check_bound(tr, kind, mu, dist, opt.f_star)
        if not rep.passed:
            failures.append(f"seed {case.seed}: {rep}")
    return failures


def test_criterion_01_alm_bound(lasso_cases, verdict):
    fails = _bound_failures(lasso_cases, "alm", "alm", smoothed=True)
    verdict(1, not fails, f"ALM rate bound on {len(lasso_cases)} smoothed lasso instances, k <= {BOUND_ITERS}"
            + (f"; {fails}" if fails else ""))


def test_criterion_02_alm_s_bound(lasso_cases, verdict):
    fails = _bound_failures(lasso_cases, "alm-s", "alm_s", smoothed=False)
    verdict(2, not fails, f"ALM-S rate bound with skip count from trace, {len(lasso_cases)} l1 lasso instances"
            + (f"; {fails}" if fails else ""))


def test_criterion_03_fast_bounds(lasso_cases, verdict):
    fails = _bound_failures(lasso_cases, "falm", "falm", smoothed=True)
    fails += _bound_failures(lasso_cases, "falm-s", "falm_s", smoothed=False)
    verdict(3, not fails, "FALM (smoothed) and FALM-S (l1) accelerated rate bounds"
            + (f"; {fails}" if fails else ""))


def test_criterion_04_equivalences(lasso_cases, verdict):
    worst = {"sadal/alm": 0.0, "alm/alm-s": 0.0, "alm-s/equiv": 0.0, "falm/falm-s": 0.0}
    skips = 0
    for case in lasso_cases:
        obj = case.smooth
        cfg = SolverConfig(mu=case.mu_smooth, max_iter=200, store_iterates=True)
        y0 = obj.zeros()
        lam0 = -obj.g.grad(y0)
        runs = {
            "alm": solvers.run_alm(obj, cfg),
            "sadal": solvers.run_sadal(obj, cfg, lambda0=lam0),
            "alm-s": solvers.run_alm_s(obj, cfg, lambda0=lam0),
            "equiv": solvers.run_alm_s_equiv(obj, cfg, lambda0=lam0),
            "falm": solvers.run_falm(obj, cfg),
            "falm-s": solvers.run_falm_s(obj, cfg, lambda0=lam0),
        }
        skips += runs["falm-s"].skip_count + runs["alm-s"].skip_count
        for pair in worst:
            a, b = (runs[p] for p in pair.split("/"))
            assert len(a.xs) == len(b.xs) == 200
            gap = max(
                max(np.linalg.norm(p - q) for p, q in zip(a.xs, b.xs)),
                max(np.linalg.norm(p - q) for p, q in zip(a.ys, b.ys)),
            )
            worst[pair] = max(worst[pair], gap)
    ok = all(v <= 1e-10 for v in worst.values()) and skips == 0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(4, ok, f"iterate gaps over 200 iterations ({detail}); skips {skips}")


def test_criterion_05_acceleration_ordering(lasso_cases, verdict):
    problems_seen = []
    for case in lasso_cases:
        counts = {}
        for name, smoothed in [("alm", True), ("falm", True), ("alm-s", False),
                               ("falm-s", False), ("ista", False), ("fista", False)]:
            obj = case.smooth if smoothed else case.exact
            mu = case.mu_smooth if smoothed else case.mu_exact
            f_star = (case.opt_smooth if smoothed else case.opt_exact).f_star
            tr = solvers.solve(name, obj, SolverConfig(mu=mu, max_iter=50_000, obj_target=f_star + 1e-6))
            counts[name] = [tr.iterations_to(f_star + 10.0**-j) for j in range(2, 7)]
        final = {k: v[-1] for k, v in counts.items()}
        if None in final.values():
            problems_seen.append(f"seed {case.seed}: target not reached {final}")
            continue
        if not (final["fista"] < final["ista"] and final["falm"] < final["alm"]
                and final["falm-s"] < final["alm-s"]):
            problems_seen.append(f"seed {case.seed}: {final}")
        if any(f > a for f, a in zip(counts["falm"], counts["alm"])):
            problems_seen.append(f"seed {case.seed}: FALM behind ALM at some target")
    verdict(5, not problems_seen, "FISTA < ISTA, FALM < ALM, FALM-S < ALM-S to F*+1e-6; FALM <= ALM at 1e-2..1e-6"
            + (f"; {problems_seen}" if problems_seen else ""))


_ALPHA = math.sqrt(2.0) - 1.0
_ALPHA_HAT = 1.0 / math.sqrt(2.0) - 1.0


def _tk_violation(kinds):
    """First index where the t_k lower bound fails, or None."""
    ts = solvers.tk_schedule(kinds)
    regular = skips = 0
    first_skip = kinds[0] == "skip"
    for k, (kind, t) in enumerate(zip(kinds, ts), start=1):
        if kind == "regular":
            regular += 1
        else:
            skips += 1
        if first_skip:
            bound = (k + 1 + _ALPHA * regular) / (2.0 if kind == "skip" else 2.0 * math.sqrt(2.0))
        else:
            bound = (k + 1 + _ALPHA_HAT * skips) / (math.sqrt(2.0) if kind == "skip" else 2.0)
        # relative slack covers rounding only; several cases are tight (t_1 = 1)
        if t < bound * (1.0 - 1e-12):
            return k
    return None


def test_criterion_06_tk_lower_bounds(verdict):
    checked = bad = 0
    for length in range(1, 13):
        for kinds in itertools.product(("regular", "skip"), repeat=length):
            checked += 1
            bad += _tk_violation(list(kinds)) is not None
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        kinds = list(rng.choice(["regular", "skip"], size=50))
        checked += 1
        bad += _tk_violation(kinds) is not None
    verdict(6, bad == 0, f"t_k lower bounds on {checked} event strings, {bad} violations")


def test_criterion_07_smoothing(verdict):
    rng = np.random.default_rng(7)
    issues = []

    # sandwich bounds
    for i in range(1000):
        sigma = 10.0 ** rng.uniform(-4, 0)
        rho = 10.0 ** rng.uniform(-2, 1)
        scale = 10.0 ** rng.uniform(-3, 2)
        x = rng.standard_normal(12) * scale
        h = SmoothedL1(rho, sigma)
        l1 = rho * np.abs(x).sum()
        tol = 1e-12 * max(1.0, l1)
        if not (l1 - sigma * h.bound_constant(x.size) - tol <= h.value(x) <= l1 + tol):
            issues.append(f"l1 sandwich at point {i}")
        mask = IndexMask.from_bool(rng.random((4, 3)) < 0.6)
        hm = SmoothedMaskedL1(rho, sigma, mask)
        y = x.reshape(4, 3)
        ml1 = rho * np.abs(project_mask(y, mask)).sum()
        if not (ml1 - sigma * hm.bound_constant() - tol <= hm.value(y) <= ml1 + tol):
            issues.append(f"masked l1 sandwich at point {i}")
        X = rng.standard_normal((4, 5)) * scale
        hn = SmoothedNuclear(sigma)
        nn, v = nuclear_norm(X), hn.value(X)
        tol = 1e-12 * max(1.0, nn)
        if not (v - tol <= nn <= v + sigma * hn.bound_constant(X.shape) + tol):
            issues.append(f"nuclear sandwich at point {i}")

    # gradients against central differences, away from kinks and crossings
    worst_fd = 0.0
    for _ in range(200):
        sigma = 10.0 ** rng.uniform(-2, 0)
        h = SmoothedL1(1.0 + rng.random(), sigma)
        x = rng.standard_normal(8) * h.rho * sigma * 3
        if np.min(np.abs(np.abs(x) - h.rho * sigma)) < 1e-3 * h.rho * sigma:
            continue
        fd = oracle.finite_diff_grad(h.value, x, 1e-6 * h.rho * sigma)
        g = h.grad(x)
        worst_fd = max(worst_fd, np.linalg.norm(fd - g) / np.linalg.norm(g))

        hn = SmoothedNuclear(sigma)
        X = rng.standard_normal((4, 3)) * sigma
        s = np.linalg.svd(X, compute_uv=False)
        if np.min(np.abs(s / sigma - 1.0)) < 1e-2 or np.min(np.diff(s[::-1])) < 1e-2 * sigma:
            continue
        fd = oracle.finite_diff_grad(hn.value, X, 1e-6 * sigma)
        g = hn.grad(X)
        worst_fd = max(worst_fd, np.linalg.norm(fd - g) / np.linalg.norm(g))
    if worst_fd > 1e-5:
        issues.append(f"finite-difference error {worst_fd:.1e}")

    # gradient Lipschitz ratio
    worst_ratio = 0.0
    for _ in range(1000):
        sigma = 10.0 ** rng.uniform(-4, 0)
        h, hn = SmoothedL1(1.0, sigma), SmoothedNuclear(sigma)
        a, b = rng.standard_normal(10) * sigma * 2, rng.standard_normal(10) * sigma * 2
        worst_ratio = max(worst_ratio, sigma * np.linalg.norm(h.grad(a) - h.grad(b)) / np.linalg.norm(a - b))
        A, B = rng.standard_normal((4, 4)) * sigma * 2, rng.standard_normal((4, 4)) * sigma * 2
        worst_ratio = max(worst_ratio, sigma * np.linalg.norm(hn.grad(A) - hn.grad(B)) / np.linalg.norm(A - B))
    if worst_ratio > 1.0 + 1e-12:
        issues.append(f"sigma * Lipschitz ratio {worst_ratio!r}")

    verdict(7, not issues, f"sandwich on 1000 points, FD rel. error {worst_fd:.1e}, "
            f"sigma*ratio max {worst_ratio:.6f}" + (f"; {issues}" if issues else ""))


def test_criterion_08_rpca_closed_forms(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0
    cases = 0
    for mu, sigma, rho in itertools.product([1e-3, 0.1, 1.0], [1e-6, 1e-3, 0.1], [0.1, 1 / math.sqrt(8), 1.0]):
        nuc = SmoothedNuclear(sigma)
        for _ in range(50):
            for masked in (False, True):
                M = rng.standard_normal((8, 8))
                Y = rng.standard_normal((8, 8))
                mask = IndexMask.from_bool(rng.random((8, 8)) < 0.7) if masked else None
                if mask is not None:
                    M = project_mask(M, mask)
                h = SmoothedL1(rho, sigma) if mask is None else SmoothedMaskedL1(rho, sigma, mask)
                X = problems.rpca_x_subproblem(Y, M, mu, sigma, rho, mask)
                r_x = np.linalg.norm(nuc.grad(X) - h.grad(Y) + (X + Y - M) / mu)
                Y2 = problems.rpca_y_subproblem(X, M, mu, sigma, rho, mask)
                r_y = np.linalg.norm(h.grad(Y2) - nuc.grad(X) + (X + Y2 - M) / mu)
                worst = max(worst, r_x, r_y)
                cases += 1
    verdict(8, worst <= 1e-8, f"X/Y subproblem stationarity on {cases} instances, worst residual {worst:.1e}")


def test_criterion_09_matrix_completion(verdict):
    ci = problems.generate_completion(problems.CompletionSpec(n=100, r=5, spr=0.05, sr=0.9, seed=0))
    M = ci.instance.M
    cont = problems.rpca_continuation(M, mu_bar=1e-6, eta=2 / 3, norm="frobenius")
    cfg = SolverConfig(max_iter=100, infeas_tol=1e-5, continuation=cont)
    X, Y, tr = problems.solve_rpca(ci.instance, cfg, solver="alm")
    err = problems.relative_errors(X, project_mask(Y, ci.mask), ci.A, project_mask(ci.E, ci.mask))
    ok = tr.status == "infeasibility" and len(tr) <= 100 and err.relX <= 1e-3 and err.relY <= 1e-3
    verdict(9, ok, f"n=100 completion: {len(tr)} iterations ({tr.status}), "
            f"relX {err.relX:.1e}, relY {err.relY:.1e}")


def test_criterion_10_monotonicity(lasso_cases, verdict):
    issues = []
    for case in lasso_cases:
        for name, obj, mu in [("alm", case.smooth, case.mu_smooth),
                              ("alm-s", case.exact, case.mu_exact),
                              ("alm-s", case.smooth, case.mu_smooth)]:
            tr = solvers.solve(name, obj, SolverConfig(mu=mu, max_iter=BOUND_ITERS))
            fy, fx = tr.objs, tr.objs_x
            tol = 1e-13 * max(1.0, abs(fy[0]))
            if np.any(np.diff(fy) > tol) or np.any(np.diff(fx) > tol) or np.any(fy > fx + tol):
                issues.append(f"{name} seed {case.seed}")
    verdict(10, not issues, "F(y^k), F(x^k) non-increasing and F(y^k) <= F(x^k) on ALM/ALM-S traces"
            + (f"; {issues}" if issues else ""))


def _strip_elapsed(text):
    rows = list(csv.reader(io.StringIO(text)))
    keep = [i for i, h in enumerate(rows[0]) if not h.startswith("elapsed")]
    return [[r[i] for i in keep] for r in rows]


def test_criterion_11_determinism(tmp_path, verdict):
    configs = sorted(CONFIG_DIR.glob("*.ini"))
    assert configs
    differing = []
    for path in configs:
        cfg = bench.load_config(path)
        outs = [tmp_path / path.stem / run for run in ("a", "b")]
        for out in outs:
            assert bench.run_experiment(cfg, out_dir=out).exit_code == bench.EXIT_OK
        traces = sorted(p.name for p in outs[0].glob("trace_*.csv"))
        assert traces == sorted(p.name for p in outs[1].glob("trace_*.csv"))
        for name in traces:
            a, b = ((o / name).read_text() for o in outs)
            if _strip_elapsed(a) != _strip_elapsed(b):
                differing.append(f"{path.name}:{name}")
        if (outs[0] / "summary.csv").read_bytes() != (outs[1] / "summary.csv").read_bytes():
            differing.append(f"{path.name}:summary.csv")
    verdict(11, not differing, f"{len(configs)} configs run twice, traces and summaries identical"
            + (f"; differing {differing}" if differing else ""))
