"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL ...`` line (collected
again in the terminal summary) and asserts the same verdict.  Tolerances
and instance counts are pinned here.  Run alone with

    pytest tests/test_acceptance.py -v
"""

import json
import math
import time
from pathlib import Path

import pytest

from isingcoex import cli, config
from isingcoex import verify as V
from isingcoex.events import lr_crossing, plus_at
from isingcoex.exact import measure
from isingcoex.lattice import Box, Region, tri_times_z
from isingcoex.montecarlo import box_measure, estimate_crossing, exact_comparison, sampler_agreement

ROOT = Path(__file__).resolve().parents[1]
RESULTS: list[str] = []
LIMITS = {1: 120, 2: 600, 3: 300, 4: 900, 5: 300, 6: 600, 7: 600, 8: 1800}


def report(n: int, ok: bool, started: float | None, detail: str) -> None:
    took = None if started is None else time.perf_counter() - started
    within = took is None or took <= LIMITS[n]
    timing = "" if took is None else f" [{took:.0f}s / {LIMITS[n]}s]"
    line = f"ACCEPTANCE {n} {'PASS' if ok and within else 'FAIL'} {detail}{timing}"
    RESULTS.append(line)
    print(line)
    assert ok, line
    assert within, f"criterion {n} exceeded its runtime limit: {line}"


def test_1_duality():
    t0 = time.perf_counter()
    exact = V.check_duality(seed=0)
    kind = tri_times_z()
    mc = {}
    for n in (4, 8, 16):
        mc[n] = estimate_crossing(box_measure(kind, n, 0.1, 0.0), n, samples=2000, seed=11)
    ok = exact.passed and exact.worst_margin >= -1e-12 and all(e.within(0.5, 4.0) for e in mc.values())
    detail = f"exact worst |P-1/2| = {-exact.worst_margin:.1e}; " + ", ".join(
        f"n={n}: {e.mean:.4f}+-{e.se:.4f}" for n, e in mc.items()
    )
    report(1, ok, t0, detail)


def test_2_derivatives():
    t0 = time.perf_counter()
    rep = V.check_derivatives(100, seed=0)
    ok = rep.passed and rep.instances >= 100
    report(2, ok, t0, f"{rep.instances} instances, worst relative error {rep.extras['worst_relative_error']:.2e}")


def test_3_appendix():
    t0 = time.perf_counter()
    rep = V.check_appendix_identities(1000, seed=0)
    br = rep.extras["branches"]
    ok = rep.passed and rep.instances >= 1000 and min(br.values()) > 0
    report(3, ok, t0, f"{rep.instances} instances, {rep.violations} violations at 1e-10, branches {br}")


INEQUALITIES = ["cov_inequality", "gronwall", "omega_exchange", "fkg", "gks", "boundary_monotonicity", "pivotal_complement"]


def test_4_inequalities():
    t0 = time.perf_counter()
    reps = {name: V.run_check(name, 1000, seed=0) for name in INEQUALITIES}
    om = reps["omega_exchange"].extras
    ok = all(r.passed and r.instances >= 1000 for r in reps.values()) and min(om["display_1"], om["display_2"]) >= 1000
    detail = "; ".join(f"{k}: {r.instances}/{r.violations}" for k, r in reps.items())
    report(4, ok, t0, f"instances/violations {detail}; omega displays {om['display_1']}+{om['display_2']}")


def test_5_field_boost():
    t0 = time.perf_counter()
    rep = V.check_field_boost(200, seed=0)
    kind = tri_times_z()
    region = Region.from_sites(kind, [(0, 0, z) for z in range(6)])
    res = V.min_field_boost(0.4, 0.0, region, (0, 0, 0), 1, plus_at((0, 0, 5)))
    ok = rep.passed and math.isfinite(res.t_star) and res.t_star > 0 and res.monotone_in_t
    report(5, ok, t0, f"column example t_star = {res.t_star:.6g}, monotone trace; {rep.instances} random instances all finite")


def test_6_path_monotonicity():
    t0 = time.perf_counter()
    gamma, rows = V.measured_gamma(0.1)
    rep = V.check_path_monotonicity(0.1, (0.5, 0.0), Gamma=gamma, steps=50, tol=1e-9)
    ok = rep.passed and rep.instances == 50 and math.isfinite(gamma)
    report(6, ok, t0, f"Gamma = {gamma:.6g} from {len(rows)} grid points; worst step {rep.worst_margin:.2e}")


def test_7_samplers():
    t0 = time.perf_counter()
    kind = tri_times_z()
    region = Region.from_sites(kind, [(a, b, c) for a in range(2) for b in range(3) for c in range(2)])
    worst = 0.0
    ok = True
    for sampler in ("heatbath", "cluster"):
        for beta, h, bc in ((0.1, 0.0, "free"), (0.4, 0.1, "plus"), (0.4, -0.1, "minus")):
            spec = measure(region, beta, h, bc)
            events = [plus_at(s) for s in region.sites[::2]] + [lr_crossing(kind, 0, (0,), (0, 0, 0))]
            for r in exact_comparison(spec, events, sampler, 4000, seed=3, sweeps_between=2):
                worst = max(worst, abs(r["z"]))
                ok &= abs(r["z"]) < 4
    b4 = box_measure(kind, 4, 0.1, 0.05)
    agree = sampler_agreement(b4, Box((0, 0, 0), 4), lr_crossing(kind, 4, (0,)), 2000, seed=3)
    z_b4 = max(abs(r["z"]) for r in agree)
    ok &= z_b4 < 4
    report(7, ok, t0, f"12-site regions worst |z| = {worst:.2f}; B_4 heatbath vs cluster worst |z| = {z_b4:.2f}")


def test_8_phenomenology(tmp_path):
    t0 = time.perf_counter()
    cfg = config.load(ROOT / "configs" / "phenomenology.ini")
    seed, source = config.resolve_seed(cfg)
    status, _ = cli.execute("sweep", cfg, seed, source, tmp_path)
    coex = json.loads((tmp_path / "coexistence.json").read_text())
    hc = json.loads((tmp_path / "hc.json").read_text())
    spans = {r["n"]: r["both_span"] for r in coex["rows"]}
    ok = (
        status == 0
        and cfg["measure.beta"] == 0.1 and cfg["measure.h"] == 0.0 and 16 in spans
        and all(v >= cfg["sweep.both_span_min"] for v in spans.values())
        and hc["bracket"][1] < 0
    )
    report(8, ok, t0, f"both_span {spans} (min {cfg['sweep.both_span_min']}); h_c bracket {hc['bracket']}")


def _artifacts(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if not p.name.endswith("_manifest.json")}


def test_9_determinism(tmp_path):
    runs = [
        ["mc", "--n", "3", "--beta", "0.2", "--samples", "50", "--sweeps", "30", "--seed", "5"],
        ["mc", "--n", "3", "--sampler", "cluster", "--samples", "50", "--sweeps", "30", "--seed", "5"],
        ["hybrid", "--config", str(ROOT / "configs" / "example_hybrid.ini"), "--seed", "5"],
        ["verify", "--check", "fkg,appendix,omega_exchange", "--instances", "50", "--seed", "5"],
        ["sweep", "--kind", "coexistence", "--n-list", "[3]", "--samples", "30", "--seed", "5"],
    ]
    same = True
    files = 0
    for k, args in enumerate(runs):
        outs = []
        for rep in range(2):
            d = tmp_path / f"{k}-{rep}"
            cli.main(args + ["--out", str(d)])
            outs.append(_artifacts(d))
        same &= outs[0] == outs[1] and bool(outs[0])
        files += len(outs[0])
    d = tmp_path / "plot"
    svgs = []
    for rep in range(2):
        cli.main(["plot", "--kind", "gamma", "--input", str(tmp_path / "2-0" / "hybrid.csv"), "--out", str(d / str(rep))])
        svgs.append((d / str(rep) / "gamma.svg").read_bytes())
    same &= svgs[0] == svgs[1]
    report(9, same, None, f"{files + 1} artifacts byte-identical across repeated runs")
