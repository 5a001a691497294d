"""Command line entry point: ``isingcoex <subcommand> [flags]``.

Every subcommand resolves a config (defaults, then ``--config FILE``, then
flags), writes its CSV/JSON artifacts into ``--out`` and finishes with a
``<subcommand>_manifest.json`` holding the config snapshot, seed, code
version, timestamps and sha256 digests of the artifacts.  Artifacts never
contain timestamps, so equal manifests give byte-identical outputs.

Exit status: 0 ok, 1 check violation, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, config
from ._jit import backend_name
from .config import ConfigError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialization


def clean(x):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    return x


def json_text(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else clean(v) for v in r])
    return buf.getvalue()


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Outputs:
    """Collects artifacts written during one run."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str | bytes) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / name
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8")
        self.files[name] = sha256(path)
        return path


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# shared builders


def build_kind(cfg):
    from .lattice import lattice_kind

    return lattice_kind(cfg["lattice.kind"], cfg["lattice.offsets"])


def build_region(cfg):
    from .lattice import Box, Region, build_region as full

    kind = build_kind(cfg)
    region = full(kind, Box(tuple(cfg["lattice.center"]), cfg["lattice.n"]))
    layers = cfg["lattice.layers"]
    if layers is not None:
        region = Region.from_sites(kind, [s for s in region.sites if s[2] in set(layers)])
    return region


def build_event(cfg, kind):
    from .events import connection_event, lr_crossing

    n = cfg["event.n"] if cfg["event.n"] is not None else cfg["lattice.n"]
    layers = tuple(cfg["event.layers"])
    center = tuple(cfg["lattice.center"])
    if cfg["event.kind"] == "lr_crossing":
        return lr_crossing(kind, n, layers, center)
    return connection_event(kind, tuple(cfg["event.origin"]), n, layers, center)


# ---------------------------------------------------------------------------
# subcommands; each returns an exit status


def cmd_verify(cfg, seed: int, out: Outputs) -> int:
    from .verify import REGISTRY, run_checks

    wanted = cfg["verify.check"]
    if wanted == "all":
        names = list(REGISTRY)
    else:
        names = [s.strip() for s in wanted.split(",") if s.strip()]
        unknown = [n for n in names if n not in REGISTRY]
        if unknown:
            raise UsageError(f"unknown check(s) {unknown}; known: {sorted(REGISTRY)}")
    print("checks: " + ", ".join(names))
    reports = run_checks(names, cfg["verify.instances"], seed, cfg["run.workers"])
    failing = False
    for r in reports:
        wm = "n/a" if math.isinf(r.worst_margin) else f"{r.worst_margin:.3e}"
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.check_name:<22} kind={r.kind:<11} instances={r.instances:<6} violations={r.violations:<4} worst_margin={wm}")
        if not r.passed and r.kind != "measurement":
            failing = True
    out.write("verify_report.json", json_text([r.to_json() for r in reports]))
    return EXIT_VIOLATION if failing else EXIT_OK


def cmd_exact(cfg, seed: int, out: Outputs) -> int:
    from .exact import GibbsEngine, measure

    region = build_region(cfg)
    spec = measure(region, cfg["measure.beta"], cfg["measure.h"], cfg["measure.bc"])
    eng = GibbsEngine(spec)
    ev = build_event(cfg, region.kind)
    ev.check_in(region)
    result = {
        "n_sites": len(region),
        "beta": spec.beta,
        "h": cfg["measure.h"],
        "bc": cfg["measure.bc"],
        "event": ev.label,
        "log_Z": eng.log_Z,
        "event_prob": eng.expectation(eng.indicator(ev)),
        "magnetization": eng.expectation(eng.magnetization()) / len(region),
    }
    out.write("exact.json", json_text(result))
    out.write("exact.csv", csv_text(["quantity", "value"], [[k, result[k]] for k in ("log_Z", "event_prob", "magnetization")]))
    print(f"{ev.label}: P = {result['event_prob']:.15g}  log Z = {result['log_Z']:.15g}")
    return EXIT_OK


def cmd_hybrid(cfg, seed: int, out: Outputs) -> int:
    from .exact import measure
    from .hybrid import GAMMA_COLUMNS, gamma_ratio_grid, gamma_rows_csv, grid_sup

    region = build_region(cfg)
    ev = build_event(cfg, region.kind)
    base = measure(region, cfg["measure.beta"], 0.0, cfg["measure.bc"])
    h0 = cfg["hybrid.h"] if cfg["hybrid.h"] is not None else cfg["measure.h"]
    ps = cfg["hybrid.grid.p"] or [cfg["hybrid.p"]]
    hs = cfg["hybrid.grid.h"] or [h0]
    rows = gamma_ratio_grid(base, ps, hs, ev, cfg["hybrid.mask_cap"])
    out.write("hybrid.csv", csv_text(GAMMA_COLUMNS, gamma_rows_csv(rows)))
    sup = grid_sup(rows)
    out.write("hybrid.json", json_text({"event": ev.label, "points": len(rows), "grid_sup_ratio": sup,
                                        "dp_zero_points": sum(r.dp_zero for r in rows)}))
    print(f"{len(rows)} grid points, sup dmu_dh/dmu_dp = {sup:.10g}")
    return EXIT_OK


MC_COLUMNS = ["sample_id", "magnetization", "plus_span", "minus_span", "largest_plus", "largest_minus"]


def cmd_mc(cfg, seed: int, out: Outputs) -> int:
    from .events import lr_crossing
    from .exact import measure
    from .lattice import Box
    from .montecarlo import run_chain

    region = build_region(cfg)
    n = cfg["lattice.n"]
    box = Box(tuple(cfg["lattice.center"]), n)
    spec = measure(region, cfg["measure.beta"], cfg["measure.h"], cfg["measure.bc"])
    ev = lr_crossing(region.kind, n, tuple(cfg["event.layers"]), tuple(cfg["lattice.center"]))
    run = run_chain(spec, box, ev, cfg["mc.p"], cfg["mc.samples"], seed, cfg["mc.stream"],
                    cfg["mc.sampler"], cfg["mc.sweeps"], cfg["mc.sweeps_between"])
    summary = {"event": ev.label, "p": cfg["mc.p"], "sampler": cfg["mc.sampler"], **run.summary()}
    out.write("mc_summary.json", json_text(summary))
    if cfg["mc.records"]:
        rows = [[r.sample_id, r.magnetization, int(r.plus_span), int(r.minus_span), r.largest_plus, r.largest_minus]
                for r in run.records]
        out.write("mc_samples.csv", csv_text(MC_COLUMNS, rows))
    print(f"crossing = {summary['crossing']:.6f} +- {summary['crossing_se']:.6f} ({summary['samples']} samples)")
    if not summary["equilibrated"]:
        print("warning: thermalization below the configured minimum", file=sys.stderr)
    return EXIT_OK


def _coexistence(cfg, seed, out, kind) -> bool:
    from . import montecarlo as mc

    rows = mc.coexistence_scan(cfg["measure.beta"], cfg["measure.h"], cfg["sweep.n_list"], cfg["sweep.samples"], seed,
                               kind, cfg["mc.sampler"], cfg["mc.sweeps"], cfg["mc.sweeps_between"])
    cols = list(rows[0])
    out.write("coexistence.csv", csv_text(cols, [[r[c] for c in cols] for r in rows]))
    ok = all(r["both_span"] >= cfg["sweep.both_span_min"] for r in rows)
    out.write("coexistence.json", json_text({"rows": rows, "both_span_min": cfg["sweep.both_span_min"], "passed": ok}))
    for r in rows:
        print(f"n={r['n']}: both_span = {r['both_span']:.4f} +- {r['both_span_se']:.4f}")
    return ok


def _hc(cfg, seed, out, kind) -> bool:
    from . import montecarlo as mc

    try:
        # streams offset so the scan never reuses the coexistence chains
        res = mc.estimate_hc(cfg["measure.beta"], cfg["sweep.n_list"], cfg["sweep.h_grid"], cfg["sweep.samples"],
                             seed + 1, cfg["sweep.threshold"], kind, cfg["mc.sampler"], cfg["mc.sweeps"],
                             cfg["mc.sweeps_between"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [[n, h, p, s] for n in res.n_list for h, p, s in zip(res.h_grid, res.probs[n], res.ses[n])]
    out.write("hc.csv", csv_text(["n", "h", "prob", "se"], rows))
    out.write("hc.json", json_text(res.as_dict()))
    print(f"h_c bracket [{res.bracket[0]:g}, {res.bracket[1]:g}], strictly negative: {res.strictly_negative}")
    return res.strictly_negative


def cmd_sweep(cfg, seed: int, out: Outputs) -> int:
    from . import montecarlo as mc

    kind_name = cfg["sweep.kind"]
    kind = build_kind(cfg)
    samples = cfg["sweep.samples"]
    if kind_name == "coexistence":
        return EXIT_OK if _coexistence(cfg, seed, out, kind) else EXIT_VIOLATION
    if kind_name == "hc":
        return EXIT_OK if _hc(cfg, seed, out, kind) else EXIT_VIOLATION
    if kind_name == "phenomenology":
        ok = _coexistence(cfg, seed, out, kind)
        ok = _hc(cfg, seed, out, kind) and ok
        return EXIT_OK if ok else EXIT_VIOLATION
    if kind_name == "binder":
        n_list = cfg["sweep.n_list"]
        if len(n_list) != 2:
            raise UsageError("binder sweep needs exactly two sizes in sweep.n_list")
        res = mc.bracket_beta_c(cfg["sweep.beta_grid"], (n_list[0], n_list[1]), samples, seed, kind)
        out.write("binder.csv", csv_text(["beta", "U_small", "U_large"], [[r["beta"], r["U_small"], r["U_large"]] for r in res["rows"]]))
        out.write("binder.json", json_text(res))
        print(f"Binder crossing bracket: {res['bracket']}")
        return EXIT_OK
    # mixing: exact, no sampling
    from .verify import measure_ratio_mixing

    rows, fits = [], {}
    for b in cfg["sweep.beta_grid"]:
        fit = measure_ratio_mixing(b, cfg["measure.h"], (1, 1, cfg["sweep.mixing_length"]))
        fits[repr(float(b))] = fit.to_json()
        rows.extend([float(b), d, v] for d, v in zip(fit.distances, fit.deviations))
    out.write("mixing.csv", csv_text(["beta", "d", "deviation"], rows))
    out.write("mixing.json", json_text(fits))
    for b, f in fits.items():
        print(f"beta={b}: lambda_hat = {f['lambda_hat']}")
    return EXIT_OK


def _read_csv(path: str) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def cmd_plot(cfg, seed: int, out: Outputs) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    src = cfg["plot.input"]
    if src is None:
        raise UsageError("plot needs --input CSV")
    rows = _read_csv(src)
    if not rows:
        raise UsageError(f"{src} has no rows")
    kind = cfg["plot.kind"]
    need = {"crossing": {"n", "h", "prob"}, "gamma": {"p", "h", "ratio"}, "mixing": {"beta", "d", "deviation"}}[kind]
    missing = need - set(rows[0])
    if missing:
        raise UsageError(f"{src} lacks columns {sorted(missing)} for a {kind} plot")
    plt.rcParams["svg.hashsalt"] = "isingcoex"
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "crossing":
        for n in sorted({int(r["n"]) for r in rows}):
            sel = [r for r in rows if int(r["n"]) == n]
            h = [float(r["h"]) for r in sel]
            p = [float(r["prob"]) for r in sel]
            se = [float(r.get("se") or 0.0) for r in sel]
            ax.errorbar(h, p, yerr=se, marker="o", ms=3, capsize=2, label=f"n={n}")
        ax.set_xlabel("h")
        ax.set_ylabel("P(0 <-> boundary)")
        ax.legend()
    elif kind == "gamma":
        ps = sorted({float(r["p"]) for r in rows})
        hs = sorted({float(r["h"]) for r in rows})
        grid = np.full((len(hs), len(ps)), np.nan)
        for r in rows:
            v = float(r["ratio"])
            grid[hs.index(float(r["h"])), ps.index(float(r["p"]))] = v if math.isfinite(v) else np.nan
        mesh = ax.pcolormesh(ps, hs, grid, shading="nearest")
        fig.colorbar(mesh, ax=ax, label="dmu_dh / dmu_dp")
        ax.set_xlabel("p")
        ax.set_ylabel("h")
    else:
        for b in sorted({float(r["beta"]) for r in rows}):
            sel = [r for r in rows if float(r["beta"]) == b and float(r["deviation"]) > 0]
            if sel:
                ax.semilogy([int(r["d"]) for r in sel], [float(r["deviation"]) for r in sel], marker="o", ms=3, label=f"beta={b:g}")
        ax.set_xlabel("distance")
        ax.set_ylabel("|P(A and B) / (P(A) P(B)) - 1|")
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    out.write(f"{kind}.svg", buf.getvalue())
    return EXIT_OK


COMMANDS: dict[str, Callable] = {
    "verify": cmd_verify,
    "exact": cmd_exact,
    "hybrid": cmd_hybrid,
    "mc": cmd_mc,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
}


# ---------------------------------------------------------------------------
# running and manifests


def execute(subcommand: str, cfg: dict, seed: int, seed_source: str, out_dir: Path, argv=None) -> tuple[int, dict]:
    cfg = dict(cfg)
    cfg["run.seed"] = seed
    out = Outputs(out_dir)
    started = now()
    status = COMMANDS[subcommand](cfg, seed, out)
    manifest = {
        "subcommand": subcommand,
        "argv": list(argv) if argv is not None else None,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "seed": seed,
        "seed_source": seed_source,
        "seed_env": os.environ.get(config.SEED_ENV),
        "version": __version__,
        "backend": backend_name(),
        "started": started,
        "finished": now(),
        "exit_status": status,
        "outputs": dict(sorted(out.files.items())),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{subcommand}_manifest.json").write_text(json_text(manifest), encoding="utf-8")
    return status, manifest


def replay(manifest_path: str, out_dir: str | None = None) -> tuple[int, dict[str, tuple[str, str]]]:
    """Re-run a manifest; returns (status, {file: (recorded, replayed)}) for mismatches."""
    try:
        m = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        cfg = config.overlay(config.defaults(), m["config"])
        sub = m["subcommand"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"unreadable manifest {manifest_path}: {exc}") from None
    if sub not in COMMANDS:
        raise UsageError(f"manifest names unknown subcommand {sub!r}")
    target = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="isingcoex-replay-"))
    status, new = execute(sub, cfg, int(m["seed"]), m.get("seed_source", "config"), target, ["replay", manifest_path])
    bad = {}
    for name, digest in m["outputs"].items():
        got = new["outputs"].get(name)
        if got != digest:
            bad[name] = (digest, got)
    return status, bad


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--out", help="output directory (default runs)")
    p.add_argument("--seed", type=int, help=f"run seed (default: ${config.SEED_ENV} or 0)")


def _model(p: argparse.ArgumentParser, with_p: bool = False) -> None:
    p.add_argument("--lattice", choices=config.LATTICES)
    p.add_argument("--n", type=int, help="box half-width")
    p.add_argument("--beta", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--bc", choices=["free", "plus", "minus"])
    if with_p:
        p.add_argument("--p", type=float)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isingcoex", description="Exact and Monte Carlo checks for Ising sign clusters")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run identity and inequality checks")
    _common(v)
    v.add_argument("--check", help="check name, comma list, or all")
    v.add_argument("--instances", type=int)
    v.add_argument("--workers", type=int)
    v.add_argument("--list", action="store_true", help="print the registry and exit")

    e = sub.add_parser("exact", help="exact enumeration on a small region")
    _common(e)
    _model(e)
    e.add_argument("--layers", help="JSON list of z values to keep")
    e.add_argument("--event", choices=["lr_crossing", "connection"])
    e.add_argument("--event-layers", help="JSON list of layers the event lives in")

    hy = sub.add_parser("hybrid", help="hybrid measure and its derivatives")
    _common(hy)
    _model(hy, with_p=True)
    hy.add_argument("--layers", help="JSON list of z values to keep")
    hy.add_argument("--event", choices=["lr_crossing", "connection"])
    hy.add_argument("--event-layers", help="JSON list of layers the event lives in")

    m = sub.add_parser("mc", help="Monte Carlo crossing estimate and per-sample records")
    _common(m)
    _model(m, with_p=True)
    m.add_argument("--samples", type=int)
    m.add_argument("--sweeps", type=int, help="thermalization sweeps (default 100 n)")
    m.add_argument("--sampler", choices=["heatbath", "cluster"])
    m.add_argument("--no-records", action="store_true", help="skip the per-sample CSV")

    s = sub.add_parser("sweep", help="coexistence, h_c, Binder or mixing scans")
    _common(s)
    s.add_argument("--kind", choices=["coexistence", "hc", "phenomenology", "binder", "mixing"])
    s.add_argument("--beta", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--samples", type=int)
    s.add_argument("--n-list", help="JSON list of box half-widths")
    s.add_argument("--sampler", choices=["heatbath", "cluster"])

    pl = sub.add_parser("plot", help="SVG chart from a CSV written by sweep or hybrid")
    _common(pl)
    pl.add_argument("--input", help="CSV file")
    pl.add_argument("--kind", choices=["crossing", "gamma", "mixing"])

    r = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    r.add_argument("manifest")
    r.add_argument("--out", help="directory for replayed outputs (default: a temp dir)")
    return ap


def _json_arg(raw, name):
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"--{name} must be JSON, got {raw!r}") from None


def overrides(args) -> dict[str, Any]:
    g = lambda k: getattr(args, k, None)
    o = {
        "run.out": g("out"),
        "run.seed": g("seed"),
        "run.workers": g("workers"),
        "lattice.kind": g("lattice"),
        "lattice.n": g("n"),
        "lattice.layers": _json_arg(g("layers"), "layers"),
        "measure.beta": g("beta"),
        "measure.bc": g("bc"),
        "event.kind": g("event"),
        "event.layers": _json_arg(g("event_layers"), "event-layers"),
        "verify.check": g("check"),
        "verify.instances": g("instances"),
        "plot.input": g("input"),
        "plot.kind": g("kind") if args.command == "plot" else None,
        "sweep.kind": g("kind") if args.command == "sweep" else None,
        "mc.sampler": g("sampler"),
        "mc.sweeps": g("sweeps"),
    }
    if args.command == "hybrid":
        o["hybrid.p"] = g("p")
        o["hybrid.h"] = g("h")
    else:
        o["measure.h"] = g("h")
    if args.command == "mc":
        o["mc.p"] = g("p")
        o["mc.samples"] = g("samples")
        if args.no_records:
            o["mc.records"] = False
    if args.command == "sweep":
        o["sweep.samples"] = g("samples")
        o["sweep.n_list"] = _json_arg(g("n_list"), "n-list")
    return o


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            status, bad = replay(args.manifest, args.out)
            if bad:
                for name, (want, got) in bad.items():
                    print(f"MISMATCH {name}: recorded {want}, replayed {got}")
                return EXIT_VIOLATION
            print("replay reproduced every output digest")
            return status
        if args.command == "verify" and args.list:
            from .verify import REGISTRY

            print("\n".join(REGISTRY))
            return EXIT_OK
        cfg = config.overlay(config.load(args.config), overrides(args))
        seed, source = config.resolve_seed(cfg)
        status, _ = execute(args.command, cfg, seed, source, Path(cfg["run.out"]), argv)
        return status
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # domain errors (enumeration cap, mask cap, bad region) are usage problems here
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
