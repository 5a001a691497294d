"""Numba kernels against their numpy fallbacks, in one process.

    python3 benchmarks/bench_backends.py [--repeat 5] [--n 8] [--json out.json]

Each kernel runs once untimed (compilation, caches), then ``--repeat`` times;
the table reports the best time per backend and checks the outputs agree.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from isingcoex import kernels
from isingcoex.exact import measure
from isingcoex.lattice import Box, build_region, tri_times_z
from isingcoex.rng import stream_key, sweep_key


def best_of(fn, repeat: int) -> float:
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n: int):
    kind = tri_times_z()
    region = build_region(kind, Box((0, 0, 0), n))
    spec = measure(region, 0.2, 0.05, "plus")
    nbr = np.ascontiguousarray(region.nbr)
    order, slices = kernels.colour_order(nbr)
    ext = spec.effective_field()
    bplus, bminus = (np.asarray(a, dtype=np.int64) for a in spec.boundary_counts())
    rng = np.random.default_rng(1)
    start = rng.choice(np.array([-1, 1], dtype=np.int8), size=len(region))
    key = sweep_key(stream_key(7, 0), 3)
    active = np.ones(len(region), dtype=bool)

    def heat(impl):
        def run():
            s = start.copy()
            if impl == "nb":
                kernels.heat_bath_sweep_nb(s, order, nbr, spec.beta, ext, np.uint64(key))
            else:
                kernels.heat_bath_sweep_np(s, order, nbr, spec.beta, ext, key, slices)
            return s

        return run

    def ghost(impl):
        f = kernels.ghost_update_nb if impl == "nb" else kernels.ghost_update_np

        def run():
            s = start.copy()
            f(s, nbr, spec.beta, 0.05, bplus, bminus, np.uint64(key) if impl == "nb" else key)
            return s

        return run

    def labels(impl):
        f = kernels.sign_labels_nb if impl == "nb" else kernels.sign_labels_np
        return lambda: f(start, nbr, active)

    small = build_region(kind, Box((0, 0, 0), 1))
    small = small.subregion([s for s in small.sites if s[2] in (0, 1)])
    edges = np.ascontiguousarray(small.edges())
    field = np.linspace(-0.3, 0.3, len(small))

    def weights(impl):
        f = kernels.log_weights_nb if impl == "nb" else kernels.log_weights_np
        return lambda: f(len(small), edges, 0.3, field)

    table = rng.random(1 << 12) < 0.4
    w = rng.random((2, 1 << 12))
    masks = rng.integers(0, 1 << 12, size=64).astype(np.int64)

    def sums(impl):
        f = kernels.masked_sums_nb if impl == "nb" else kernels.masked_sums_np
        return lambda: f(table, w, masks)

    return {
        f"heat_bath_sweep B_{n} ({len(region)} sites)": heat,
        f"ghost_update B_{n}": ghost,
        f"sign_labels B_{n}": labels,
        f"log_weights {len(small)} sites": weights,
        "masked_sums 2^12 x 64 masks": sums,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=8, help="box half-width for the sampler kernels")
    ap.add_argument("--json", help="write the timings here")
    args = ap.parse_args()

    rows = []
    print(f"{'kernel':<36} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  agree")
    for name, make in cases(args.n).items():
        nb, npy = make("nb"), make("np")
        same = bool(np.allclose(nb(), npy(), rtol=1e-12, atol=1e-12))
        t_nb, t_np = best_of(nb, args.repeat), best_of(npy, args.repeat)
        rows.append({"kernel": name, "numba": t_nb, "numpy": t_np, "speedup": t_np / t_nb, "agree": same})
        print(f"{name:<36} {t_nb:>10.5f} {t_np:>10.5f} {t_np / t_nb:>8.1f}  {same}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
