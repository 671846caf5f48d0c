"""Regenerate the bundled weight cache used by the tests and the CLI defaults.

    python3 scripts/precompute_weights.py [--samples 2097152] [--half-plane-samples 134217728]
                                          [--out src/artifact/data/weights.cache]

Half-plane weights get more samples: the star product multiplies them by
large polynomial coefficients, so their errors dominate raw-weight residuals.
"""

import argparse
import logging
import tempfile
import time
from pathlib import Path

from artifact import graphs as G
from artifact.algebra import aff2, heisenberg3, sl2
from artifact.biquant import (SUB_PRESETS, cf_operator, double_pair, mu0_operator, sub_preset,
                              wheel_functions)
from artifact.source import WeightSource
from artifact.weights import HALF_PLANE, WeightCache, format_line


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=2 ** 21)
    ap.add_argument("--half-plane-samples", type=int, default=2 ** 27)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/artifact/data/weights.cache")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    tmp = Path(tempfile.mkdtemp())
    cache = WeightCache(tmp, bundled=False)
    hp = WeightSource(cache, samples=args.half_plane_samples, seed=args.seed)
    t0 = time.time()
    for n in (1, 2, 3):
        for g in G.enumerate_graphs(n, 2, G.ESSENTIAL):
            hp(g, HALF_PLANE)
    src = WeightSource(cache, samples=args.samples, seed=args.seed)
    print(f"half-plane done ({time.time() - t0:.0f}s)")
    subs = [sub_preset(name) for name in SUB_PRESETS]
    subs += [double_pair(b, 1) for b in (sl2(), aff2(), heisenberg3())]
    for sub in subs:
        mu0_operator(sub, 3, src)
        cf_operator(sub, 2, src)
        wheel_functions(sub, 2, src)
        print(f"{sub.name} done ({time.time() - t0:.0f}s)")
    lines = sorted({format_line(w) for w in src.cache.entries.values()})
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("# bundled weights: <graph_id> <mode> <convention_version> <value> <std_error> <samples> <seed>\n"
                        + "\n".join(lines) + "\n")
    print(f"{len(lines)} entries written to {args.out}; unsnapped: {sorted(src.unsnapped | hp.unsnapped)}")


if __name__ == "__main__":
    main()
