"""Time the numba and numpy path kernels on the same workload and check they agree.

    python benchmarks/bench_kernels.py --n-paths 100000 --steps 128 --factors 3
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cir3 import _kernels_numba as knb
from cir3 import _kernels_numpy as knp
from cir3.noise import GammaLaw
from cir3.params import PRESETS
from cir3.sde import COORDS, draw_initial


def _time(mod, init, args, repeat: int):
    n_paths, factors = init.shape
    n_steps, stride = args[3], args[4]
    best, out = float("inf"), None
    for _ in range(repeat):
        out = np.full((n_steps // stride + 1, n_paths, factors), np.nan)
        bad = np.full(n_paths, -1, dtype=np.int64)
        t0 = time.perf_counter()
        mod.simulate(init, factors, *args, 0, out, bad)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=128)
    ap.add_argument("--factors", type=int, choices=[1, 2, 3], default=3)
    ap.add_argument("--scheme", choices=["exact_v_euler_rest", "euler_full_truncation"], default="exact_v_euler_rest")
    ap.add_argument("--preset", choices=sorted(PRESETS), default="default")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    params = PRESETS[args.preset]
    laws = {"R": 0.5, "theta": 1.0, "v": GammaLaw(2.0, 0.5)}
    init = draw_initial([laws[c] for c in COORDS[args.factors]], args.factors, args.n_paths, 0)
    kargs = (args.scheme == "exact_v_euler_rest", np.array(params.as_tuple()), 2.0**-7, args.steps, args.steps,
             np.uint64(1))

    # warm the JIT so compile time is not counted
    small = np.ascontiguousarray(init[:2])
    knb.simulate(small, args.factors, *kargs, 0, np.empty((2, 2, args.factors)), np.full(2, -1, dtype=np.int64))

    t_nb, out_nb = _time(knb, init, kargs, args.repeat)
    t_np, out_np = _time(knp, init, kargs, args.repeat)
    diff = float(np.max(np.abs(out_nb - out_np)))
    steps = args.n_paths * args.steps
    print(f"workload: {args.n_paths} paths x {args.steps} steps, {args.factors} factor(s), {args.scheme}, "
          f"preset {args.preset}")
    print(f"numba : {t_nb:8.3f} s  ({steps / t_nb / 1e6:7.2f} M path-steps/s)")
    print(f"numpy : {t_np:8.3f} s  ({steps / t_np / 1e6:7.2f} M path-steps/s)")
    print(f"speedup {t_np / t_nb:.1f}x; max |numba - numpy| = {diff:.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
