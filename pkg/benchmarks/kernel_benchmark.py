"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on synthetic group-model data across sample sizes
and reports per-call times plus one end-to-end EM fit per backend.

    python benchmarks/kernel_benchmark.py [--sizes 500,5000,50000] [--repeat 200]

The backend used by the fit comparison is controlled the same way as in
the library: the FOURPL_BACKEND environment variable (the script spawns
one subprocess per backend so both are measured in one invocation).
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fourpl import _kernels_numpy  # noqa: E402

try:
    from fourpl import _kernels_numba
except ImportError:
    _kernels_numba = None


def make_inputs(n, rng):
    x = rng.standard_normal(n)
    g = (np.arange(n) % 2).astype(np.float64)
    X = np.ascontiguousarray(np.column_stack([np.ones(n), x, g, g * x]))
    Z = np.ascontiguousarray(np.column_stack([np.ones(n), g]))
    b = np.array([0.1, 1.4, -0.8, 0.4])
    c = np.array([0.22, -0.1])
    d = np.array([0.9, -0.08])
    phi, lower, upper, pi = _kernels_numpy.components(X, Z, b, c, d)
    y = (rng.random(n) < pi).astype(np.float64)
    w1, w2, w3, w4, _ = _kernels_numpy.em_weights(y, phi, lower, upper)
    return {
        "y": y, "X": X, "Z": Z, "b": b, "c": c, "d": d,
        "phi": phi, "w1": w1, "w2": w2, "w3": w3, "w4": w4, "w23": w2 + w3,
    }


def calls(mod, v):
    return {
        "rss_value_grad": lambda: mod.rss_value_grad(
            v["y"], v["X"], v["Z"], v["b"], v["c"], v["d"], False
        ),
        "loglik_value_grad": lambda: mod.loglik_value_grad(
            v["y"], v["X"], v["Z"], v["b"], v["c"], v["d"]
        ),
        "loglik_hessian": lambda: mod.loglik_hessian(
            v["y"], v["X"], v["Z"], v["b"], v["c"], v["d"]
        ),
        "em_weights": lambda: mod.em_weights(
            v["y"], v["phi"], v["Z"] @ v["c"], v["Z"] @ v["d"]
        ),
        "l1_value_grad_hess": lambda: mod.l1_value_grad_hess(
            v["X"], v["w2"], v["w3"], v["b"]
        ),
        "l2_value_grad_hess": lambda: mod.l2_value_grad_hess(
            v["Z"], v["w1"], v["w4"], v["w23"], v["c"], v["d"]
        ),
        "nls_sandwich_parts": lambda: mod.nls_sandwich_parts(
            v["y"], v["X"], v["Z"], v["b"], v["c"], v["d"]
        ),
    }


def time_call(fn, repeat):
    fn()  # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(12345)
    backends = [("numpy", _kernels_numpy)]
    if _kernels_numba is not None:
        backends.append(("numba", _kernels_numba))
    print(f"{'kernel':<22}{'n':>8}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for n in sizes:
        inputs = make_inputs(n, rng)
        names = calls(_kernels_numpy, inputs).keys()
        for kernel in names:
            row = f"{kernel:<22}{n:>8}"
            times = []
            for _, mod in backends:
                t = time_call(calls(mod, inputs)[kernel], repeat)
                times.append(t)
                row += f"{t * 1e6:>12.1f}us"
            if len(times) == 2 and times[1] > 0:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)


_FIT_SNIPPET = """
import json, time
import numpy as np
from fourpl import kernels, simple_truth, generate_dataset, initial_values, ModelSpec, ModelKind, fit_em, fit_mle
kernels.warm_up()
data = generate_dataset(simple_truth(), ModelKind.SIMPLE, 5000, seed=99, replication=0)
init, _ = initial_values(data, ModelSpec.simple())
t0 = time.perf_counter(); r1 = fit_mle(data, init); t_mle = time.perf_counter() - t0
t0 = time.perf_counter(); r2 = fit_em(data, init); t_em = time.perf_counter() - t0
print(json.dumps({"backend": kernels.BACKEND, "mle_s": t_mle, "mle_iters": r1.iterations,
                  "em_s": t_em, "em_iters": r2.iterations}))
"""


def bench_fits():
    print("\nend-to-end fits (n=5000, simple model):")
    for backend in ("numpy", "numba"):
        env = dict(os.environ, FOURPL_BACKEND=backend)
        env["PYTHONPATH"] = os.pathsep.join(
            [os.path.join(os.path.dirname(__file__), "..", "src"),
             env.get("PYTHONPATH", "")]
        )
        out = subprocess.run(
            [sys.executable, "-c", _FIT_SNIPPET], env=env, capture_output=True, text=True
        )
        if out.returncode != 0:
            print(f"  {backend}: failed ({out.stderr.strip().splitlines()[-1]})")
            continue
        doc = json.loads(out.stdout.strip().splitlines()[-1])
        print(
            f"  {doc['backend']:<6} MLE {doc['mle_s'] * 1e3:8.1f} ms "
            f"({doc['mle_iters']} it)   EM {doc['em_s'] * 1e3:8.1f} ms "
            f"({doc['em_iters']} it)"
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="500,5000,50000")
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--skip-fits", action="store_true")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    bench_kernels(sizes, args.repeat)
    if not args.skip_fits:
        bench_fits()


if __name__ == "__main__":
    main()
