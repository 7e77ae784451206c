"""Compare the compiled kernel core against the pure-Python fallback.

Runs the same seeded workloads through both backends and prints a table:
kernel microbenchmarks, a whole forward solve, a whole backward pass, and
one training epoch.  Also asserts that both backends produce bit-identical
results on a shared probe problem.

Usage:

    python benchmarks/bench_backends.py [--repeat N]
"""

from __future__ import annotations

import argparse
import random
import time
from array import array

from nodeclf import _backend
from nodeclf._backend import use
from nodeclf.adjoint import backward
from nodeclf.datasets import generate_synthetic, to_dataset
from nodeclf.dynamics import DynamicsParams
from nodeclf.linalg import Matrix, Vector, new_buffer
from nodeclf.model import TrainConfig, init_classifier, train
from nodeclf.odesolve import SolverConfig, solve
from nodeclf.text import fit


def flow(p):
    from nodeclf.dynamics import evaluate

    return lambda t, h: evaluate(p, t, h)


def make_workloads():
    rng = random.Random(12)
    d = 64
    p = DynamicsParams(
        Matrix.from_rows([[rng.uniform(-0.15, 0.15) for _ in range(d)]
                          for _ in range(d)]),
        Vector.of(rng.uniform(-0.1, 0.1) for _ in range(d)),
    )
    h0 = Vector.of(rng.uniform(-1.0, 1.0) for _ in range(d))
    cfg = SolverConfig()

    w = p.w.data
    b = p.b.data
    x = array("d", h0.data)
    out = new_buffer(d)
    aug = 2 * d + d * d + d
    state = array("d", [rng.uniform(-1.0, 1.0) for _ in range(aug)])
    aug_out = new_buffer(aug)
    scratch = new_buffer(d)

    def bench_matvec():
        K = _backend.kernels
        for _ in range(2000):
            K.matvec_into(out, w, d, d, x)

    def bench_adjoint_rhs():
        K = _backend.kernels
        for _ in range(500):
            K.adjoint_rhs_into(aug_out, scratch, w, b, d, state)

    def bench_forward_solve():
        for _ in range(10):
            solve(flow(p), h0, 0.0, 1.0, cfg)

    def bench_backward_pass():
        h1, _ = solve(flow(p), h0, 0.0, 1.0, cfg)
        g = Vector.of(1.0 for _ in range(d))
        for _ in range(5):
            backward(p, h1, g, 0.0, 1.0, cfg)

    rows = generate_synthetic("admit", 60, 5)
    data, names = to_dataset(rows)
    tfidf = fit([text for text, _ in rows])

    def bench_train_epoch():
        m = init_classifier(tfidf.n_features, 16, len(names), names, seed=5)
        train(m, data, TrainConfig(epochs=1, batch_size=16, seed=5), tfidf)

    return [
        ("matvec d=64 x2000", bench_matvec),
        ("fused backward derivative d=64 x500", bench_adjoint_rhs),
        ("forward solve d=64 x10", bench_forward_solve),
        ("backward pass d=64 x5", bench_backward_pass),
        ("train epoch (60 docs, d=16)", bench_train_epoch),
    ]


def probe_equality():
    """Both backends must agree bit for bit on a full forward+backward."""
    rng = random.Random(3)
    d = 8
    p = DynamicsParams(
        Matrix.from_rows([[rng.uniform(-0.4, 0.4) for _ in range(d)]
                          for _ in range(d)]),
        Vector.of(rng.uniform(-0.2, 0.2) for _ in range(d)),
    )
    h0 = Vector.of(rng.uniform(-1.0, 1.0) for _ in range(d))
    g = Vector.of(rng.uniform(-1.0, 1.0) for _ in range(d))
    results = {}
    for name in ("python", "compiled"):
        use(name)
        h1, _ = solve(flow(p), h0, 0.0, 1.0, SolverConfig())
        a0, pg = backward(p, h1, g, 0.0, 1.0, SolverConfig())
        results[name] = (h1.tolist(), a0.tolist(), pg.dw.tolists())
    assert results["python"] == results["compiled"], \
        "backends disagree on the probe problem"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="take the best of N timings (default 3)")
    args = parser.parse_args()

    try:
        use("compiled")
        have_compiled = True
    except ImportError:
        have_compiled = False
        print("compiled core is not built (python setup.py build_ext "
              "--inplace); timing the python backend only\n")

    if have_compiled:
        probe_equality()
        print("probe: python and compiled backends agree bit for bit\n")

    backends = ["python"] + (["compiled"] if have_compiled else [])
    timings: dict[str, dict[str, float]] = {}
    for backend in backends:
        use(backend)
        workloads = make_workloads()
        timings[backend] = {}
        for name, fn in workloads:
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                fn()
                best = min(best, time.perf_counter() - t0)
            timings[backend][name] = best

    width = max(len(name) for name, _ in make_workloads())
    header = f"{'workload'.ljust(width)}  {'python':>10}"
    if have_compiled:
        header += f"  {'compiled':>10}  {'speedup':>8}"
    print(header)
    for name, _ in make_workloads():
        py = timings["python"][name]
        line = f"{name.ljust(width)}  {py * 1e3:9.2f}ms"
        if have_compiled:
            cc = timings["compiled"][name]
            line += f"  {cc * 1e3:9.2f}ms  {py / cc:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
