"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Each kernel runs on the same random input under both backends; outputs are
compared before timing so a speedup never hides a wrong answer.
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from songtips import kernels


def greedy_case(rng, scale):
    n = int(600 * scale)
    A = rng.normal(size=(n, 64))
    L = np.ascontiguousarray(A @ A.T + 1e-8 * np.eye(n))
    return "greedy_map", (L, 50, 1e-12)


def greedy_song_case(rng, scale):
    # one song's candidate pool at pipeline scale
    F = rng.dirichlet(np.ones(8), size=120)
    q = rng.random(120) + 0.1
    L = np.ascontiguousarray((q[:, None] * F) @ (q[:, None] * F).T + 1e-8 * np.eye(120))
    return "greedy_map", (L, 8, 1e-12)


def rank_case(rng, scale):
    M = int(3000 * scale)
    A = sp.random(M, M, density=0.02, random_state=np.random.RandomState(1), format="csr")
    A = A + A.T
    rows = np.asarray(A.sum(axis=1)).ravel()
    T = sp.csr_matrix(sp.diags(1.0 / np.where(rows > 0, rows, 1.0)) @ A).T.tocsr()
    return "rank_iterate", (T.indptr.astype(np.int64), T.indices.astype(np.int64), T.data.astype(float),
                            0.15 / M, 1.0 / M, 0.85, 1e-10, 200)


def plsa_case(rng, scale):
    D, V, t = int(2000 * scale), 3000, 8
    nnz = D * 12
    doc = np.sort(rng.integers(D, size=nnz)).astype(np.int64)
    word = rng.integers(V, size=nnz).astype(np.int64)
    count = rng.integers(1, 4, size=nnz).astype(float)
    theta = rng.dirichlet(np.ones(t), size=D)
    phi = rng.dirichlet(np.ones(V), size=t)
    return "plsa_accumulate", (doc, word, count, theta, phi)


def _flat(out):
    return [np.atleast_1d(np.asarray(x, dtype=float)) for x in out]


def bench(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    if "compiled" not in kernels.BACKENDS:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    backends = sorted(kernels.BACKENDS)
    print(f"{'case':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for make in (greedy_case, greedy_song_case, rank_case, plsa_case):
        name, inputs = make(rng, args.scale)
        label = make.__name__.removesuffix("_case")
        outs = {b: _flat(getattr(kernels.get(b), name)(*inputs)) for b in backends}
        ref = outs["python"]
        for b, out in outs.items():
            for x, y in zip(out, ref):
                np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-12, err_msg=f"{name} on {b}")
        t = {b: bench(getattr(kernels.get(b), name), inputs, args.repeat) for b in backends}
        speed = f"{t['python'] / t['compiled']:.1f}x" if "compiled" in t else "-"
        print(f"{label:<16}" + "".join(f"{1e3 * t[b]:>10.2f}ms" for b in backends) + f"{speed:>10}")


if __name__ == "__main__":
    main()
