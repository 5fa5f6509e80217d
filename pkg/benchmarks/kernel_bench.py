"""Compare the compiled kernels against the pure numpy fallback.

Times the two hot paths (decision-tree fitting, whose cost is the per-node
split scan, and KNN probability prediction) plus one full pipeline
evaluation, on each available backend.

    python benchmarks/kernel_bench.py [--quick]
"""

import argparse
import time

import numpy as np

from strataml import kernels
from strataml.data import Dataset, stratified_sample
from strataml.evaluate import evaluate
from strataml.operators import DecisionTree, KNN
from strataml.pipeline import Individual, parse_pipeline
from strataml.operators import DEFAULT_REGISTRY
from strataml.rng import RngStream


def timed(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def make_data(n, f, classes, seed=0):
    gen = np.random.default_rng(seed)
    centers = gen.normal(0, 3.0, size=(classes, f))
    y = gen.integers(0, classes, size=n)
    X = centers[y] + gen.normal(0, 1.5, size=(n, f))
    return X, y.astype(np.int64)


def bench_tree(n, f, classes):
    X, y = make_data(n, f, classes)

    def job():
        DecisionTree(max_depth=10, min_samples_split=2).fit(X, y, classes)

    return job


def bench_knn(n_train, n_test, f, classes, k=7):
    X, y = make_data(n_train + n_test, f, classes)
    model = KNN(k=k, weighting="distance").fit(X[:n_train], y[:n_train], classes)
    test = X[n_train:]

    def job():
        model.predict_proba(test)

    return job


def bench_pipeline(n, f):
    X, y = make_data(n, f, 2, seed=3)
    dataset = Dataset(X, y, name="bench")
    subset = stratified_sample(dataset, n, RngStream(0, "bench"))
    ind = Individual(
        parse_pipeline(
            "DecisionTree(StandardScaler(INPUT), max_depth=8, min_samples_split=5)",
            DEFAULT_REGISTRY,
        )
    )

    def job():
        evaluate(ind, subset, 3, None, RngStream(1, "bench"))

    return job


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller sizes, 1 repeat")
    args = parser.parse_args()

    repeats = 1 if args.quick else 3
    scale = 0.2 if args.quick else 1.0
    cases = [
        ("tree fit  n=20k F=10 C=3", bench_tree(int(20_000 * scale), 10, 3)),
        ("tree fit  n=100k F=10 C=2", bench_tree(int(100_000 * scale), 10, 2)),
        ("knn preds 8k->2k F=10 C=3", bench_knn(int(8_000 * scale), int(2_000 * scale), 10, 3)),
        ("knn preds 40k->10k F=8 C=2", bench_knn(int(40_000 * scale), int(10_000 * scale), 8, 2)),
        ("evaluate tree pipeline n=30k", bench_pipeline(int(30_000 * scale), 10)),
    ]

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")
    header = f"{'case':<32}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, job in cases:
        times = {}
        for backend in backends:
            previous = kernels.use_backend(backend)
            try:
                times[backend] = timed(job, repeats)
            finally:
                kernels.use_backend(previous)
        row = f"{label:<32}" + "".join(f"{times[b] * 1000:>10.1f}ms" for b in backends)
        if "compiled" in times and "pure" in times:
            row += f"{times['pure'] / times['compiled']:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
