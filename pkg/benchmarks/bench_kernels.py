"""Time compiled vs numpy kernels on one forward+backward pass per sample.

    python benchmarks/bench_kernels.py [--hidden 16] [--grid 3] [--repeats 20]
"""
import argparse
import time

from hanet import _backend, _pykernels
from hanet.gradcheck import analytic_grads, tiny_problem
from hanet.model import ModelConfig

try:
    from hanet import _kernels
except ImportError:
    _kernels = None


def time_backend(kernels, model, batch, repeats):
    _backend.kernels = kernels
    analytic_grads(model, batch)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        analytic_grads(model, batch)
        best = min(best, time.perf_counter() - t0)
    return best / len(batch)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=3)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--frames", type=int, default=16)
    ap.add_argument("--skip", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    cfg = ModelConfig(K=args.grid, D=args.dim, H=args.hidden, k=args.skip, T=args.frames, C=4)
    model, batch = tiny_problem(cfg, 0, n_samples=8)
    backends = {"python": _pykernels}
    if _kernels is not None:
        backends["compiled"] = _kernels
    times = {name: time_backend(k, model, batch, args.repeats) for name, k in backends.items()}
    print(f"config K={cfg.K} D={cfg.D} H={cfg.H} T={cfg.T} k={cfg.k}, forward+backward per sample")
    for name, t in times.items():
        print(f"  {name:9s} {t * 1e3:8.3f} ms")
    if "compiled" in times:
        print(f"  speedup   {times['python'] / times['compiled']:8.2f}x")


if __name__ == "__main__":
    main()
