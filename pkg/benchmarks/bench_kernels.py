#!/usr/bin/env python3
"""Benchmark the compiled kernel lane against the numpy fallback.

Times the individual hot kernels on training-representative shapes, then a
full forward+backward training step of the default architecture at desk
scale. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--batch 50] [--length 100] [--reps 5]
"""

import argparse
import os
import time

import numpy as np


def timeit(fn, reps):
    fn()  # warmup
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(backends, batch, length, reps):
    rng = np.random.default_rng(0)
    rows = []

    x_conv = rng.standard_normal((batch, length + 14, 32))
    dcols = rng.standard_normal((batch, length, 15 * 32))
    x_pool = rng.standard_normal((batch, length, 64))
    h_dim = 128
    t_len = (length - 4) // 2 + 1
    xp = rng.standard_normal((batch, t_len, 4 * h_dim))
    wh = rng.standard_normal((h_dim, 4 * h_dim)) * 0.2

    cases = {
        "im2col k=15": lambda k: k.im2col(x_conv, 15),
        "col2im k=15": lambda k: k.col2im(dcols, 15, length + 14),
        "maxpool fwd": lambda k: k.maxpool_forward(x_pool, 4, 2),
        "lstm fwd": lambda k: k.lstm_forward(xp, wh),
    }
    fwd_caches = {name: mod.lstm_forward(xp, wh) for name, mod in backends.items()}
    dh = rng.standard_normal((batch, t_len, h_dim))

    for label, fn in cases.items():
        row = {"kernel": label}
        for name, mod in backends.items():
            row[name] = timeit(lambda: fn(mod), reps)
        rows.append(row)

    row = {"kernel": "lstm bwd"}
    for name, mod in backends.items():
        h, c, gates, tanh_c = fwd_caches[name]
        row[name] = timeit(lambda: mod.lstm_backward(dh, h, c, gates, tanh_c, wh), reps)
    rows.append(row)

    pool_out, pool_idx = next(iter(backends.values())).maxpool_forward(x_pool, 4, 2)
    dpool = rng.standard_normal(pool_out.shape)
    row = {"kernel": "maxpool bwd"}
    for name, mod in backends.items():
        row[name] = timeit(lambda: mod.maxpool_backward(dpool, pool_idx, length), reps)
    rows.append(row)
    return rows


def bench_train_step(backend_name, batch, length, reps):
    os.environ["FPBILSTM_BACKEND"] = backend_name
    # re-import with the requested lane active (fresh interpreter state matters,
    # so this helper runs in a subprocess)
    import subprocess
    import sys

    code = f"""
import time
import numpy as np
from fpbilstm.model import FPBiLSTM, ModelConfig
from fpbilstm.nn import ops
from fpbilstm.nn.optim import Adam
from fpbilstm.nn.kernels import BACKEND
assert BACKEND == {backend_name!r}, BACKEND
rng = np.random.default_rng(0)
cfg = ModelConfig()
model = FPBiLSTM(cfg, seed=0)
xs = [rng.standard_normal(({batch}, {length}, w)) for w in cfg.channel_widths]
target = np.eye(8)[rng.integers(0, 8, size={batch})]
opt = Adam(model.params, lr=1e-4)
def step():
    probs = model.forward(xs, training=True)
    loss = ops.mse_loss(probs, target)
    opt.zero_grad(); loss.backward(); opt.step()
step()
times = []
for _ in range({reps}):
    t0 = time.perf_counter(); step(); times.append(time.perf_counter() - t0)
print(min(times))
"""
    env = dict(os.environ, FPBILSTM_BACKEND=backend_name)
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True
    )
    return float(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=50)
    parser.add_argument("--length", type=int, default=100)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    from fpbilstm.nn.kernels import available_backends

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    print(f"shapes: batch={args.batch}, sequence length={args.length}\n")

    rows = bench_kernels(backends, args.batch, args.length, args.reps)
    names = list(backends)
    header = f"{'kernel':<14}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for row in rows:
        line = f"{row['kernel']:<14}" + "".join(f"{row[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            line += f"{row[names[0]] / row[names[1]]:>9.1f}x"
        print(line)

    print("\nfull training step (default architecture, forward+backward+update):")
    for name in names:
        seconds = bench_train_step(name, args.batch, args.length, args.reps)
        print(f"  {name:<8} {seconds * 1e3:8.1f} ms/step")


if __name__ == "__main__":
    main()
