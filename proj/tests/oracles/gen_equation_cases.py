#!/usr/bin/env python3
# Copyright 2026 The dtsim Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Freezes expected collective-time values for the equation fidelity suite.

Evaluates the ring/tree cost formulas in exact rational arithmetic and writes
the correctly rounded doubles to tests/data/equation_cases.csv. This is an
independent straight-line evaluation: it shares no code with the C++ model.
Re-run only when adding cases; the CSV is checked in.
"""
import csv
import math
import random
import sys
from fractions import Fraction as F
from pathlib import Path


def ring_allgather(a, b, g, d, eta, n, m, size):
    g = b if m == 1 else g
    return a + g * eta * (n - 1)


def ring_reduce_scatter(a, b, g, d, eta, n, m, size):
    g = b if m == 1 else g
    return a + eta * (b * (n - 1) + g * (n - 1)) + d * size


def ring_allreduce(a, b, g, d, eta, n, m, size):
    g = b if m == 1 else g
    return a + eta * (b * (n - 1) + g * 2 * (n - 1)) + d * size


def tree_allreduce(a, b, g, d, eta, n, m, size):
    g = b if m == 1 else g
    k = n // m
    log_m = int(math.log2(m))
    assert 2 ** log_m == m
    return a + g * (eta - 1) + 2 * b * (k - 1) + 2 * g * log_m + d * size


EQUATIONS = {
    "AllGather/Ring": ring_allgather,
    "ReduceScatter/Ring": ring_reduce_scatter,
    "AllReduce/Ring": ring_allreduce,
    "AllReduce/Tree": tree_allreduce,
}


def main(out_path):
    rng = random.Random(20240521)
    rows = []
    for name, fn in EQUATIONS.items():
        shapes = [(1, 1), (2, 1), (8, 1), (2, 2), (4, 2), (16, 2), (32, 4), (64, 8),
                  (16, 16), (128, 16), (8, 8), (256, 32)]
        for i in range(24):
            n, m = shapes[i % len(shapes)]
            # Params as short decimals so the CSV inputs are exact as written.
            a = F(rng.randint(0, 50000), 1000)
            b = F(rng.randint(1, 20000), 1000)
            g = F(rng.randint(1, 40000), 1000)
            d = F(rng.randint(1, 99999), 10 ** 8)
            eta = rng.randint(1, 64)
            size = rng.choice([1, 4096, 1 << 20, 4 << 20, 32 << 20, 256 << 20]) + rng.randint(0, 1000)
            inputs = dict(alpha=a, beta=b, gamma=g, delta=d)
            # Use the doubles the C++ side will parse, then evaluate exactly.
            exact = {k: F(float(v)) for k, v in inputs.items()}
            value = fn(exact["alpha"], exact["beta"], exact["gamma"], exact["delta"], eta, n, m, size)
            rows.append([name, size, n, m, repr(float(a)), repr(float(b)), repr(float(g)),
                         repr(float(d)), eta, repr(float(value))])
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["equation", "tensor_bytes", "n", "m", "alpha_us", "beta_us", "gamma_us",
                    "delta_us_per_byte", "eta", "expected_us"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "equation_cases.csv")
