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
"""Freezes a tree-ensemble fixture and its expected predictions.

Writes tests/data/slowdown_ensemble.json (depth <= 12, numeric and one-hot
splits), tests/data/slowdown_inputs.json (50 inputs with expected factors
from a straight recursive traversal written here), and
tests/data/slowdown_depth13.json (one tree one level too deep).
"""
import json
import random
import sys
from pathlib import Path

NUMERIC = {
    "running_time_us": (1.0, 5000.0),
    "compute_throughput_pct": (0.0, 100.0),
    "memory_throughput_pct": (0.0, 100.0),
    "dram_throughput_pct": (0.0, 100.0),
    "achieved_occupancy_pct": (0.0, 100.0),
    "l1_hit_rate_pct": (0.0, 100.0),
    "l2_hit_rate_pct": (0.0, 100.0),
    "bucket_bytes": (1024.0, 2.0**28),
    "channels": (1.0, 32.0),
}
CATEGORICAL = {
    "kernel_class": ["GEMM", "Attention", "Transform", "Sum"],
    "protocol": ["LL", "LL128", "Simple"],
    "algorithm": ["Ring", "Tree"],
    "collective": ["AllReduce", "AllGather", "ReduceScatter", "P2P"],
}


def random_tree(rng, max_depth, force_depth=None):
    nodes = []

    def build(depth):
        idx = len(nodes)
        nodes.append(None)
        must_split = force_depth is not None and depth < force_depth and idx_on_spine[0] == idx
        if depth == max_depth or (not must_split and depth > 0 and rng.random() < 0.3):
            nodes[idx] = {"leaf": round(rng.uniform(-0.35, 0.45), 6)}
            return idx
        if rng.random() < 0.7:
            name = rng.choice(sorted(NUMERIC))
            lo, hi = NUMERIC[name]
            node = {"feature": name, "threshold": round(rng.uniform(lo, hi), 4)}
        else:
            field = rng.choice(sorted(CATEGORICAL))
            node = {"feature": f"{field}={rng.choice(CATEGORICAL[field])}", "threshold": 0.5}
        nodes[idx] = node
        if must_split:
            idx_on_spine[0] = len(nodes)
        node["left"] = build(depth + 1)
        node["right"] = build(depth + 1)
        return idx

    idx_on_spine = [0]
    build(0)
    return {"nodes": nodes}


def value_of(feature, inp):
    if "=" in feature:
        field, cat = feature.split("=", 1)
        return 1.0 if inp[field] == cat else 0.0
    return float(inp[feature])


def traverse(tree, inp):
    node = tree["nodes"][0]
    while "leaf" not in node:
        go_left = value_of(node["feature"], inp) < node["threshold"]
        node = tree["nodes"][node["left"] if go_left else node["right"]]
    return node["leaf"]


def predict(model, inp):
    total = model["base_score"]
    for tree in model["trees"]:
        total += traverse(tree, inp)
    return min(max(total, 1.0), model["clamp_max"])


def depth(tree, i=0):
    n = tree["nodes"][i]
    if "leaf" in n:
        return 0
    return 1 + max(depth(tree, n["left"]), depth(tree, n["right"]))


def main(out_dir):
    rng = random.Random(7310)
    trees = [random_tree(rng, 12, force_depth=12)]
    trees += [random_tree(rng, rng.randint(1, 8)) for _ in range(9)]
    assert depth(trees[0]) == 12
    model = {"base_score": 1.0, "clamp_max": 2.0, "trees": trees}

    inputs = []
    for _ in range(50):
        inp = {k: round(rng.uniform(lo, hi), 3) for k, (lo, hi) in NUMERIC.items()}
        inp["bucket_bytes"] = int(inp["bucket_bytes"])
        inp["channels"] = int(inp["channels"])
        for field, cats in CATEGORICAL.items():
            inp[field] = rng.choice(cats)
        inp["expected"] = predict(model, inp)
        inputs.append(inp)

    deep = random_tree(rng, 13, force_depth=13)
    assert depth(deep) == 13
    deep_model = {"base_score": 1.0, "clamp_max": 2.0, "trees": [deep]}

    out = Path(out_dir)
    (out / "slowdown_ensemble.json").write_text(json.dumps(model, indent=1) + "\n")
    (out / "slowdown_inputs.json").write_text(json.dumps(inputs, indent=1) + "\n")
    (out / "slowdown_depth13.json").write_text(json.dumps(deep_model, indent=1) + "\n")
    clamped = sum(1 for i in inputs if i["expected"] in (1.0, model["clamp_max"]))
    print(f"wrote 50 inputs ({clamped} clamped)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "data")
