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
"""Writes an illustrative component-timing grid for 8-GPU H800-like nodes.

Per-hop chunk times are affine in the chunk size with constants fitted by eye
to the 32-GPU ring AllReduce breakdown (data/h800_allreduce_breakdown.csv). The
grid exists so synthetic workloads have parameters for every group shape they
produce; it is not a measurement.

  python3 tools/make_param_grid.py > data/h800_grid_measurements.csv
  dtsim calibrate --measurements data/h800_grid_measurements.csv \
      --out data/h800_grid_params.csv
"""

import math

SETUP_US = 10.0
INTRA_HOP_US = (0.3, 1.0 / 34e3)  # (latency, us per byte), NVLink
INTER_HOP_US = (0.4, 1.0 / 50e3)  # IB
REDUCE_US_PER_BYTE = 1.0 / 150e3
SIZES = [2**k for k in range(16, 31)]  # 64 KiB .. 1 GiB


def chunk_for(size):
    return max(4096, min(288000, round(72000 * size / 2**24)))


def hop(params, chunk):
    lat, per_byte = params
    return lat + chunk * per_byte


def rows():
    families = []
    for n in (2, 4, 8):
        families.append(("NVLink", n, 1))
    for m in (2, 4):
        for k in (1, 2, 4, 8):
            families.append(("IB", k * m, m))
    for ic, n, m in families:
        k = n // m
        for size in SIZES:
            chunk = chunk_for(size)
            b = hop(INTRA_HOP_US, chunk)
            g = hop(INTER_HOP_US, chunk) if m > 1 else b
            red = REDUCE_US_PER_BYTE * size
            yield ("AllReduce", "Ring", ic, n, m, size, chunk, b * (n - 1), g * 2 * (n - 1), red)
            yield ("AllReduce", "Tree", ic, n, m, size, chunk, b * 2 * (k - 1), g, red)
            yield ("AllGather", "Ring", ic, n, m, size, chunk, b * (n - 1), g * (n - 1), 0.0)
            yield ("ReduceScatter", "Ring", ic, n, m, size, chunk, b * (n - 1), g * (n - 1), red)
    for ic, m in (("NVLink", 1), ("IB", 2)):
        for size in SIZES:
            chunk = chunk_for(size)
            b = hop(INTRA_HOP_US, chunk)
            g = hop(INTER_HOP_US, chunk) if m > 1 else b
            yield ("P2P", "Ring", ic, 2, m, size, chunk, b, g, 0.0)


def main():
    print("collective,algorithm,interconnect,n_devices,n_nodes,tensor_bytes,chunk_bytes,eta,"
          "setup_us,intra_rt_us,inter_rt_us,reduce_us")
    for coll, algo, ic, n, m, size, chunk, intra, inter, red in rows():
        print(f"{coll},{algo},{ic},{n},{m},{size},{chunk},,{SETUP_US!r},{intra!r},{inter!r},{red!r}")


if __name__ == "__main__":
    main()
