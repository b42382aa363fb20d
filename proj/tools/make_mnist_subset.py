#!/usr/bin/env python3
# Copyright 2026 The rfprox Authors.
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
"""Writes a shuffled MNIST subset as IDX files.

Source: the 5000-image MNIST sample shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, 784 pixel columns then the label).
Usage: make_mnist_subset.py <mlxtend.whl> <out_dir> [count] [seed]
"""
import gzip
import random
import struct
import sys
import zipfile


def main():
    wheel, out_dir = sys.argv[1], sys.argv[2]
    count = int(sys.argv[3]) if len(sys.argv) > 3 else 2500
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 20180713
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    rows = [list(map(int, line.split(","))) for line in text.splitlines() if line]
    random.Random(seed).shuffle(rows)
    rows = rows[:count]
    with open(f"{out_dir}/mnist{count}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, count, 28, 28))
        for r in rows:
            f.write(bytes(r[:784]))
    with open(f"{out_dir}/mnist{count}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, count))
        f.write(bytes(r[784] for r in rows))


if __name__ == "__main__":
    main()
