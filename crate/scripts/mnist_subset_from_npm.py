#!/usr/bin/env python3
"""Build a 10k-sample MNIST subset in IDX format from the `mnist` npm package.

The npm package (https://www.npmjs.com/package/mnist) ships 10,000 MNIST digits
as JSON arrays of intensities in [0, 1] rounded to three decimals. Rounding
`value * 255` recovers the original byte exactly.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_subset_from_npm.py package/src/digits data/mnist-10k

Writes train-{images-idx3,labels-idx1}-ubyte.gz (8000 samples) and
t10k-{images-idx3,labels-idx1}-ubyte.gz (2000 samples), shuffled with a fixed
seed so class order is mixed.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

TRAIN = 8000
SEED = 20170101


def write_gz(path, payload):
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
            gz.write(payload)


def idx_images(images):
    header = struct.pack(">IIII", 0x00000803, len(images), 28, 28)
    return header + b"".join(images)


def idx_labels(labels):
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


def main(src, dst):
    src, dst = Path(src), Path(dst)
    samples = []
    for digit in range(10):
        values = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(values) % 784 == 0
        for start in range(0, len(values), 784):
            pixels = bytes(int(round(v * 255)) for v in values[start:start + 784])
            samples.append((pixels, digit))
    random.Random(SEED).shuffle(samples)
    dst.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", samples[:TRAIN]), ("t10k", samples[TRAIN:])):
        write_gz(dst / f"{name}-images-idx3-ubyte.gz", idx_images([p for p, _ in part]))
        write_gz(dst / f"{name}-labels-idx1-ubyte.gz", idx_labels([l for _, l in part]))
        print(f"{name}: {len(part)} samples")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
