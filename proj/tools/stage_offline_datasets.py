#!/usr/bin/env python3
"""Stage MNIST, Fashion-MNIST and WDBC into a local mirror directory.

For sandboxes without access to the public dataset hosts. Sources:
  --mnist-idx     directory holding the four uncompressed MNIST IDX files
                  (e.g. the `data/` folder of the npm package `mnist-data`)
  --fashion-json  directory holding 0.json..9.json of the npm package
                  `fashion-mnist` (7000 raw 28x28 images per class)
  WDBC is taken from scikit-learn's bundled breast_cancer.csv.

The output directory mirrors the upstream file names (gzip-compressed IDX,
plain wdbc.data) so it can be passed to `reluhead fetch --mirror file://DIR`.
"""
import argparse
import gzip
import json
import os
import random
import shutil
import struct

IDX_FILES = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]


def write_gz(path, payload):
    # mtime=0 keeps the archive bytes reproducible
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
            gz.write(payload)


def stage_mnist(src, out):
    os.makedirs(out, exist_ok=True)
    for name in IDX_FILES:
        with open(os.path.join(src, name), "rb") as f:
            write_gz(os.path.join(out, name + ".gz"), f.read())


def idx_images(images):
    head = struct.pack(">IIII", 0x00000803, len(images), 28, 28)
    return head + b"".join(bytes(img) for img in images)


def idx_labels(labels):
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


def stage_fashion(src, out, train_per_class=6000, seed=0):
    # Each class file lists that class's images; the first 6000 become the
    # training split and the remaining 1000 the test split.
    os.makedirs(out, exist_ok=True)
    train, test = [], []
    for cls in range(10):
        with open(os.path.join(src, f"{cls}.json")) as f:
            imgs = [x for x in json.load(f)["data"] if len(x) == 784]
        train += [(img, cls) for img in imgs[:train_per_class]]
        test += [(img, cls) for img in imgs[train_per_class:]]
    rng = random.Random(seed)
    rng.shuffle(train)
    rng.shuffle(test)
    for prefix, rows in (("train", train), ("t10k", test)):
        write_gz(os.path.join(out, f"{prefix}-images-idx3-ubyte.gz"),
                 idx_images([r[0] for r in rows]))
        write_gz(os.path.join(out, f"{prefix}-labels-idx1-ubyte.gz"),
                 idx_labels([r[1] for r in rows]))


def stage_wdbc(out):
    import sklearn.datasets
    src = os.path.join(os.path.dirname(sklearn.datasets.__file__), "data",
                       "breast_cancer.csv")
    os.makedirs(out, exist_ok=True)
    with open(src) as f, open(os.path.join(out, "wdbc.data"), "w") as dst:
        next(f)  # "569,30,malignant,benign"
        for i, line in enumerate(f):
            fields = line.strip().split(",")
            # sklearn target: 0 = malignant, 1 = benign; the UCI file has no
            # ids in this copy, so a running index stands in for them.
            diag = "M" if fields[-1] == "0" else "B"
            dst.write(",".join([str(100000 + i), diag] + fields[:-1]) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mnist-idx")
    ap.add_argument("--fashion-json")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    if args.mnist_idx:
        stage_mnist(args.mnist_idx, os.path.join(args.out, "mnist"))
    if args.fashion_json:
        stage_fashion(args.fashion_json, os.path.join(args.out, "fashion"))
    stage_wdbc(os.path.join(args.out, "wdbc"))


if __name__ == "__main__":
    main()
