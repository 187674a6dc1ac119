#!/usr/bin/env python3
"""Regenerate the bundled datasets under data/.

UCI tables (breast_cancer, wine, digits) come from scikit-learn's bundled
copies and are written as plain CSV with the label in the last column.

The MNIST subset is rebuilt from the `mnist` npm package (cazala/mnist), which
ships 1001 genuine MNIST samples per digit as JSON. We write canonical IDX
files: 900 samples per digit for training, the remaining 101 for testing,
round-robin interleaved. Full 60k/10k MNIST works too if you drop the
standard train-images-idx3-ubyte etc. into data/mnist/.

Usage: python3 scripts/make_datasets.py [--mnist-src node_modules/mnist/src/digits]
"""

import argparse
import json
import os
import struct

OUT = os.path.join(os.path.dirname(__file__), "..", "data")


def write_csv(path, features, labels, header=None):
    with open(path, "w") as f:
        if header:
            f.write(",".join(header) + "\n")
        for row, label in zip(features, labels):
            f.write(",".join("%.10g" % v for v in row) + "," + str(int(label)) + "\n")
    print("wrote %s (%d rows)" % (path, len(labels)))


def make_uci():
    from sklearn.datasets import load_breast_cancer, load_digits, load_wine

    bc = load_breast_cancer()
    header = [n.replace(" ", "_") for n in bc.feature_names] + ["diagnosis"]
    write_csv(os.path.join(OUT, "breast_cancer.csv"), bc.data, bc.target, header)

    wine = load_wine()
    write_csv(os.path.join(OUT, "wine.csv"), wine.data, wine.target)

    digits = load_digits()
    write_csv(os.path.join(OUT, "digits.csv"), digits.data, digits.target)


def write_idx(prefix, images, labels):
    n = len(images)
    with open(prefix + "-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(prefix + "-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(bytes(labels))
    print("wrote %s-* (%d samples)" % (prefix, n))


def make_mnist(src):
    per_digit = []
    for d in range(10):
        with open(os.path.join(src, "%d.json" % d)) as f:
            flat = json.load(f)["data"]
        samples = [flat[i * 784 : (i + 1) * 784] for i in range(len(flat) // 784)]
        per_digit.append([[min(255, max(0, round(v * 255))) for v in s] for s in samples])

    n_train = 900
    train_imgs, train_labels, test_imgs, test_labels = [], [], [], []
    for i in range(max(len(s) for s in per_digit)):
        for d in range(10):
            if i >= len(per_digit[d]):
                continue
            if i < n_train:
                train_imgs.append(per_digit[d][i])
                train_labels.append(d)
            else:
                test_imgs.append(per_digit[d][i])
                test_labels.append(d)

    os.makedirs(os.path.join(OUT, "mnist"), exist_ok=True)
    write_idx(os.path.join(OUT, "mnist", "train"), train_imgs, train_labels)
    write_idx(os.path.join(OUT, "mnist", "t10k"), test_imgs, test_labels)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--mnist-src", default=None,
                    help="directory with the npm mnist package's 0.json..9.json")
    args = ap.parse_args()
    os.makedirs(OUT, exist_ok=True)
    make_uci()
    if args.mnist_src:
        make_mnist(args.mnist_src)
