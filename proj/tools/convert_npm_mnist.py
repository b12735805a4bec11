#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package to IDX.

Only digits 0 and 1 are kept. The first 80% of each digit's samples form the
training split and the remainder the test split.

usage: convert_npm_mnist.py <package/src/digits> <out dir>
"""
import json
import struct
import sys
from pathlib import Path


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    splits = {"train": ([], []), "t10k": ([], [])}
    for digit in (0, 1):
        flat = json.load(open(src / f"{digit}.json"))["data"]
        count = len(flat) // 784
        cut = (count * 4) // 5
        for i in range(count):
            img = [min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784]]
            imgs, labels = splits["train" if i < cut else "t10k"]
            imgs.append(img)
            labels.append(digit)
    for name, (imgs, labels) in splits.items():
        write_images(out / f"{name}-images-idx3-ubyte", imgs)
        write_labels(out / f"{name}-labels-idx1-ubyte", labels)
        print(name, len(imgs))


if __name__ == "__main__":
    main()
