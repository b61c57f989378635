#!/usr/bin/env python3
"""Write a USPS-format stand-in built from scikit-learn's 8x8 digits.

The images are upsampled to 16x16 and scaled to [-1, 1]; labels use 10 for
digit 0 as USPS does. Useful for exercising the full pipeline and timing runs
when the real files are unavailable. Accuracies on it say nothing about USPS.
"""

import argparse
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split


def write_split(path: Path, images: np.ndarray, labels: np.ndarray) -> None:
    with path.open("w") as f:
        for img, label in zip(images, labels):
            values = " ".join(f"{k + 1}:{v:.6f}" for k, v in enumerate(img.ravel()))
            f.write(f"{10 if label == 0 else label} {values}\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    digits = load_digits()
    images = np.stack([zoom(img / 16.0, 2, order=1) for img in digits.images])
    images = np.clip(images, 0.0, 1.0) * 2.0 - 1.0
    x_train, x_test, y_train, y_test = train_test_split(
        images, digits.target, test_size=0.25, random_state=args.seed, stratify=digits.target)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_split(args.out_dir / "usps", x_train, y_train)
    write_split(args.out_dir / "usps.t", x_test, y_test)


if __name__ == "__main__":
    main()
