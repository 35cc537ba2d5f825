"""Regenerate the PGM sample corpus under data/ from scikit-image's bundled images.

All source images are CC0 / public domain (see data/README.md).
"""
import pathlib

import numpy as np
import skimage.data
from skimage.color import rgb2gray

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"

TEST = ["camera"]
TRAIN = ["astronaut", "chelsea", "coffee", "coins", "moon", "grass"]


def to_gray_u8(img):
    if img.ndim == 3:
        img = np.rint(rgb2gray(img[..., :3]) * 255.0)
    return np.clip(img, 0, 255).astype(np.uint8)


def write_pgm(path, img):
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())


def main():
    for subdir, names in (("test", TEST), ("train", TRAIN)):
        out = ROOT / subdir
        out.mkdir(parents=True, exist_ok=True)
        for name in names:
            write_pgm(out / f"{name}.pgm", to_gray_u8(getattr(skimage.data, name)()))


if __name__ == "__main__":
    main()
