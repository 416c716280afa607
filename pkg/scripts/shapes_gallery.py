"""Write a contact sheet of synthetic shapes with their object masks outlined."""
import argparse

import numpy as np
from scipy.ndimage import binary_erosion

from armaps import render
from armaps.shapes import make_shapes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="shapes_gallery.png")
    ap.add_argument("--count", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    data, masks = make_shapes(args.count, 64, args.seed)
    tiles = []
    for img, m in zip(data.images, masks):
        rgb = np.repeat(img[0][..., None], 3, axis=2)
        edge = m & ~binary_erosion(m)
        rgb[edge] = [1.0, 0.0, 0.0]
        tiles.append(rgb)
    render.write_image(render.panel(tiles, 4), args.out)
    print(" ".join(data.class_names[k] for k in data.labels))


if __name__ == "__main__":
    main()
