#!/usr/bin/env python3
"""Regenerates the reference-resizer fixtures in tests/data using Pillow.

Run from the repository root: python3 tools/make_fixtures.py
"""
from pathlib import Path

from PIL import Image

OUT = Path(__file__).resolve().parent.parent / "tests" / "data"


def checkerboard(w, h, cell):
    img = Image.new("RGB", (w, h))
    px = img.load()
    for y in range(h):
        for x in range(w):
            on = ((x // cell) + (y // cell)) % 2
            px[x, y] = (255, 40, 0) if on else (10, 90, 230)
    return img


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    src = checkerboard(97, 97, 3)
    src.save(OUT / "checker_97.png")
    for size in (64, 40, 150):
        src.resize((size, size), Image.BILINEAR).save(OUT / f"checker_97_to_{size}.png")

    # Non-square input: center crop to the short side, then resize.
    wide = checkerboard(120, 90, 5)
    wide.save(OUT / "checker_120x90.png")
    left = (120 - 90) // 2
    wide.crop((left, 0, left + 90, 90)).resize((64, 64), Image.BILINEAR).save(
        OUT / "checker_120x90_prep_64.png")

    # Decoder coverage: baseline JPEG, grayscale and RGBA PNG.
    Image.new("RGB", (8, 6), (255, 255, 255)).save(OUT / "white_8x6.jpg", quality=95)
    checkerboard(16, 16, 4).save(OUT / "checker_16.jpg", quality=95)
    gray = Image.new("L", (5, 4))
    gray.putdata([i * 12 for i in range(20)])
    gray.save(OUT / "gray_5x4.png")
    Image.new("RGBA", (4, 4), (200, 100, 50, 255)).save(OUT / "rgba_4x4.png")


if __name__ == "__main__":
    main()
