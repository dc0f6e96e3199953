"""Image quality of 3x3 convolutions run on the approximate compressor.

    python3 demos/conv_quality.py
"""

import numpy as np

from fermisim.compressor import approximate_spec
from fermisim.nn_mapper import conv_demo


def test_image(n=64):
    y, x = np.mgrid[0:n, 0:n]
    img = 128 + 80 * np.sin(x / 6.0) * np.cos(y / 9.0)
    img[n // 4:n // 2, n // 4:3 * n // 4] = 230  # a bright block with hard edges
    return np.clip(img, 0, 255).astype(np.int64)


def main():
    rng = np.random.default_rng(0)
    images = {"synthetic": test_image(), "noise": rng.integers(0, 256, (64, 64))}
    spec = approximate_spec()
    for half in (False, True):
        cols = "half" if half else None
        print(f"\napproximate columns: {'low half' if half else 'all'}")
        for name, img in images.items():
            for kernel in ("smoothing", "edge"):
                r = conv_demo(img, kernel, spec, approx_columns=cols)
                print(f"  {name:9} {kernel:9} PSNR {r.psnr_db:6.2f} dB {r.note}")


if __name__ == "__main__":
    main()
