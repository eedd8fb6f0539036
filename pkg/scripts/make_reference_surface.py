#!/usr/bin/env python3
"""Regenerate the bundled reference terrain surface JSON.

The terrain is a deterministic analytic height field (two smooth bumps
on a long swell) sampled onto a 10x10 cubic b-spline control grid over
[-12, 12]^2. Gentle slopes keep the chart assumptions comfortable while
still exercising the full 3-D geometry.
"""

import argparse
from pathlib import Path

import numpy as np

from meskf.surface import save_surface, surface_from_grid

EXTENT = 12.0
GRID = 10


def control_height(u, v):
    swell = 0.8 * np.sin(u / 5.0) * np.cos(v / 6.0)
    bump = 0.5 * np.exp(-((u - 4.0) ** 2 + (v + 3.0) ** 2) / 30.0)
    dip = -0.4 * np.exp(-((u + 5.0) ** 2 + (v - 5.0) ** 2) / 40.0)
    return swell + bump + dip


def build_surface():
    axis = np.linspace(-EXTENT, EXTENT, GRID)
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    return surface_from_grid(control_height(uu, vv),
                             (-EXTENT, EXTENT), (-EXTENT, EXTENT), degree=3)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(
        Path(__file__).resolve().parent.parent
        / "scenarios" / "reference_surface.json"))
    args = parser.parse_args()
    surface = build_surface()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_surface(surface, args.out)
    pts = np.column_stack([np.random.Generator(np.random.Philox(key=np.array(
        [0, 1], dtype=np.uint64))).uniform(-EXTENT, EXTENT, (4000, 2))])
    g = surface.gradient_many(pts)
    z = surface.elevation_many(pts)
    print(f"wrote {args.out}")
    print(f"elevation range [{z.min():.3f}, {z.max():.3f}] m, "
          f"max slope {np.linalg.norm(g, axis=1).max():.3f}")


if __name__ == "__main__":
    main()
