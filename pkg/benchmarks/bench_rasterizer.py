"""Time the compiled rasterizer kernel against the numpy fallback.

Renders a handful of procedural meshes through both backends at a few
resolutions, checks the outputs are bitwise identical, and prints a table
of per-view timings. Run from the repository root:

    python3 benchmarks/bench_rasterizer.py
    python3 benchmarks/bench_rasterizer.py --sizes 96 224 --repeats 5
"""

import argparse
import sys
import time

import numpy as np

from cadmatch.geometry import gen_procedural, generator_classes
from cadmatch.render import RenderConfig, render_views
from cadmatch.render.backend import available_backends


def _normalized(mesh):
    center = mesh.vertices.mean(axis=0)
    radius = np.linalg.norm(mesh.vertices - center, axis=1).max()
    return mesh.transformed(scale=1.0 / radius, offset=-center / radius)


def _time_backend(meshes, size, views, backend, repeats):
    cfg = RenderConfig(width=size, height=size, view_count=views, backend=backend)
    best = float("inf")
    stacks = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        stacks = [render_views(mesh, cfg, seed=0).as_array() for mesh in meshes]
        best = min(best, time.perf_counter() - t0)
    per_view = best / (len(meshes) * views)
    return per_view, np.stack(stacks)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 96, 224])
    parser.add_argument("--views", type=int, default=4)
    parser.add_argument("--meshes", type=int, default=4,
                        help="number of procedural classes to render")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats; the best run counts")
    args = parser.parse_args(argv)

    backends = available_backends()
    if backends == ["python"]:
        print("compiled kernel not built; timing the fallback only", file=sys.stderr)

    classes = generator_classes()[: args.meshes]
    meshes = [_normalized(gen_procedural(name, seed=7)) for name in classes]
    print(f"meshes: {', '.join(classes)} | {args.views} views | best of {args.repeats}")
    print(f"{'size':>6} " + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")

    for size in args.sizes:
        row = {}
        pixels = {}
        for backend in backends:
            per_view, stack = _time_backend(
                meshes, size, args.views, backend, args.repeats
            )
            row[backend] = per_view
            pixels[backend] = stack
        if len(backends) == 2:
            if not np.array_equal(pixels["compiled"], pixels["python"]):
                print("backends disagree!", file=sys.stderr)
                return 1
            speedup = f"{row['python'] / row['compiled']:9.1f}x"
        else:
            speedup = f"{'n/a':>10}"
        cells = "".join(f"{row[b] * 1e3:11.2f} ms" for b in backends)
        print(f"{size:>6} {cells}{speedup}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
