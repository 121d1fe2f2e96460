"""Compare the compiled and NumPy flow kernels.

Run ``python3 benchmarks/bench_kernels.py`` after an editable install.
Times the pointwise speed kernel alone and one full RK4 step with each
backend, and checks that both give the same numbers.
"""

import argparse
import json
import timeit

import numpy as np

from imcflab import _kernels_py, kernels
from imcflab.flow import FlowState, step
from imcflab.geometry import GraphSurface
from imcflab.sphere import SphereField, SphereGrid

try:
    from imcflab import _kernels as _compiled
except ImportError:
    _compiled = None


def _surface(grid):
    P2 = SphereField.from_function(grid, lambda th, ph: 1.5 * np.cos(th) ** 2 - 0.5)
    return GraphSurface.from_field(SphereField.constant(grid, 3.0) + 0.15 * P2)


def _best(func, repeat):
    return min(timeit.repeat(func, number=1, repeat=repeat))


def bench(grid, repeat):
    surface = _surface(grid)
    jet = grid.jet(surface.coeffs, order=2)
    d = grid.dim
    args = (
        np.ascontiguousarray(jet.u).reshape(-1),
        np.ascontiguousarray(jet.du).reshape(-1, d),
        np.ascontiguousarray(jet.d2u).reshape(-1, d, d),
        grid.n,
    )
    row = {"grid": repr(grid), "nodes": grid.size}
    impls = {"python": _kernels_py}
    if _compiled is not None:
        impls["cython"] = _compiled
    outs = {}
    saved = kernels._impl
    try:
        for name, mod in impls.items():
            row[f"kernel_{name}_ms"] = 1e3 * _best(lambda: mod.imcf_speed(*args), repeat)
            outs[name] = mod.imcf_speed(*args)
            kernels._impl = mod
            state = FlowState(0.0, surface)
            row[f"step_{name}_ms"] = 1e3 * _best(lambda: step(state, 0.01), max(3, repeat // 5))
    finally:
        kernels._impl = saved
    if "cython" in outs:
        row["max_abs_diff"] = float(max(np.abs(a - b).max() for a, b in zip(outs["python"], outs["cython"])))
        row["kernel_speedup"] = row["kernel_python_ms"] / row["kernel_cython_ms"]
        row["step_speedup"] = row["step_python_ms"] / row["step_cython_ms"]
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lmax", type=int, nargs="*", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", action="store_true", help="print JSON rows instead of a table")
    args = ap.parse_args(argv)
    rows = [bench(SphereGrid.full(L), args.repeat) for L in args.lmax]
    rows.append(bench(SphereGrid.polar(4, 256), args.repeat))
    if args.json:
        print(json.dumps(rows, indent=2))
        return rows
    if _compiled is None:
        print("compiled extension not built; only the NumPy backend was timed")
    for r in rows:
        line = f"{r['grid']:<45} nodes={r['nodes']:>6}  kernel py {r['kernel_python_ms']:8.3f} ms"
        if "kernel_cython_ms" in r:
            line += (
                f"  cy {r['kernel_cython_ms']:8.3f} ms (x{r['kernel_speedup']:.1f})"
                f"  step py {r['step_python_ms']:8.2f} ms  cy {r['step_cython_ms']:8.2f} ms"
                f"  diff {r['max_abs_diff']:.1e}"
            )
        print(line)
    return rows


if __name__ == "__main__":
    main()
