"""Smoke test for the rflow extension module.

Build first with `cargo build -p rflow-py --release`, then run
`python3 python/smoke_test.py`. Set RFLOW_LIB to point at a different
shared library.
"""

import importlib.util
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    if "RFLOW_LIB" in os.environ:
        return Path(os.environ["RFLOW_LIB"])
    for profile in ("release", "debug"):
        for name in ("librflow.so", "librflow.dylib", "rflow.dll"):
            p = ROOT / "target" / profile / name
            if p.exists():
                return p
    sys.exit("rflow library not found; run `cargo build -p rflow-py --release`")


def load(tmp):
    suffix = ".pyd" if sys.platform == "win32" else ".so"
    dst = Path(tmp) / ("rflow" + suffix)
    shutil.copy(find_library(), dst)
    spec = importlib.util.spec_from_file_location("rflow", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    with tempfile.TemporaryDirectory() as tmp:
        rflow = load(tmp)

        circle = rflow.Curve.from_shape('{"kind": "circle", "radius": 1.0}', 512)
        assert len(circle) == 512
        s = circle.kappa_r(0.2)[0]
        assert s.ext_ball_fits and s.int_ball_fits
        assert s.kappa_r == s.kappa
        assert abs(circle.kappa_f(0, 0.2, 0.1) - 0.75) < 1e-6

        thin = rflow.Curve.from_shape('{"kind": "stadium", "half_width": 0.1, "half_length": 0.5}', 400)
        flat = [k for k, (x, y) in zip(thin.kappa_r(0.2), thin.points()) if abs(x) < 0.3]
        assert all(abs(k.kappa_r - 2.5) < 1e-9 for k in flat)

        res = rflow.run_flow([rflow.Curve.from_shape('{"kind": "circle", "radius": 0.3}', 128)], 0.2, 1.0)
        assert [kind for _, kind in res.events] == ["extinction"], res.events

        try:
            rflow.Curve([(0.0, 0.0), (1.0, 0.0)])
        except ValueError:
            pass
        else:
            raise AssertionError("degenerate curve accepted")

        wave = rflow.Wave(2.0)
        assert abs(wave.phi(10.0) - math.sqrt(15.0)) < 1e-6
        assert 0.0 < wave.x_r < 2.0
        rep = json.loads(wave.report())
        assert rep["vb1_residual"] <= 1e-3

        out = Path(tmp) / "circle"
        run = json.loads(rflow.run_scenario(str(ROOT / "scenarios" / "circle_shrink.json"), str(out)))
        assert all((out / f).exists() for f in run["files"])

        rows = rflow.reproduce(["predicates"])
        assert [r[0] for r in rows] == [3, 12] and all(r[2] for r in rows), rows
    print("python smoke test passed")


if __name__ == "__main__":
    main()
