#!/usr/bin/env python3
"""Smoke test for the linkcast_py extension module.

Builds are looked up in target/{release,debug}; run
    cargo build -p linkcast-py [--release]
first, then
    python3 python/smoke_test.py
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "liblinkcast_py.so",
        ROOT / "target" / "debug" / "liblinkcast_py.so",
        ROOT / "target" / "release" / "liblinkcast_py.dylib",
        ROOT / "target" / "debug" / "liblinkcast_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("liblinkcast_py not found; run `cargo build -p linkcast-py` first")
    tmp = Path(tempfile.mkdtemp(prefix="linkcast-py-"))
    target = tmp / ("linkcast_py" + built.suffix.replace(".dylib", ".so"))
    shutil.copyfile(built, target)
    sys.path.insert(0, str(tmp))
    import linkcast_py

    return linkcast_py


def main():
    lc = load_module()

    # rmse: hand values
    assert lc.rmse([2.0, 4.0], [1.0, 3.0]) == 1.0
    expected = math.sqrt(25.0 / 3.0)
    assert abs(lc.rmse([0.0, 0.0, 0.0], [3.0, 4.0, 0.0]) - expected) < 1e-12
    try:
        lc.rmse([1.0], [1.0, 2.0])
        raise AssertionError("length mismatch should raise")
    except ValueError:
        pass

    # generator: shape, bounds, determinism
    a = lc.generate_series(7, "L1", 96)
    b = lc.generate_series(7, "L1", 96)
    c = lc.generate_series(7, "L2", 96)
    assert len(a) == 96 and a == b and a != c
    assert all(5.0 <= v <= 120.0 for v in a)
    flat = lc.generate_series(7, "L1", 48, shock_sd=0.0, daily_profile=False)
    assert flat == [60.0] * 48

    # smoothing models: constant series stays constant; alignment matches
    m = lc.Model("ASNT:alpha=0.5,gamma=0.1,s=24,h=1")
    first_bin, forecasts = m.forecast([50.0] * 60)
    assert first_bin == 24
    assert all(abs(f - 50.0) < 1e-9 for f in forecasts)
    nsnt = lc.Model("NSNT:alpha=0.9")
    fb, fc = nsnt.forecast([40.0, 50.0, 50.0])
    assert fb == 1 and abs(fc[0] - 40.0) < 1e-12 and abs(fc[1] - 49.0) < 1e-12
    adaptive = lc.Model("ADAPTIVE:beta=0.2")
    fb, fc = adaptive.forecast([50.0, 55.0, 47.0])
    assert fb == 1 and fc == [50.0, 51.0]

    # grid search: exhaustive table sizes
    series = lc.generate_series(3, "L0", 10 * 24)
    g = lc.grid_search(series, "NSNT", 144, 240)
    assert g["table_size"] == 9
    assert 0.1 <= g["best"]["alpha"] <= 0.9 and g["best"]["beta"] is None
    g2 = lc.grid_search(series, "ASNT", 144, 240)
    assert g2["table_size"] == 81

    # trajectory simulation: observed series cover all 24 grid links
    obs = lc.simulate_observed(5, 20.0, 48)
    assert len(obs) == 24
    assert all(len(v) == 48 for v in obs.values())

    # reduced end-to-end benchmark: finite, reproducible
    kwargs = dict(bins=10 * 24, scenarios=[20.0], models=["NSNT", "ASNT", "MLR"], nn_epochs=20)
    r1 = lc.run_benchmark([11], **kwargs)
    r2 = lc.run_benchmark([11], **kwargs)
    assert r1["models"] == ["NSNT", "ASNT", "MLR"]
    assert r1["mean_rmse"] == r2["mean_rmse"]
    assert all(math.isfinite(v) for row in r1["mean_rmse"] for v in row)
    assert "ASNT" in r1["per_seed"][11]["best_params"]

    print("smoke test passed")


if __name__ == "__main__":
    main()
