#!/usr/bin/env python3
"""Smoke test for the equifuller Python extension.

Builds the cdylib with cargo if needed, stages it as an importable module
and exercises the group, index, sweep and criterion entry points.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]


def stage_module() -> Path:
    lib = REPO / "target" / "debug" / "libequifuller.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "equifuller-py"], cwd=REPO, check=True
        )
    stage = Path(tempfile.mkdtemp(prefix="equifuller_py_"))
    shutil.copy2(lib, stage / "equifuller.so")
    return stage


def main() -> int:
    sys.path.insert(0, str(stage_module()))
    import equifuller

    # group theory: Z2 lattice and marks
    g = equifuller.Group.cyclic(2)
    assert g.order() == 2
    assert g.class_names() == ["(G)", "(e)"]
    assert g.marks() == [[1, 0], [1, 2]]
    assert g.weyl_orders() == [1, 2]

    s3 = equifuller.Group.symmetric(3)
    assert s3.order() == 6 and len(s3.class_names()) == 4

    assert "hopf_z2" in equifuller.builtin_systems()

    # Fuller index of the antipodally symmetric Hopf normal form: 1*(e)
    cfg = json.dumps(
        {
            "system": "hopf_z2",
            "window": [4.0, 8.0],
            "numerics": {"n_random_seeds": 8, "n_period_seeds": 4},
        }
    )
    report = equifuller.index(cfg, seed=1)
    assert report["index"] == {"(e)": "1/1"}, report["index"]
    (orbit,) = report["contributions"]
    assert abs(orbit["period"] - 6.283185307) < 1e-6
    assert orbit["multiplicity"] == 1

    # determinism under a fixed seed
    assert equifuller.index(cfg, seed=1) == report

    # parameter sweep of the radial family: constant trace, no events
    sweep_cfg = json.dumps(
        {
            "system": "hopf_param",
            "sweep": {"range": [0.5, 1.5], "n_grid": 7},
            "numerics": {"n_random_seeds": 6, "n_period_seeds": 3},
        }
    )
    sw = equifuller.sweep(sweep_cfg)
    assert sw["invariant"] and not sw["events"]
    indices = {json.dumps(p["index"], sort_keys=True) for p in sw["trace"]}
    assert indices == {'{"(e)": "1/1"}'}, indices
    assert Fraction(sw["trace"][0]["index"]["(e)"]) == 1

    # non-degeneracy criteria
    assert equifuller.check_z2(1.0, [1.0], [0.0]) == "nondeg_via_parameter"
    assert equifuller.check_z2(1.0, [], []) == "degenerate"
    assert equifuller.check_z2(2.0, [], []) == "nondeg_via_h_ne_1"
    assert equifuller.check_s1(1.0, [0.0], 0.0, [0.0], [0.0]) == "degenerate"
    assert (
        equifuller.check_s1(1.0, [1.0, 0.0], 0.0, [0.0, 1.0], [0.0, 0.0])
        == "nondeg_via_rank2"
    )
    assert equifuller.check_s1(0.5, [], 0.0, [], []) == "nondeg_via_linearization"

    # config errors surface as ValueError
    try:
        equifuller.index("{\"system\": \"no_such_system\"}")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError for unknown system")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
