"""Smoke test for the trajspace_py extension.

Build first with `cargo build -p trajspace-py` (or `--release`). The script
imports an installed `trajspace_py` if there is one, otherwise it loads the
freshly built library from target/.
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
SCENES = ROOT / "scenes"


def load_module():
    try:
        import trajspace_py

        return trajspace_py
    except ImportError:
        pass
    candidates = []
    for profile in ("release", "debug"):
        for name in ("libtrajspace_py.so", "libtrajspace_py.dylib", "trajspace_py.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                candidates.append(path)
    if not candidates:
        sys.exit("trajspace_py not built; run `cargo build -p trajspace-py` first")
    newest = max(candidates, key=lambda p: p.stat().st_mtime)
    suffix = ".pyd" if newest.suffix == ".dll" else ".so"
    target = Path(tempfile.mkdtemp()) / f"trajspace_py{suffix}"
    shutil.copy(newest, target)
    spec = importlib.util.spec_from_file_location("trajspace_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    ts = load_module()

    e = ts.Expression("x0^2 + x1^2 - 1", 2)
    assert e.eval([1.0, 0.0]) == 0.0
    assert str(e.differentiate(1).simplify()) == "2.0 * x1"

    disk = ts.Scene.from_path(str(SCENES / "disk.json"))
    assert disk.dimension == 2
    assert disk.validate()["passed"]
    assert disk.lie_tower(2)[1:] == ["2.0 * x1", "2.0"]

    rec = disk.trace([0.5, 0.0])
    assert rec["omega"] == [1, 1]
    h = math.sqrt(0.75)
    assert abs(rec["divisor"]["contacts"][1]["coords"][1] - h) < 1e-9

    point = disk.classify([1.0, 0.0])
    assert (point["multiplicity"], point["side"]) == (2, 1)

    annulus = ts.Scene.from_path(str(SCENES / "annulus.json"))
    cx = annulus.complex()
    assert (cx["vertices"], cx["edges"], cx["betti"]) == (4, 4, [1, 1])
    assert cx["fibers"]["max_fiber"] == 3

    data = disk.extract_boundary_data(64)
    rec = ts.reconstruct(data)
    assert rec["model"]["betti"] == [1, 0]
    report = ts.verify(disk, data, probes=500)
    assert report["interior_acceptance"] == 1.0 and report["class_count_match"]

    corrupt = json.loads(data)
    corrupt["relations"][0].reverse()
    try:
        ts.reconstruct(json.dumps(corrupt))
        raise AssertionError("corrupted data accepted")
    except ts.OrderViolation:
        pass

    rt = ts.roundtrip([1, 2, 1])
    assert rt["passed"] and rt["recovered"] == [1, 2, 1]

    try:
        ts.Expression("((x0", 2)
        raise AssertionError("syntax error not raised")
    except ValueError:
        pass

    with open(os.devnull, "w") as sink:
        saved = os.dup(1)
        os.dup2(sink.fileno(), 1)
        try:
            code = ts.run_cli(["validate", str(SCENES / "disk_nonlyapunov.json")])
        finally:
            os.dup2(saved, 1)
    assert code == 1

    print("smoke test passed")


if __name__ == "__main__":
    main()
