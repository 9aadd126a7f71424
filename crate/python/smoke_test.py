"""Smoke test for the pycmclab extension.

Uses an installed ``pycmclab`` if there is one, otherwise the library from
``cargo build -p cmclab-python --features extension-module``.
"""

import importlib
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def load_module():
    try:
        return importlib.import_module("pycmclab")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpycmclab.so", "libpycmclab.dylib", "pycmclab.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                tmp = pathlib.Path(tempfile.mkdtemp())
                suffix = ".pyd" if name.endswith(".dll") else ".so"
                shutil.copy(lib, tmp / f"pycmclab{suffix}")
                sys.path.insert(0, str(tmp))
                return importlib.import_module("pycmclab")
    sys.exit("pycmclab not found: build it with `cargo build -p cmclab-python --features extension-module`")


def main():
    cm = load_module()

    sc = cm.Scenario.load(str(SCENARIOS / "two_state.json"))
    assert sc.states == 2 and len(sc.nodes()) == sc.steps + 1
    assert len(sc.hash()) == 64

    ens = cm.simulate(sc, 5000, 7)
    assert len(ens) == 5000
    stats = ens.weight_stats()
    assert abs(stats["mean"] - 1.0) < 4 * stats["se"], stats
    marginal = ens.marginal(sc.horizon)
    assert abs(sum(marginal) - stats["mean"]) < 1e-12

    p = cm.transition_matrix(sc, 3, 0.0, sc.horizon)
    assert all(abs(sum(row) - 1.0) < 1e-9 for row in p)
    field = cm.field_report(sc, 3, 0.0, sc.horizon)
    assert field["routes"]["pass"] and field["invariants"]["inverse_error"] < 1e-9

    good = cm.diagnose(sc, ens, "m,l")
    bad = cm.diagnose(sc, ens, "m,l", intensity_scale=2.0)
    assert good["pass"] and not bad["pass"]

    const = cm.Scenario.load(str(SCENARIOS / "constant_symmetric.json"))
    p11 = cm.transition_matrix(const, 0, 0.0, 1.0)[0][0]
    assert abs(p11 - (1 + math.exp(-2)) / 2) < 1e-9, p11

    report = cm.oracle(str(SCENARIOS / "discrete" / "last_bit.json"))
    assert report["pass"], report
    planted = cm.oracle(str(SCENARIOS / "discrete" / "planted" / "chain_memory.json"))
    assert not planted["pass"]

    for call in (lambda: cm.transition_matrix(sc, 3, 0.05, 1.0), lambda: cm.diagnose(sc, ens, "")):
        try:
            call()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print(f"pycmclab {cm.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
