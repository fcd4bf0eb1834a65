#!/usr/bin/env python3
"""Smoke test for the anonle_py extension module.

Build the module first, then run this script from the repository root:

    cargo build -p anonle-py
    python3 python/smoke_test.py

The script copies the built cdylib next to a temporary directory under the
name Python expects (anonle_py.so), imports it, and exercises each exported
entry point once.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libanonle_py.so", "libanonle_py.dylib", "anonle_py.dll")
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit("anonle_py cdylib not found; run `cargo build -p anonle-py` first")


def main() -> None:
    cdylib = locate_cdylib()
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy2(cdylib, Path(tmp) / "anonle_py.so")
        sys.path.insert(0, tmp)
        import anonle_py

        # --- topology constructors -------------------------------------
        ring5 = anonle_py.Topology.ring(5)
        assert ring5.n == 5 and len(ring5.edges) == 5 and not ring5.directed
        k4 = anonle_py.Topology.complete(4)
        assert k4.n == 4 and len(k4.edges) == 6
        dc4 = anonle_py.Topology.directed_cycle(4)
        assert dc4.directed
        custom = anonle_py.Topology.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        assert custom.n == 3
        print(f"ok topology constructors: {ring5!r}")

        # --- election: exact count, quantum round one only --------------
        res = anonle_py.run_election(ring5, protocol="alg2", seed=3)
        assert res.outcomes.count("leader") == 1, res.outcomes
        assert res.leader is not None
        assert res.qubits_moved == 2 * len(ring5.edges) * math.ceil(math.log2(ring5.n))
        print(f"ok alg2 on ring-5: {res!r}")

        # --- election: known bound -------------------------------------
        res = anonle_py.run_election(k4, protocol="alg1", seed=1)
        assert res.outcomes.count("leader") == 1, res.outcomes
        assert res.rounds == 3 * (k4.n - 1) ** 2
        print(f"ok alg1 on complete-4: {res!r}")

        # --- election: directed network ---------------------------------
        res = anonle_py.run_election(dc4, protocol="alg2", seed=2)
        assert res.outcomes.count("leader") == 1, res.outcomes
        print(f"ok alg2 on directed cycle-4: {res!r}")

        # --- election: bound only, racing all counts --------------------
        res = anonle_py.run_election(ring5, protocol="alg2-generalized", seed=4, bound=8)
        assert res.outcomes.count("leader") == 1, res.outcomes
        assert all(w == 5 for w in res.winners), res.winners
        print(f"ok alg2-generalized on ring-5 (bound 8): {res!r}")

        # --- determinism -------------------------------------------------
        a = anonle_py.run_election(ring5, protocol="alg2", seed=7)
        b = anonle_py.run_election(ring5, protocol="alg2", seed=7)
        assert a.outcomes == b.outcomes and a.rounds == b.rounds
        print("ok identical seeds give identical runs")

        # --- gate access --------------------------------------------------
        u2 = anonle_py.gate_matrix("u", 2)
        s = 1 / math.sqrt(2)
        assert abs(u2[0][0] - s) < 1e-12
        assert abs(u2[0][1] - (-1j * s)) < 1e-12
        assert abs(u2[1][0] - (-1j * s)) < 1e-12
        assert abs(u2[1][1] - s) < 1e-12
        w2 = anonle_py.gate_matrix("w", 2)
        assert abs(w2[1][1] - 1j) < 1e-12
        v3 = anonle_py.gate_matrix("v", 3)
        assert len(v3) == 4 and abs(v3[3][1] - 1) < 1e-12
        print("ok gate matrices match their pinned values")

        # --- view classes ---------------------------------------------------
        # On a directed cycle the port numbering is forced, so uniform labels
        # leave every party's view identical; on other networks the random
        # port numbers themselves may break symmetry, as views include them.
        assert anonle_py.view_classes(dc4, [0, 0, 0, 0]) == 1
        assert anonle_py.view_classes(dc4, [1, 0, 0, 0]) == 4
        assert anonle_py.view_classes(ring5, [0, 1, 2, 3, 4]) == 5
        print("ok view-class counting")

        print("SMOKE TEST PASSED")


if __name__ == "__main__":
    main()
