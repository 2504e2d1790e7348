"""Smoke test for the mqwalk_py extension module.

Build and install first, e.g. ``pip install --no-build-isolation -e crates/python``
(maturin must be installed), then run ``python crates/python/python/smoke_test.py``.
"""

import cmath
import json
import math
import os
import tempfile

import mqwalk_py as mq


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    loc = mq.SpectralModel.linear("localized", 10)
    pw = mq.SpectralModel.linear("plane_wave", 10)
    assert loc.n == 10 and loc.energies[:3] == [0.0, 1.0, 2.0]

    for k in range(2, 11):
        assert close(loc.ipr(k), mq.ipr_localized_closed_form(10, k), 1e-12)
    assert all(close(pw.ipr(k), 0.1, 1e-12) for k in range(1, 11))

    avg = mq.averaged_matrix(loc)
    assert close(avg[1][9], 0.02, 1e-12)
    assert all(close(sum(row), 1.0, 1e-10) for row in avg)

    routes = {
        method: mq.amplitudes(loc, 5, 2, 1.0, 6, method)
        for method in ("matrix_power", "projected", "recursion", "path_sum")
    }
    ref = routes["matrix_power"]
    for method, values in routes.items():
        assert max(abs(a - b) for a, b in zip(ref, values)) <= 1e-10, method

    ev = mq.eigenvalues(loc, 5, 1.0)
    assert max(abs(z) for z in ev) <= 1 + 1e-10
    assert mq.resolvent_pole_residual(loc, 5, 1.0, ev[0]) <= 1e-8

    assert mq.detect_eos(loc, 5) == [2, 3, 4]
    assert mq.stationary_states(loc, 5, math.pi) == [3]
    assert mq.equivalence_classes(loc, 5, 1.0)[0] == [1, 2, 3, 4]

    grid = mq.probability_map(loc, 1.0, 500)
    assert all(close(grid[i][i], 1.0, 1e-3) for i in range(10))
    stats = mq.transition_stats(pw, 5, 5, 1.0, 500)
    assert stats["mf"] is not None and stats["mtt"][-1] > 0
    assert mq.mtt_matrix(mq.SpectralModel.linear("identity", 3), 0.5, 4)[1][2] is None

    ident = mq.SpectralModel([0.0, 1.0], [[1, 0], [0, 1]])
    assert close(mq.amplitudes(ident, 2, 2, 0.5, 1)[0], cmath.exp(-0.5j), 1e-15)

    try:
        mq.SpectralModel([0.0, 1.0], [[1, 0.5], [0, 1]])
    except mq.MqwalkError as e:
        assert "residual" in str(e)
    else:
        raise AssertionError("non-orthonormal basis accepted")

    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "c.json")
        with open(cfg, "w") as f:
            json.dump({"n": 6, "basis": "localized", "spectrum": {"linear": 1},
                       "j_tau": [1, "pi/2"], "m_max": 100,
                       "outputs": [{"kind": "probability_map", "path": "map.csv"}]}, f)
        report = mq.run_config(cfg, out_dir=tmp, verify=True)
        assert len(report["outputs"]) == 2
        assert all(passed for _, _, passed in report["checks"])

    print("smoke test ok (mqwalk_py %s)" % mq.__version__)


if __name__ == "__main__":
    main()
