"""Smoke test for the `vlp` extension module.

Build and install it first, e.g. `maturin develop -m crates/python/Cargo.toml --release`,
then run `python python/smoke_test.py`.
"""

import json
import math
import os
import tempfile

import vlp


def main():
    scene = vlp.Scene.reference(20.0)
    assert scene.led_count == 4
    assert math.isclose(scene.pd_plane_z, -0.65)
    assert vlp.Scene.from_toml(scene.to_toml()).content_hash() == scene.content_hash()

    channel = vlp.Channel(scene)
    los = channel.los_gain(0, (-1.25, -1.25, scene.pd_plane_z))
    assert math.isclose(los, 1.44406e-5, rel_tol=1e-4), los
    _, nlos, total, kappa = channel.gain_breakdown(0, (0.0, 0.0, scene.pd_plane_z))
    assert nlos > 0 and kappa > 1 and total > nlos

    truth = (0.6, -0.9, scene.pd_plane_z)
    quiet = scene.with_tx_power(500.0)
    measured = vlp.Channel(quiet).measure_vector(truth, seed=3)
    assert len(measured) == 4

    db = vlp.Database.build(quiet, 10, 10, seed=1)
    assert len(db) == 100 and db.led_count == 4
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "db.txt")
        db.save(path)
        assert vlp.Database.load(path).powers() == db.powers()

    for method in ("fp", "nls", "danls"):
        est = vlp.locate(quiet, measured, method=method, db=db, k=3, seed=7)
        err = math.dist(est["location"], truth)
        print(f"{method:6s} error {err:.3f} m")
        assert err < 1.0, (method, est)
        assert est["stale_database"] is False

    assert math.isclose(vlp.rmse([(3.0, 0, 0), (0, 4.0, 0)], [(0, 0, 0), (0, 0, 0)]), math.sqrt(12.5))

    spec = json.loads(vlp.experiment_spec(scene))
    spec["test_point_count"] = 5
    spec["grids"] = [{"rows": 5, "cols": 5}]
    spec["sweep"] = {"variable": "tx_power", "values": [20.0]}
    spec["pso"]["swarm_size"] = 20
    spec["pso"]["max_iterations"] = 30
    table = vlp.run_experiment(json.dumps(spec), workers=2)
    lines = table.splitlines()
    assert lines[0].startswith("# vlp-results v1"), lines[0]
    assert len(lines) == 2 + 3, table

    try:
        vlp.locate(scene, [1.0, 2.0], method="nls")
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch was accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
