"""Smoke test for the relaysim Python extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math

import relaysim

TINY = """
deployment.tiers = 1
deployment.idle_per_sector = 10
run.warmup_subframes = 50
run.subframes = 100
"""


def main():
    assert relaysim.pathloss_wan(100.0) == 110.5
    assert abs(relaysim.ul_tx_power(100.0) - 16.99) < 0.01
    assert relaysim.pathloss_d2d(10.0) < relaysim.pathloss_d2d(100.0)
    assert "run.seed" in relaysim.config_keys()
    assert "run.mode" in relaysim.default_config()

    a = relaysim.run(mode="relay", seed=3, config=TINY)
    b = relaysim.run(mode="relay", seed=3, config=TINY)
    assert a == b or all(
        a[k] == b[k] or (isinstance(a[k], float) and math.isnan(a[k]) and math.isnan(b[k])) for k in a
    )
    assert a["max_sinr_db"] <= 25.0
    assert 0.0 <= a["dl_relayed_fraction"] <= 1.0
    assert a["dl_rate_p50_bps"] > 0.0

    snap = relaysim.run(mode="snapshot", config=TINY + "run.snapshot_subframes = 50\n")
    assert snap["mean_nearest_distance_m"] > 0.0

    try:
        relaysim.run(mode="sideways")
    except ValueError:
        pass
    else:
        raise AssertionError("bad mode accepted")

    print("relaysim smoke test passed")


if __name__ == "__main__":
    main()
