"""Smoke test for the pymatchci extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
Then run:                 python python/smoke_test.py
"""

import math

import pymatchci as m


def three_identities():
    rows = [("1", "a", "1", "b", 0.1), ("2", "a", "2", "b", 0.1), ("3", "a", "3", "b", 0.1)]
    for x, y, s in [("1", "2", 0.2), ("1", "3", 0.9), ("2", "3", 0.9)]:
        for ia in "ab":
            for ib in "ab":
                rows.append((x, ia, y, ib, s))
    return m.Dataset.from_scores(rows)


def main():
    ds = three_identities()
    assert len(ds) == 3 and ds.instance_counts == [2, 2, 2]

    est = m.estimate(ds, 0.5)
    assert est["frr"]["value"] == 0.0
    assert abs(est["far"]["value"] - 1 / 3) < 1e-15

    z = 1.959963984540054
    lo, hi = m.wilson_bounds(0.0, 50.0, 0.05)
    assert lo == 0.0 and abs(hi - z * z / (50 + z * z)) < 1e-12

    syn = m.Dataset.synthetic(g=30, m=4, dim=32, seed=3)
    est = m.estimate(syn, 1.3)
    w = m.wilson_interval(syn, 1.3, "far")
    assert w["lower"] <= est["far"]["value"] <= w["upper"]
    b1 = m.bootstrap_interval(syn, 1.3, "far", scheme="don", b=500, seed=7)
    b2 = m.bootstrap_interval(syn, 1.3, "far", scheme="don", b=500, seed=7)
    assert b1 == b2 and b1["lower"] <= b1["upper"]

    thresholds, frr, far = m.empirical_roc(syn)
    assert math.isinf(thresholds[0]) and far[-1] == 1.0
    r = m.roc_interval(syn, 0.01)
    assert r["alpha_far"] == 0.05 and 0.0 <= r["interval"]["lower"] <= r["interval"]["upper"] <= 1.0

    plan = m.plan_protocol([("1", 1), ("2", 1), ("3", 1), ("4", 1), ("5", 3)], 2)
    first = plan["selections"][0]
    assert "5" in (first["id_a"], first["id_b"])

    rep = m.simulate("far=1e-2", ["wilson", "naive-wilson"], g=20, m=3, replications=20, seed=1)
    assert {x["method"] for x in rep["methods"]} == {"wilson", "naive-wilson"}

    try:
        m.plan_protocol([("1", 1), ("2", 1)], 0)
    except ValueError:
        pass
    else:
        raise AssertionError("budget 0 accepted")

    print("pymatchci", m.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
