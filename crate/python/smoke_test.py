"""Smoke test for the `lowrank` extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
or copy the cdylib next to this script as `lowrank.so`; see the README.
"""

import numpy as np

import lowrank


def main():
    rng = np.random.default_rng(0)

    m = rng.standard_normal((12, 9))
    u, _, vt = np.linalg.svd(m, full_matrices=False)
    s = lowrank.msgn(m)
    assert np.allclose(s, u @ vt, atol=1e-10)
    assert abs(lowrank.nuclear_norm(m) - np.sum(np.linalg.svd(m, compute_uv=False))) < 1e-9

    low = rng.standard_normal((30, 3)) @ rng.standard_normal((3, 20))
    sign = lowrank.sketch_sign(low, rank=5, seed=1)
    assert sign.q.shape[0] == 30 and sign.rank_used == 3
    assert np.allclose(sign.materialize(), lowrank.msgn(low), atol=1e-8)

    guarded = lowrank.safeguarded_sketch(low, delta=1e-6, r0=1, seed=2)
    assert guarded.residual <= 1e-6

    assert lowrank.schedule("muon", 15, alpha=2.0) == (0.125, 0.25, 0.5)

    ns = lowrank.newton_schulz(m, steps=40)
    assert np.linalg.norm(ns - s) < 1e-6

    inst = lowrank.RegressionInstance(10, 3, seed=0)
    x = np.zeros(inst.shape)
    g = inst.gradient(x)
    h = 1e-6
    e = np.zeros_like(x)
    e[2, 4] = 1.0
    fd = (inst.objective(x + h * e) - inst.objective(x - h * e)) / (2 * h)
    assert abs(fd - g[2, 4]) <= 1e-4 * max(1.0, abs(g[2, 4]))

    opt = lowrank.Optimizer("lr-muon", 10, seed=0, rank=3)
    for _ in range(20):
        x, rank_used, _ = opt.step(x, inst.gradient(x))
    assert inst.objective(x) < inst.objective(np.zeros(inst.shape))

    log = lowrank.run_regression("muon", inst, iters=20)
    assert log["status"] == "completed" and len(log["f"]) == 21

    try:
        lowrank.Optimizer("no-such-method", 10)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("lowrank", lowrank.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
