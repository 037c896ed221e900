"""The built-in invariant suite and the randomized identity oracles."""

import numpy as np

from schroinv.grid import SpaceTimeGrid
from schroinv.verify import (
    check_b_identity_oracle,
    check_q_identity_oracle,
    random_interior_vector,
    random_smooth_potential,
    run_verify,
)


def test_random_potential_vanishes_on_boundary():
    g = SpaceTimeGrid((17, 17), 16)
    rng = np.random.default_rng(0)
    q = random_smooth_potential(g, rng)
    assert np.max(np.abs(q.values[:, 0, :])) == 0.0
    assert np.max(np.abs(q.values[:, -1, :])) == 0.0
    assert np.max(np.abs(q.values[:, :, 0])) == 0.0
    assert np.max(np.abs(q.values[:, :, -1])) == 0.0


def test_random_vector_field_compatible():
    g = SpaceTimeGrid((17, 17), 16)
    rng = np.random.default_rng(1)
    b = random_interior_vector(g, rng)
    # vanishes at t = 0 (source compatibility) and on a boundary collar
    assert np.max(np.abs(np.asarray(b.data)[:, 0])) == 0.0
    assert np.max(np.abs(np.asarray(b.data)[:, :, :2, :])) == 0.0
    assert np.max(np.abs(np.asarray(b.data)[:, :, :, -2:])) == 0.0


def test_q_oracle_seeds_reproducible():
    a = check_q_identity_oracle(seed=5, grid=SpaceTimeGrid((17, 17), 256))
    b = check_q_identity_oracle(seed=5, grid=SpaceTimeGrid((17, 17), 256))
    assert a["assembled"] == b["assembled"]
    assert a["rel_err"] < 2e-3


def test_b_oracle_small_error():
    rep = check_b_identity_oracle(seed=2, grid=SpaceTimeGrid((17, 17), 512))
    assert rep["rel_err"] < 1e-3


def test_full_suite_passes():
    report = run_verify(m=17, nt=32, n_oracle_seeds=1)
    names = {c["name"] for c in report["checks"]}
    assert {"mass_conservation", "manufactured_residual",
            "probe_reassembly", "fourier_inversion",
            "remainder_admissibility", "srf1_roundtrip",
            "q_identity_oracle", "b_identity_oracle"} <= names
    failed = [c for c in report["checks"] if not c["passed"]]
    assert report["all_passed"], f"failed checks: {failed}"
