import numpy as np
import pytest

from drnn.errors import InvalidArgument
from drnn.estimators import estimate_dr_nn
from drnn.neighbors import NeighborSets
from drnn.panel import ObservationTensor, TargetCell
from drnn.tensor import (
    TensorNeighborSets,
    estimate_tensor_entry,
    estimate_tensor_vanilla,
    estimate_tr_nn,
    tensor_mode_distance,
    tensor_neighbors,
)


def full_tensor(values):
    values = np.asarray(values, dtype=float)
    return ObservationTensor(values, np.ones_like(values, dtype=np.uint8))


def rank1(u, v, w):
    u, v, w = (np.asarray(x, dtype=float) for x in (u, v, w))
    return u[:, None, None] * v[None, :, None] * w[None, None, :]


def tsets(target, units, times, ints, etas=(1e9, 1e9, 1e9)):
    return TensorNeighborSets(
        target, np.asarray(units, dtype=np.intp), np.asarray(times, dtype=np.intp),
        np.asarray(ints, dtype=np.intp), etas,
    )


def test_mode_distance_duplicate_slices():
    t = full_tensor(np.ones((3, 2, 2)))
    assert tensor_mode_distance(t, "unit", 0, 1, exclude=(0, 0)) == 0.0


def test_mode_distance_single_overlap_cell():
    # after excluding the target's time and intervention slabs from a 2x2x2
    # tensor, the comparison reduces to one cell per slice: (3-5)^2 = 4
    vals = np.zeros((2, 2, 2))
    vals[0, 1, 1] = 3.0
    vals[1, 1, 1] = 5.0
    t = full_tensor(vals)
    assert tensor_mode_distance(t, "unit", 0, 1, exclude=(0, 0)) == pytest.approx(4.0)


def test_mode_distance_disjoint_masks():
    outcomes = np.zeros((2, 2, 2))
    mask = np.zeros((2, 2, 2), dtype=np.uint8)
    mask[0, 1, 1] = 1
    mask[1, 0, 1] = 1
    t = ObservationTensor(np.where(mask, outcomes, np.nan), mask)
    assert tensor_mode_distance(t, "unit", 0, 1, exclude=(0, 0)) == np.inf


def test_mode_distance_equal_indices():
    t = full_tensor(np.ones((2, 2, 2)))
    with pytest.raises(InvalidArgument):
        tensor_mode_distance(t, "time", 1, 1, exclude=(0, 0))


def test_tensor_neighbors_threshold_monotone_deterministic():
    rng = np.random.default_rng(0)
    t = full_tensor(rng.normal(size=(5, 5, 5)))
    target = TargetCell(0, 0, 0)
    small = tensor_neighbors(t, target, (0.5, 0.5, 0.5), seed=1)
    big = tensor_neighbors(t, target, (3.0, 3.0, 3.0), seed=1)
    assert set(small.unit_neighbors) <= set(big.unit_neighbors)
    assert set(small.time_neighbors) <= set(big.time_neighbors)
    again = tensor_neighbors(t, target, (0.5, 0.5, 0.5), seed=1)
    assert again.unit_neighbors.tolist() == small.unit_neighbors.tolist()
    # boundary included
    d = tensor_mode_distance(t, "unit", 0, 1, exclude=(0, 0))
    at = tensor_neighbors(t, target, (d, 0.0, 0.0), seed=1)
    assert 1 in at.unit_neighbors


def test_tr_hand_value_and_error():
    # u=(1,2), v=(1,3), w=(1,4): estimate at (0,0,0) from singleton sets is
    # 2+3+4+24-6-8-12 = 7 and theta - hat = (1-2)(1-3)(1-4) = -6
    t = full_tensor(rank1([1, 2], [1, 3], [1, 4]))
    est = estimate_tr_nn(t, tsets(TargetCell(0, 0, 0), [1], [1], [1]))
    assert est.value == pytest.approx(7.0, abs=1e-12)
    assert 1.0 - est.value == pytest.approx(-6.0, abs=1e-12)


def test_tr_exact_recovery_with_exact_neighbors():
    # duplicated factors in every mode make the estimate exact
    t = full_tensor(rank1([1.5, 1.5], [2.0, 2.0], [-3.0, -3.0]))
    est = estimate_tr_nn(t, tsets(TargetCell(0, 0, 0), [1], [1], [1]))
    assert abs(est.value - (1.5 * 2.0 * -3.0)) <= 1e-10


def test_tr_error_factorization_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(30):
        u, v, w = rng.uniform(-2, 2, size=(3, 2))
        t = full_tensor(rank1(u, v, w))
        est = estimate_tr_nn(t, tsets(TargetCell(0, 0, 0), [1], [1], [1]))
        expected = (u[0] - u[1]) * (v[0] - v[1]) * (w[0] - w[1])
        assert u[0] * v[0] * w[0] - est.value == pytest.approx(expected, abs=1e-10)


def test_tr_all_triples_unobserved_falls_back():
    outcomes = np.ones((2, 2, 2))
    mask = np.ones((2, 2, 2), dtype=np.uint8)
    mask[1, 1, 1] = 0  # kills the (j,t',a') corner of every triple
    t = ObservationTensor(np.where(mask, outcomes, np.nan), mask)
    est = estimate_tr_nn(t, tsets(TargetCell(0, 0, 0), [1], [1], [1]))
    assert est.method == "fallback_observed"
    assert est.value == 1.0


def test_mode_symmetry():
    rng = np.random.default_rng(8)
    vals = rng.normal(size=(4, 5, 6))
    t = full_tensor(vals)
    target = TargetCell(1, 2, 3)
    etas = (2.0, 2.5, 3.0)
    base = estimate_tr_nn(t, tensor_neighbors(t, target, etas))
    # roll modes: (time, intervention, unit) ordering of the same data
    rolled = full_tensor(np.moveaxis(vals, (0, 1, 2), (2, 0, 1)))
    target_r = TargetCell(2, 3, 1)
    etas_r = (2.5, 3.0, 2.0)
    rolled_est = estimate_tr_nn(rolled, tensor_neighbors(rolled, target_r, etas_r))
    assert rolled_est.value == pytest.approx(base.value, abs=1e-12)


def test_degradation_to_matrix_dr():
    """A single exactly-matching intervention neighbor whose slice is
    noiseless and self-consistent reduces TR to the matrix DR value."""
    rng = np.random.default_rng(13)
    u = np.array([1.0, 1.0, 2.0, -1.0])
    v = np.array([0.5, 0.5, 3.0, 1.0])
    clean = np.outer(u, v)
    noisy = clean + rng.normal(0, 0.3, size=clean.shape)
    vals = np.stack([noisy, clean], axis=2)  # slice 0 noisy, slice 1 clean
    t = full_tensor(vals)
    units, times = [1], [1]  # exact factor duplicates of row/col 0
    tr = estimate_tr_nn(t, tsets(TargetCell(0, 0, 0), units, times, [1]))
    from drnn.panel import ObservationPanel

    panel = ObservationPanel(noisy, np.ones_like(noisy, dtype=np.uint8))
    dr = estimate_dr_nn(panel, NeighborSets(
        TargetCell(0, 0), np.array(units), np.array(times), 1e9, 1e9
    ))
    assert tr.value == pytest.approx(dr.value, abs=1e-12)


def test_estimate_tensor_entry_and_vanilla():
    t = full_tensor(rank1([1, 1, 2], [1, 1, 3], [1, 1, 4]))
    target = TargetCell(0, 0, 0)
    est = estimate_tensor_entry(t, target, (1e-9, 1e-9, 1e-9), method="tr")
    assert est.method == "tr_nn" and est.value == pytest.approx(1.0, abs=1e-10)
    nbrs = tensor_neighbors(t, target, (1e-9, 1e-9, 1e-9))
    uni = estimate_tensor_vanilla(t, nbrs, "unit")
    assert uni.method == "unit_nn" and uni.value == pytest.approx(1.0, abs=1e-12)
