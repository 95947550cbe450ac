import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drnn.errors import NoDataError
from drnn.estimators import (
    complete_matrix,
    counterfactual_estimates,
    estimate_dr_nn,
    estimate_entry,
    estimate_time_nn,
    estimate_unit_nn,
)
from drnn.neighbors import NeighborSets, select_neighbors
from drnn.panel import ObservationPanel, TargetCell


def full_panel(values):
    values = np.asarray(values, dtype=float)
    return ObservationPanel(values, np.ones_like(values, dtype=np.uint8))


def sets(i, t, units, times, eta=(1e9, 1e9)):
    return NeighborSets(
        TargetCell(i, t), np.asarray(units, dtype=np.intp),
        np.asarray(times, dtype=np.intp), eta[0], eta[1],
    )


def test_unit_nn_single_and_mean():
    panel = full_panel([[0, 0], [7, 0], [2, 0], [4, 0]])
    single = estimate_unit_nn(panel, sets(0, 0, [1], [1]))
    assert single.value == 7 and single.method == "unit_nn"
    pair = estimate_unit_nn(panel, sets(0, 0, [2, 3], [1]))
    assert pair.value == 3 and pair.n_unit_used == 2


def test_unit_nn_unobserved_at_t_falls_back():
    outcomes = np.array([[1.0, 1.0], [np.nan, 5.0]])
    panel = ObservationPanel(outcomes, np.array([[1, 1], [0, 1]]))
    est = estimate_unit_nn(panel, sets(0, 0, [1], [1]))
    assert est.method != "unit_nn"
    assert est.method == "fallback_observed" and est.value == 1.0


def test_time_nn_values():
    panel = full_panel([[0, 5, 1, 3]])
    one = estimate_time_nn(panel, sets(0, 0, [], [1]))
    assert one.value == 5 and one.method == "time_nn"
    two = estimate_time_nn(panel, sets(0, 0, [], [2, 3]))
    assert two.value == 2 and two.n_time_used == 2


def test_dr_exact_neighbor_recovery():
    # scalar factors u=(1,1), v=(1,1): every entry 1; DR stays exact
    panel = full_panel(np.ones((2, 2)))
    est = estimate_dr_nn(panel, sets(0, 0, [1], [1]))
    assert est.value == pytest.approx(1.0, abs=1e-12)


def test_dr_hand_value_and_bias_factorization():
    # u=(1,1.5), v=(1,2): DR at (0,0) with singleton sets is 2+1.5-3 = 0.5
    # and theta - hat = (1-1.5)(1-2) = 0.5
    theta = np.outer([1.0, 1.5], [1.0, 2.0])
    panel = full_panel(theta)
    est = estimate_dr_nn(panel, sets(0, 0, [1], [1]))
    assert est.value == pytest.approx(0.5, abs=1e-12)
    assert theta[0, 0] - est.value == pytest.approx(0.5, abs=1e-12)


def test_dr_all_masks_zero_falls_back():
    outcomes = np.array([[1.0, np.nan], [np.nan, 4.0]])
    panel = ObservationPanel(outcomes, np.array([[1, 0], [0, 1]]))
    est = estimate_dr_nn(panel, sets(0, 0, [1], [1]))
    assert est.method == "fallback_observed"
    assert est.value == 1.0


def test_fallback_ladder_unobserved_target():
    # target cell unobserved and no neighbors: DR sums over all rows/columns
    outcomes = np.array([[np.nan, 2.0], [3.0, 4.0]])
    panel = ObservationPanel(outcomes, np.array([[0, 1], [1, 1]]))
    est = estimate_entry(panel, TargetCell(0, 0), (0.0, 0.0), method="dr")
    assert est.method == "fallback_global"
    # single cross pair (j=1, t'=1): Y[0,1] + Y[1,0] - Y[1,1] = 2+3-4
    assert est.value == pytest.approx(1.0)


def test_fallback_observed_first():
    panel = full_panel([[5.0, 1.0], [1.0, 9.0]])
    est = estimate_entry(panel, TargetCell(0, 0), (0.0, 0.0), method="dr")
    assert est.method == "fallback_observed" and est.value == 5.0


def test_no_data_error():
    empty = ObservationPanel(np.full((2, 2), np.nan), np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(NoDataError):
        estimate_entry(empty, TargetCell(0, 0), (1.0, 1.0))
    with pytest.raises(NoDataError):
        complete_matrix(empty, (1.0, 1.0))


def test_max_neighbors_subsample_deterministic():
    panel = full_panel(np.ones((7, 7)))
    a = estimate_entry(panel, TargetCell(0, 0), (1.0, 1.0), split_seed=4,
                       method="unit", max_neighbors=1)
    b = estimate_entry(panel, TargetCell(0, 0), (1.0, 1.0), split_seed=4,
                       method="unit", max_neighbors=1)
    assert a.n_unit_used == 1
    assert a.value == b.value


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_dr_identity_full_mask(seed):
    """Under a full mask, DR equals unit + time - cross average for shared
    neighbor sets."""
    rng = np.random.default_rng(seed)
    n, t = int(rng.integers(3, 9)), int(rng.integers(3, 9))
    panel = full_panel(rng.uniform(-8, 8, size=(n, t)))
    target = TargetCell(int(rng.integers(0, n)), int(rng.integers(0, t)))
    eta = float(rng.uniform(0.5, 50.0))
    nbrs = select_neighbors(panel, target, eta, eta)
    if nbrs.unit_neighbors.size == 0 or nbrs.time_neighbors.size == 0:
        return
    dr = estimate_dr_nn(panel, nbrs).value
    unit = estimate_unit_nn(panel, nbrs).value
    time = estimate_time_nn(panel, nbrs).value
    cross = panel.outcomes[np.ix_(nbrs.unit_neighbors, nbrs.time_neighbors)].mean()
    assert dr == pytest.approx(unit + time - cross, abs=1e-12)


def test_bias_factorization_brute_force():
    """Noiseless scalar-factor panels: theta - dr equals the average of
    (u_i - u_j)(v_t - v_s) over the cross pairs."""
    rng = np.random.default_rng(11)
    for _ in range(25):
        n, t = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        u = rng.uniform(-2, 2, size=n)
        v = rng.uniform(-2, 2, size=t)
        panel = full_panel(np.outer(u, v))
        i, tt = int(rng.integers(0, n)), int(rng.integers(0, t))
        units = [j for j in range(n) if j != i and rng.random() < 0.7]
        times = [s for s in range(t) if s != tt and rng.random() < 0.7]
        if not units or not times:
            continue
        est = estimate_dr_nn(panel, sets(i, tt, units, times))
        expected_gap = np.mean([
            (u[i] - u[j]) * (v[tt] - v[s]) for j in units for s in times
        ])
        assert u[i] * v[tt] - est.value == pytest.approx(expected_gap, abs=1e-10)


def test_permutation_equivariance():
    rng = np.random.default_rng(21)
    outcomes = rng.normal(size=(6, 5))
    mask = (rng.random((6, 5)) < 0.8).astype(np.uint8)
    mask[:, 2] = 1
    panel = ObservationPanel(np.where(mask, outcomes, np.nan), mask)
    perm = rng.permutation(6)
    permuted = ObservationPanel(
        np.where(mask, outcomes, np.nan)[perm], mask[perm]
    )
    inv = np.argsort(perm)
    for i in range(6):
        a = estimate_entry(panel, TargetCell(i, 2), (1.5, 1.5), method="dr")
        b = estimate_entry(permuted, TargetCell(int(inv[i]), 2), (1.5, 1.5), method="dr")
        assert a.value == pytest.approx(b.value, abs=1e-12)


def test_method_dominance_duplicate_rows_only():
    """Duplicate rows with heterogeneous columns: unit-NN and DR recover
    exactly while time-NN with a small threshold falls back."""
    v = np.array([1.0, 3.5, -2.0, 0.25])
    theta = np.outer([2.0, 2.0, -1.0], v)
    panel = full_panel(theta)
    target = TargetCell(0, 1)
    unit = estimate_entry(panel, target, (1e-9, 1e-9), method="unit")
    dr = estimate_entry(panel, target, (1e-9, 1e9), method="dr")
    time = estimate_entry(panel, target, (1e-9, 1e-9), method="time")
    assert unit.method == "unit_nn" and unit.value == pytest.approx(theta[0, 1], abs=1e-12)
    assert dr.method == "dr_nn" and dr.value == pytest.approx(theta[0, 1], abs=1e-12)
    assert time.method.startswith("fallback")


def test_complete_matrix_exact_on_duplicates():
    # duplicate rows and columns, rank 1, full mask: every estimate exact
    u = np.array([1.0, 2.0, 1.0])
    v = np.array([3.0, 3.0, -1.0])
    theta = np.outer(u, v)
    panel = full_panel(theta)
    ests = complete_matrix(panel, (1e-9, 1e-9), method="dr")
    assert len(ests) == 9
    for est in ests:
        truth = theta[est.target.unit, est.target.time]
        assert est.value == pytest.approx(truth, abs=1e-10)


def test_complete_matrix_single_target():
    panel = full_panel(np.ones((3, 3)))
    ests = complete_matrix(panel, (1.0, 1.0), targets=[TargetCell(1, 2)])
    assert len(ests) == 1 and ests[0].target == TargetCell(1, 2)


def test_counterfactual_constant_surfaces():
    rng = np.random.default_rng(2)
    treatment = (rng.random((12, 12)) < 0.5).astype(np.uint8)
    outcomes = treatment.astype(float)  # theta(1)=1 observed, theta(0)=0
    res = counterfactual_estimates(outcomes, treatment, (0.5, 0.5))
    assert res.control is not None and res.treated is not None
    for est in res.control:
        if est.n_cross_terms > 0:
            assert est.value == pytest.approx(0.0, abs=1e-10)
    for est in res.treated:
        if est.n_cross_terms > 0:
            assert est.value == pytest.approx(1.0, abs=1e-10)


def test_counterfactual_all_ones_reports_per_side():
    outcomes = np.ones((4, 4))
    res = counterfactual_estimates(outcomes, np.ones((4, 4)), (1.0, 1.0))
    assert res.treated is not None
    assert res.control is None and res.control_error


def test_counterfactual_swap_symmetry():
    rng = np.random.default_rng(9)
    treatment = (rng.random((10, 10)) < 0.5).astype(np.uint8)
    outcomes = rng.normal(size=(10, 10))
    res = counterfactual_estimates(outcomes, treatment, (2.0, 2.0))
    flipped = counterfactual_estimates(outcomes, 1 - treatment, (2.0, 2.0))
    vals = lambda ests: [e.value for e in ests]
    assert vals(res.control) == vals(flipped.treated)
    assert vals(res.treated) == vals(flipped.control)


def test_no_nan_leaks_from_masked_cells():
    # estimates on sparsely observed panels must stay finite for every
    # method and fallback path
    rng = np.random.default_rng(31)
    outcomes = rng.normal(size=(12, 12))
    mask = (rng.random((12, 12)) < 0.4).astype(np.uint8)
    mask[0, 0] = 1  # keep at least one observation
    panel = ObservationPanel(np.where(mask, outcomes, np.nan), mask)
    for method in ("unit", "time", "dr"):
        for i in range(12):
            est = estimate_entry(panel, TargetCell(i, 5), (0.8, 0.8), method=method)
            assert np.isfinite(est.value)


def test_estimates_at_observed_cells_use_neighbors():
    # denoising: observed cells are still estimated from neighbors
    theta = np.outer([1.0, 1.0, 1.0], [2.0, 2.0, 2.0])
    noisy = theta.copy()
    noisy[0, 0] = 5.0  # a wild observed value
    panel = full_panel(noisy)
    est = estimate_entry(panel, TargetCell(0, 0), (1e-6, 1e-6), method="dr")
    assert est.method == "dr_nn"
    assert est.value == pytest.approx(2.0, abs=1e-9)
