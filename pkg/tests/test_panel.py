import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drnn.errors import ConfigError, IoError, ParseError
from drnn.panel import (
    ObservationPanel,
    ObservationTensor,
    TargetCell,
    load_panel,
    load_tensor,
    mask_density,
    save_panel,
    save_tensor,
)


def test_load_basic(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("1,NA\n3,4\n")
    panel = load_panel(f, "NA")
    assert panel.mask.tolist() == [[1, 0], [1, 1]]
    assert panel.outcomes[0, 0] == 1
    assert np.isnan(panel.outcomes[0, 1])
    assert panel.outcomes[1, 0] == 3 and panel.outcomes[1, 1] == 4


def test_load_ragged(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("1,2\n3\n")
    with pytest.raises(ParseError):
        load_panel(f)


def test_load_non_numeric_cell(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("1,abc\n3,4\n")
    with pytest.raises(ParseError):
        load_panel(f)


def test_load_all_missing(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("NA,NA\nNA,NA\n")
    panel = load_panel(f)
    assert panel.mask.sum() == 0


def test_load_header_comment(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("# units=2 times=2\n1,2\n3,4\n")
    panel = load_panel(f)
    assert panel.shape == (2, 2)


def test_numeric_missing_token_rejected(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("1,2\n")
    with pytest.raises(ConfigError):
        load_panel(f, missing_token="7")
    panel = load_panel(f)
    with pytest.raises(ConfigError):
        save_panel(panel, tmp_path / "q.csv", missing_token="7")


def test_save_empty_panel_rejected(tmp_path):
    panel = ObservationPanel(np.zeros((1, 1)), np.ones((1, 1), dtype=np.uint8))
    bad = ObservationPanel(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8))
    save_panel(panel, tmp_path / "ok.csv")
    with pytest.raises(IoError):
        save_panel(bad, tmp_path / "bad.csv")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    n, t = int(rng.integers(1, 8)), int(rng.integers(1, 8))
    outcomes = rng.normal(0, 10, size=(n, t)) * np.exp(rng.normal(0, 3))
    mask = (rng.random((n, t)) < 0.7).astype(np.uint8)
    panel = ObservationPanel(np.where(mask, outcomes, np.nan), mask)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    save_panel(panel, path)
    back = load_panel(path)
    assert np.array_equal(back.mask, panel.mask)
    obs = panel.mask == 1
    assert np.array_equal(back.outcomes[obs], panel.outcomes[obs])


def test_mask_density():
    full = ObservationPanel(np.ones((3, 3)), np.ones((3, 3), dtype=np.uint8))
    empty = ObservationPanel(np.full((3, 3), np.nan), np.zeros((3, 3), dtype=np.uint8))
    assert mask_density(full) == 1.0
    assert mask_density(empty) == 0.0
    # 3 observed of 4
    panel = ObservationPanel(
        np.array([[1.0, np.nan], [1.0, 1.0]]), np.array([[1, 0], [1, 1]])
    )
    assert mask_density(panel) == 0.75


def test_masked_cells_poisoned():
    panel = ObservationPanel(np.array([[1.0, 2.0]]), np.array([[1, 0]]))
    assert np.isnan(panel.outcomes[0, 1])
    assert panel.filled()[0, 1] == 0.0
    assert panel.value(0, 0) == 1.0
    with pytest.raises(AssertionError):
        panel.value(0, 1)


def test_shape_mismatch_and_nonfinite():
    with pytest.raises(ConfigError):
        ObservationPanel(np.ones((2, 2)), np.ones((2, 3), dtype=np.uint8))
    with pytest.raises(ConfigError):
        ObservationPanel(np.array([[np.inf]]), np.array([[1]]))


def test_panels_immutable():
    panel = ObservationPanel(np.ones((2, 2)), np.ones((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        panel.outcomes[0, 0] = 5.0


def test_target_cell_bounds():
    panel = ObservationPanel(np.ones((2, 2)), np.ones((2, 2), dtype=np.uint8))
    TargetCell(1, 1).validate(panel.shape)
    from drnn.errors import InvalidArgument

    with pytest.raises(InvalidArgument):
        TargetCell(2, 0).validate(panel.shape)


def test_tensor_manifest_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    outcomes = rng.normal(size=(3, 4, 2))
    mask = (rng.random((3, 4, 2)) < 0.8).astype(np.uint8)
    tensor = ObservationTensor(np.where(mask, outcomes, np.nan), mask)
    manifest = tmp_path / "slices.json"
    save_tensor(tensor, manifest)
    back = load_tensor(manifest)
    assert back.dims == tensor.dims
    assert np.array_equal(back.mask, tensor.mask)
    obs = tensor.mask == 1
    assert np.array_equal(back.outcomes[obs], tensor.outcomes[obs])


def test_tensor_inconsistent_slices(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n3,4\n")
    (tmp_path / "b.csv").write_text("1,2,9\n3,4,9\n")
    (tmp_path / "m.json").write_text('{"slices": ["a.csv", "b.csv"]}')
    with pytest.raises(ParseError):
        load_tensor(tmp_path / "m.json")
