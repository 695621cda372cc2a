"""Reference adapters: payload validation and fill behavior."""

import numpy as np
import pytest

from dimsum_bridge.adapters import (
    ADAPTERS,
    AdapterError,
    LinearInterpAdapter,
    ZeroFillAdapter,
    parse_window,
    stack_windows,
)


def wire(values, mask):
    return {"values": [None if m == 0 else float(v) for v, m in zip(values, mask)],
            "mask": [int(b) for b in mask]}


def fit_on(adapter, rows):
    adapter.fit([wire(v, m) for v, m in rows])
    return adapter


class TestParseWindow:
    def test_nan_exactly_at_hidden(self):
        v, m = parse_window({"values": [1.0, None, 3.0], "mask": [1, 0, 1]})
        assert np.isnan(v[1]) and v[0] == 1.0 and v[2] == 3.0
        assert m.tolist() == [1, 0, 1]

    @pytest.mark.parametrize(
        "row",
        [
            "nope",
            {"values": [1.0]},
            {"values": [], "mask": []},
            {"values": [1.0, 2.0], "mask": [1]},
            {"values": [1.0, 2.0], "mask": [1, 2]},
            {"values": ["x", 2.0], "mask": [1, 1]},
            {"values": [None, 2.0], "mask": [1, 1]},
        ],
    )
    def test_bad_rows_rejected(self, row):
        with pytest.raises(AdapterError):
            parse_window(row)

    def test_length_pin(self):
        with pytest.raises(AdapterError, match="differs"):
            parse_window({"values": [1.0, 2.0], "mask": [1, 1]}, w=3)

    def test_stack_requires_consistent_lengths(self):
        rows = [wire([1.0, 2.0], [1, 1]), {"values": [1.0], "mask": [1]}]
        with pytest.raises(AdapterError):
            stack_windows(rows)
        with pytest.raises(AdapterError):
            stack_windows([])


class TestZeroFill:
    def test_round_trips_window_of_96(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=96)
        mask = (rng.random(96) >= 0.4).astype(np.uint8)
        mask[0] = 1
        adapter = fit_on(ZeroFillAdapter(), [(vals, np.ones(96, dtype=np.uint8))])
        [row] = adapter.impute([wire(vals, mask)])
        out = np.array(row)
        assert np.array_equal(out[mask == 1], vals[mask == 1])
        assert (out[mask == 0] == 0.0).all()

    def test_impute_before_fit(self):
        with pytest.raises(AdapterError, match="not fitted"):
            ZeroFillAdapter().impute([wire([1.0], [1])])


class TestLinearInterp:
    def test_interior_interpolation(self):
        adapter = fit_on(LinearInterpAdapter(), [(np.zeros(3), np.ones(3, dtype=np.uint8))])
        [row] = adapter.impute([{"values": [1.0, None, 3.0], "mask": [1, 0, 1]}])
        assert row == [1.0, 2.0, 3.0]

    def test_edges_extrapolate(self):
        adapter = fit_on(LinearInterpAdapter(), [(np.zeros(5), np.ones(5, dtype=np.uint8))])
        # anchors at 1 and 2 with slope 1: the affine line is recovered
        [row] = adapter.impute([{"values": [None, 1.0, 2.0, None, None], "mask": [0, 1, 1, 0, 0]}])
        assert row == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_single_anchor_is_constant(self):
        adapter = fit_on(LinearInterpAdapter(), [(np.zeros(4), np.ones(4, dtype=np.uint8))])
        [row] = adapter.impute([{"values": [None, 7.5, None, None], "mask": [0, 1, 0, 0]}])
        assert row == [7.5] * 4

    def test_anchor_free_uses_training_mean(self):
        adapter = fit_on(
            LinearInterpAdapter(), [(np.array([2.0, 4.0]), np.ones(2, dtype=np.uint8))]
        )
        [row] = adapter.impute([{"values": [None, None], "mask": [0, 0]}])
        assert row == [3.0, 3.0]

    def test_fit_needs_a_visible_value(self):
        with pytest.raises(AdapterError, match="no visible"):
            LinearInterpAdapter().fit([{"values": [None, None], "mask": [0, 0]}])


def test_registry_names_match_classes():
    assert set(ADAPTERS) == {"zero", "linear"}
    for name, cls in ADAPTERS.items():
        assert cls.name == name
