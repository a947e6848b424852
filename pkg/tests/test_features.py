import numpy as np
import pytest

from grid_isle.detection.features import FeatureLayout, Standardizer, extract_features
from grid_isle.dynamics.model import DgModel
from grid_isle.dynamics.scenarios import MeasurementFrame, run_scenario
from grid_isle.errors import DetectionError


@pytest.mark.parametrize("k,n,length", [(6, 4, 54), (1, 1, 12), (3, 2, 27)])
def test_layout_length(k: int, n: int, length: int):
    layout = FeatureLayout(k, n)
    assert len(layout) == length
    assert len(layout.names) == length


def test_layout_order():
    names = FeatureLayout(2, 1).names
    assert names[:6] == ("v_pu_0", "v_pu_1", "delta_0", "delta_1", "f_0", "f_1")
    assert names[6:9] == ("dg0_v_a", "dg0_v_b", "dg0_v_c")
    assert names[-1] == "dg0_thd_c"


def test_empty_layout_is_rejected():
    with pytest.raises(DetectionError):
        FeatureLayout(0, 4)


def test_extraction_is_pure(dg_model: DgModel):
    frames = run_scenario(dg_model, None, horizon=0.01, seed=0)
    layout = FeatureLayout(6, 4)
    a = extract_features(frames[:1], layout)
    b = extract_features(frames[:1], layout)
    assert a.shape == (54,)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, frames[0].y)


def test_window_is_averaged(dg_model: DgModel):
    frames = run_scenario(dg_model, None, horizon=0.01, seed=0)
    x = extract_features(frames[:4], FeatureLayout(6, 4))
    np.testing.assert_allclose(x, np.mean([f.y for f in frames[:4]], axis=0))


def test_channels_are_reordered():
    layout = FeatureLayout(1, 1)
    names = layout.names
    y = np.arange(len(names), dtype=np.float64)
    frame = MeasurementFrame(
        0.0, y[::-1].copy(), np.zeros(1), 0, tuple(reversed(names))
    )
    np.testing.assert_array_equal(extract_features([frame], layout), y)


def test_bad_windows():
    layout = FeatureLayout(1, 1)
    with pytest.raises(DetectionError, match="empty"):
        extract_features([], layout)

    names = layout.names
    frame = MeasurementFrame(0.0, np.zeros(11), np.zeros(1), 0, names[:-1])
    with pytest.raises(DetectionError, match="Missing channel"):
        extract_features([frame], layout)

    y = np.zeros(12)
    y[3] = np.nan
    frame = MeasurementFrame(0.0, y, np.zeros(1), 0, names)
    with pytest.raises(DetectionError, match="Non-finite"):
        extract_features([frame], layout)


def test_standardizer():
    x = np.array([[1.0, 5.0], [3.0, 5.0]])
    std = Standardizer.fit(x)
    np.testing.assert_allclose(std(x), [[-1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DetectionError):
        std(np.zeros(3))
