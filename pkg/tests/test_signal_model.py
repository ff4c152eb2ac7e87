import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from myograph.errors import (MalformedFile, MetadataMismatch, NonFiniteSample,
                             RegionTooShort, UnsupportedRate)
from myograph.signal_model import (GridGeometry, GridRecording, TrialMetadata, TrimPolicy,
                                   load_trial, metadata_from_dict, metadata_to_dict,
                                   save_trial, trim_active_region)
from myograph.synth import SynthSpec, generate

FS = 2048.0


def _rec(n, force=None, trim=TrimPolicy(), geometry=GridGeometry(), seed=0):
    x = np.random.default_rng(seed).standard_normal((n, geometry.n_positions))
    for r, c in geometry.missing_pads:
        x[:, geometry.index(r, c)] = 0
    return GridRecording(geometry, TrialMetadata(trim=trim), x, force)


def test_geometry_defaults():
    g = GridGeometry()
    assert (g.rows, g.cols, g.n_positions, g.n_channels) == (13, 5, 65, 64)
    assert g.is_missing(0, 0)
    assert g.index(3, 2) == 2 * 13 + 3
    assert len(g.present_pads()) == 64


def test_geometry_rejects_small_grid():
    with pytest.raises(MetadataMismatch):
        GridGeometry(rows=3)


def test_low_rate_rejected():
    with pytest.raises(UnsupportedRate):
        TrialMetadata(sampling_rate=500.0)


@pytest.mark.parametrize("mvc,cond", [(70, "before_fatigue"), (20, "after_fatigue"),
                                      (15, "before_fatigue"), (10, "resting")])
def test_protocol_metadata_rules(mvc, cond):
    with pytest.raises(MetadataMismatch):
        TrialMetadata(mvc_percent=mvc, condition=cond)


def test_recording_is_read_only():
    rec = _rec(100)
    with pytest.raises(ValueError):
        rec.samples[0, 0] = 1.0


def test_recording_rejects_nan():
    x = np.zeros((10, 65))
    x[3, 4] = np.nan
    with pytest.raises(NonFiniteSample):
        GridRecording(GridGeometry(), TrialMetadata(), x)


def test_channel_ordering(tmp_path):
    # channel (r, c) carries r + 100 c; must survive the file round trip
    g = GridGeometry()
    n = int(2 * FS)
    x = np.zeros((n, g.n_positions))
    for r, c in g.present_pads():
        x[:, g.index(r, c)] = r + 100 * c
    rec = GridRecording(g, TrialMetadata(), x)
    save_trial(rec, tmp_path / "s.csv", tmp_path / "m.json")
    back = load_trial(tmp_path / "s.csv", tmp_path / "m.json")
    for r, c in g.present_pads():
        assert np.all(back.channel(r, c) == r + 100 * c)
        assert np.all(back.samples[:, c * 13 + r] == r + 100 * c)
    assert np.all(back.channel(0, 0) == 0)


def test_round_trip(tmp_path):
    rec = generate(SynthSpec(duration=2.0, ramp=0.2, seed=3))
    save_trial(rec, tmp_path / "s.csv", tmp_path / "m.json")
    back = load_trial(tmp_path / "s.csv", tmp_path / "m.json")
    assert back.samples.shape == (4096, 65)
    assert back.force is not None
    np.testing.assert_allclose(back.samples, rec.samples, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(back.force, rec.force, rtol=1e-9)
    assert back.meta == rec.meta and back.geometry == rec.geometry


def test_header_shape(tmp_path):
    rec = generate(SynthSpec(duration=2.0))
    save_trial(rec, tmp_path / "s.csv", tmp_path / "m.json")
    header = (tmp_path / "s.csv").read_text().split("\n", 1)[0].split(",")
    assert len(header) == 66
    assert header[0] == "t" and header[1] == "e_1_0" and header[-1] == "force"
    meta = json.loads((tmp_path / "m.json").read_text())
    for key in ("subject_id", "mvc_percent", "condition", "sampling_rate_hz", "rows",
                "cols", "ied_m", "missing_pads", "trim"):
        assert key in meta


def test_metadata_dict_round_trip():
    g = GridGeometry(missing_pads=((12, 4),))
    m = TrialMetadata(mvc_percent=70, condition="fatigue", target_force=55.0,
                      trim=TrimPolicy("force_threshold", 0.25, 0.4))
    assert metadata_from_dict(json.loads(json.dumps(metadata_to_dict(g, m)))) == (g, m)


def _write_pair(tmp_path, text, meta=None):
    if meta is None:
        meta = metadata_to_dict(GridGeometry(), TrialMetadata())
    (tmp_path / "m.json").write_text(json.dumps(meta))
    (tmp_path / "s.csv").write_text(text)
    return tmp_path / "s.csv", tmp_path / "m.json"


def _csv(n=int(2 * FS), ncol=64, force=True, bad=None):
    g = GridGeometry()
    names = ["t"] + [f"e_{r}_{c}" for r, c in g.present_pads()][:ncol]
    if force:
        names.append("force")
    lines = [",".join(names)]
    for i in range(n):
        vals = [f"{i / FS:.9f}"] + ["0.1"] * (len(names) - 1)
        if bad is not None and i == bad[0]:
            vals[bad[1]] = bad[2]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def test_load_nan_sample(tmp_path):
    with pytest.raises(NonFiniteSample):
        load_trial(*_write_pair(tmp_path, _csv(bad=(100, 5, "nan"))))


def test_load_column_count_mismatch(tmp_path):
    with pytest.raises(MetadataMismatch):
        load_trial(*_write_pair(tmp_path, _csv(ncol=60, force=False)))


def test_load_text_cell(tmp_path):
    with pytest.raises(MalformedFile):
        load_trial(*_write_pair(tmp_path, _csv(bad=(7, 3, "abc"))))


def test_load_too_short(tmp_path):
    with pytest.raises(MalformedFile):
        load_trial(*_write_pair(tmp_path, _csv(n=1000)))


def test_load_time_not_increasing(tmp_path):
    with pytest.raises(MalformedFile):
        load_trial(*_write_pair(tmp_path, _csv(bad=(10, 0, "0.0"))))


def test_load_bad_metadata(tmp_path):
    with pytest.raises(MalformedFile):
        load_trial(*_write_pair(tmp_path, _csv(), meta={"subject_id": "x"}))


def test_fixed_trim_arithmetic():
    rec = _rec(int(12 * FS))
    out = trim_active_region(rec)
    assert out.duration == pytest.approx(11.0)
    assert out.t0 == pytest.approx(0.5)


def test_fixed_trim_too_short():
    with pytest.raises(RegionTooShort):
        trim_active_region(_rec(int(1.5 * FS)))


def test_force_threshold_ramp_crossing():
    # ramp 0 -> F over 1 s then plateau; the half-force crossing is the first
    # sample with i / fs >= 0.5, i.e. index 1024
    n = int(4 * FS)
    t = np.arange(n) / FS
    force = 80.0 * np.clip(t, 0, 1)
    rec = _rec(n, force, TrimPolicy("force_threshold"))
    out = trim_active_region(rec)
    assert round(out.t0 * FS) == int(np.ceil(0.5 * FS))
    assert out.n_samples == n - 1024


@given(st.integers(0, 10_000), st.floats(0.2, 0.8))
def test_force_trim_idempotent(seed, fraction):
    rng = np.random.default_rng(seed)
    n = 4096
    t = np.arange(n) / FS
    force = 50 * np.clip(t / rng.uniform(0.1, 0.6), 0, 1) * np.clip((2 - t) / 0.3, 0, 1)
    force = force + rng.uniform(0, 3) * rng.standard_normal(n)
    rec = _rec(n, force, TrimPolicy("force_threshold", force_fraction=fraction), seed=seed)
    try:
        once = trim_active_region(rec)
    except RegionTooShort:
        return
    twice = trim_active_region(once)
    assert twice.n_samples == once.n_samples and twice.t0 == once.t0
