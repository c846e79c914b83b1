import json
import struct

import numpy as np
import pytest

from tdslbp.errors import ManifestParseError, NonFiniteSample, SizeMismatch, TooFewCells
from tdslbp.ingest import DatasetManifest, RangeCellSeries, load_dataset, validate_for_detection, write_dataset
from tdslbp.synth import SynthConfig, generate


def _write_raw(tmp_path, manifest_dict, raw: np.ndarray):
    (tmp_path / "manifest.json").write_text(json.dumps(manifest_dict))
    raw.astype("<f4").tofile(tmp_path / "samples.bin")
    return tmp_path / "manifest.json"


def _manifest(**kw):
    d = {
        "dataset_id": "t",
        "collection_year": "custom",
        "num_cells": 3,
        "samples_per_cell": 4,
        "polarization": "HH",
        "primary_cell": None,
        "secondary_cells": [],
        "sample_encoding": "float32-interleaved-IQ",
        "notes": "",
    }
    d.update(kw)
    return d


def test_decodes_little_endian_interleaved_iq(tmp_path):
    # 2 cells x 2 samples written byte by byte
    values = [1.5, -2.0, 3.25, 0.5, -1.0, 7.0, 0.0, -0.125]
    (tmp_path / "samples.bin").write_bytes(struct.pack("<8f", *values))
    (tmp_path / "manifest.json").write_text(json.dumps(_manifest(num_cells=2, samples_per_cell=2, primary_cell=1)))
    cells, manifest = load_dataset(tmp_path / "manifest.json")
    assert [c.cell_index for c in cells] == [0, 1]
    np.testing.assert_array_equal(cells[0].samples, [1.5 - 2.0j, 3.25 + 0.5j])
    np.testing.assert_array_equal(cells[1].samples, [-1.0 + 7.0j, 0.0 - 0.125j])
    assert [c.role for c in cells] == ["clutter_only", "primary"]


def test_1993_sized_file_eleven_cells(tmp_path):
    raw = np.zeros((11, 131072, 2), dtype="<f4")
    raw[:, :, 0] = np.arange(11)[:, None]
    path = _write_raw(tmp_path, _manifest(num_cells=11, samples_per_cell=131072, primary_cell=7), raw)
    assert (tmp_path / "samples.bin").stat().st_size == 11 * 131072 * 8
    cells, manifest = load_dataset(path)
    assert len(cells) == 11
    assert cells[7].role == "primary"
    assert all(c.role == "clutter_only" for c in cells if c.cell_index != 7)
    assert all(c.samples[0] == c.cell_index for c in cells)


def test_1998_sized_file_28_cells(tmp_path):
    raw = np.zeros((28, 60000, 2), dtype="<f4")
    cells, manifest = load_dataset(_write_raw(tmp_path, _manifest(num_cells=28, samples_per_cell=60000), raw))
    assert len(cells) == 28 and manifest.samples_per_cell == 60000


def test_truncated_binary_is_size_mismatch(tmp_path):
    path = _write_raw(tmp_path, _manifest(), np.zeros((3, 4, 2)))
    data = (tmp_path / "samples.bin").read_bytes()
    (tmp_path / "samples.bin").write_bytes(data[:-1])
    with pytest.raises(SizeMismatch):
        load_dataset(path)


def test_non_finite_sample_reports_cell_and_offset(tmp_path):
    raw = np.zeros((3, 4, 2))
    raw[2, 3, 1] = np.nan
    with pytest.raises(NonFiniteSample) as info:
        load_dataset(_write_raw(tmp_path, _manifest(), raw))
    assert (info.value.cell_index, info.value.offset) == (2, 3)


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        json.dumps([1, 2]),
        json.dumps(_manifest(num_cells=0)),
        json.dumps(_manifest(primary_cell=3)),
        json.dumps(_manifest(primary_cell=1, secondary_cells=[1])),
        json.dumps(_manifest(secondary_cells=[0, 0])),
        json.dumps(_manifest(secondary_cells=[5])),
        json.dumps(_manifest(polarization="XX")),
        json.dumps(_manifest(sample_encoding="int16")),
        json.dumps({**_manifest(), "bogus": 1}),
        json.dumps({k: v for k, v in _manifest().items() if k != "samples_per_cell"}),
    ],
)
def test_malformed_manifest(tmp_path, text):
    (tmp_path / "manifest.json").write_text(text)
    np.zeros((3, 4, 2), dtype="<f4").tofile(tmp_path / "samples.bin")
    with pytest.raises(ManifestParseError):
        load_dataset(tmp_path / "manifest.json")


def test_write_load_round_trip_is_identity_up_to_float32(tmp_path):
    rng = np.random.default_rng(0)
    manifest = DatasetManifest(dataset_id="rt", num_cells=4, samples_per_cell=100, primary_cell=2,
                               secondary_cells=(0,), polarization="VV")
    samples = rng.normal(size=(4, 100)) + 1j * rng.normal(size=(4, 100))
    cells = [RangeCellSeries(i, samples[i], manifest.role_of(i)) for i in range(4)]
    write_dataset(manifest, cells, tmp_path / "m.json")
    loaded, loaded_manifest = load_dataset(tmp_path / "m.json")
    assert loaded_manifest == manifest
    for c in loaded:
        expected = samples[c.cell_index].astype(np.complex64).astype(np.complex128)
        np.testing.assert_array_equal(c.samples, expected)
        assert c.role == manifest.role_of(c.cell_index)


def test_cell_order_follows_index_not_role(tmp_path):
    manifest = DatasetManifest(dataset_id="o", num_cells=5, samples_per_cell=8, primary_cell=0,
                               secondary_cells=(3, 1))
    cells = [RangeCellSeries(i, np.full(8, i + 0j), manifest.role_of(i)) for i in (4, 2, 0, 1, 3)]
    write_dataset(manifest, cells, tmp_path / "m.json")
    loaded, _ = load_dataset(tmp_path / "m.json")
    assert [c.cell_index for c in loaded] == [0, 1, 2, 3, 4]
    assert [c.samples[0].real for c in loaded] == [0, 1, 2, 3, 4]


def test_exclude_secondary_from_fourteen_cells():
    cfg = SynthConfig(rng_seed=3, num_cells=14, samples_per_cell=1024, target_cell=8, secondary_cells=(7, 9, 10))
    cells, manifest = generate(cfg)
    kept = validate_for_detection(cells, exclude_secondary=True)
    expected = [c.cell_index for c in cells if c.role != "secondary"]
    assert len(kept) == len(expected) == 11
    assert [c.cell_index for c in kept] == expected
    assert kept.dropped == (7, 9, 10)


def test_no_secondary_is_noop():
    cells = [RangeCellSeries(i, np.ones(4)) for i in range(28)]
    kept = validate_for_detection(cells, exclude_secondary=True)
    assert len(kept) == 28 and kept.dropped == ()


def test_keep_secondary_when_flag_off():
    cells = [RangeCellSeries(i, np.ones(4), "secondary" if i < 2 else "clutter_only") for i in range(5)]
    assert len(validate_for_detection(cells, exclude_secondary=False)) == 5


def test_too_few_cells():
    with pytest.raises(TooFewCells):
        validate_for_detection([RangeCellSeries(i, np.ones(4)) for i in range(2)])
    cells = [RangeCellSeries(i, np.ones(4), "secondary" if i else "clutter_only") for i in range(4)]
    with pytest.raises(TooFewCells):
        validate_for_detection(cells, exclude_secondary=True)


def test_cell_samples_are_read_only():
    c = RangeCellSeries(0, np.ones(4))
    with pytest.raises(ValueError):
        c.samples[0] = 2
