import numpy as np
import pytest

from _oracles import band_energy_ratio, out_of_band_energy
from tdslbp.errors import InvalidConfig
from tdslbp.lbp import lbp_histogram, tcr
from tdslbp.synth import SynthConfig, generate
from tdslbp.tds import build_tds


def test_seed_1_target_cell_has_most_out_of_band_energy():
    cfg = SynthConfig(rng_seed=1, num_cells=11, target_cell=5)
    cells, manifest = generate(cfg)
    assert manifest.primary_cell == 5
    assert [c.role for c in cells].count("primary") == 1 and cells[5].role == "primary"
    energy = [out_of_band_energy(c.samples, cfg.prf, cfg.clutter_band_halfwidth) for c in cells]
    others = [e for i, e in enumerate(energy) if i != 5]
    assert energy[5] > max(others)


def test_same_seed_is_bit_identical():
    cfg = SynthConfig(rng_seed=42, num_cells=4, samples_per_cell=8192, target_cell=1)
    a, ma = generate(cfg)
    b, mb = generate(cfg)
    assert ma == mb
    for x, y in zip(a, b):
        assert x.samples.tobytes() == y.samples.tobytes()


def test_different_seeds_differ():
    a, _ = generate(SynthConfig(rng_seed=1, num_cells=3, samples_per_cell=1024, target_cell=0))
    b, _ = generate(SynthConfig(rng_seed=2, num_cells=3, samples_per_cell=1024, target_cell=0))
    assert not np.array_equal(a[1].samples, b[1].samples)


def test_target_bursts_do_not_perturb_clutter_streams():
    base = SynthConfig(rng_seed=9, num_cells=5, samples_per_cell=8192, target_cell=2)
    with_target, _ = generate(base)
    without, _ = generate(SynthConfig(**{**base.__dict__, "target_speckle_rate": 0.0}))
    for i in (0, 1, 3, 4):
        assert with_target[i].samples.tobytes() == without[i].samples.tobytes()
    assert not np.array_equal(with_target[2].samples, without[2].samples)


@pytest.mark.slow
def test_zero_rate_target_matches_clutter_band_energy():
    cfg = SynthConfig(rng_seed=0, target_speckle_rate=0.0)
    target, clutter = [], []
    for seed in range(1, 21):
        cells, _ = generate(cfg.with_seed(seed))
        ratios = [band_energy_ratio(c.samples, cfg.prf, cfg.clutter_band_halfwidth) for c in cells]
        target.append(ratios[cfg.target_cell])
        clutter.extend(r for i, r in enumerate(ratios) if i != cfg.target_cell)
    target, clutter = np.array(target), np.array(clutter)
    # Welch t statistic of the target-cell mean against the clutter-cell mean
    se = np.sqrt(target.var(ddof=1) / target.size + clutter.var(ddof=1) / clutter.size)
    assert abs(target.mean() - clutter.mean()) <= 3 * se


@pytest.mark.slow
def test_default_config_lbp_tcr_above_5db_in_95_percent_of_seeds():
    above = 0
    for seed in range(1, 101):
        cfg = SynthConfig(rng_seed=seed)
        cells, _ = generate(cfg)
        hists = [lbp_histogram(build_tds(c)) for c in cells]
        target = hists[cfg.target_cell]
        clutter = [h for i, h in enumerate(hists) if i != cfg.target_cell]
        above += tcr(target, clutter) > 5.0
    assert above >= 95


def test_style_presets():
    a = SynthConfig.style_1993(1)
    b = SynthConfig.style_1998(1)
    assert (a.num_cells, a.samples_per_cell, a.collection_year) == (11, 2**17, "1993-style")
    assert (b.num_cells, b.samples_per_cell, b.collection_year) == (28, 60000, "1998-style")
    assert 0 <= b.target_cell < b.num_cells


@pytest.mark.parametrize(
    "kw",
    [
        {"clutter_band_halfwidth": 500.0},
        {"target_speckle_band": (150.0, 600.0)},
        {"target_speckle_band": (300.0, 200.0)},
        {"target_cell": 11},
        {"target_cell": -1},
        {"target_speckle_rate": -1.0},
        {"secondary_cells": (5,)},
        {"polarization": "XY"},
        {"clutter_drift_period": 0.0},
    ],
)
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        SynthConfig(rng_seed=0, **kw)


def test_samples_are_finite_and_sized():
    cells, manifest = generate(SynthConfig(rng_seed=5, num_cells=3, samples_per_cell=3000, target_cell=0))
    assert all(len(c) == 3000 and np.isfinite(c.samples).all() for c in cells)
    assert manifest.num_cells == 3 and manifest.samples_per_cell == 3000
