import math

import numpy as np
import pytest
from scipy import ndimage

from scusum import InvalidArgumentError, UnsupportedSizeError
from scusum.simulate import (MAX_EXPCOV_CELLS, SimConfig, exp_covariance, gen_expcov,
                             gen_iid, generate, lh_mask)


def test_canonical_mask():
    m = lh_mask()
    assert m.count == 1288
    assert 1200 <= m.count <= 1400
    _, n_components = ndimage.label(m.signal)
    assert n_components == 2
    s = m.signal
    assert not (s[:2].any() or s[-2:].any() or s[:, :2].any() or s[:, -2:].any())


def test_mask_deterministic_and_read_only():
    a, b = lh_mask(), lh_mask()
    assert np.array_equal(a.signal, b.signal)
    with pytest.raises(ValueError):
        a.signal[0, 0] = True


@pytest.mark.parametrize("shape, stroke, count", [((60, 60), 8, 696), ((60, 60), None, 480),
                                                  ((20, 20), None, 62)])
def test_mask_other_sizes(shape, stroke, count):
    m = lh_mask(*shape, stroke=stroke)
    assert m.count == count
    assert ndimage.label(m.signal)[1] == 2


@pytest.mark.parametrize("shape", [(19, 50), (50, 10)])
def test_mask_too_small(shape):
    with pytest.raises(InvalidArgumentError):
        lh_mask(*shape)


def test_mask_stroke_validation():
    with pytest.raises(InvalidArgumentError):
        lh_mask(100, 100, stroke=0)
    with pytest.raises(InvalidArgumentError):
        lh_mask(30, 30, stroke=12)


def test_sim_config_validation():
    with pytest.raises(InvalidArgumentError):
        SimConfig(noise="ar1")
    with pytest.raises(InvalidArgumentError):
        SimConfig(noise="expcov")
    with pytest.raises(InvalidArgumentError):
        SimConfig(mu0=1.0, mu1=0.0)


def test_iid_means():
    field, truth = gen_iid(SimConfig(mu1=2.0, seed=3))
    x = field.values
    n_sig = truth.count
    assert abs(x[truth.signal].mean() - 2.0) < 3 / math.sqrt(n_sig)
    assert abs(x[~truth.signal].mean()) < 3 / math.sqrt(x.size - n_sig)
    assert abs(x[~truth.signal].std() - 1.0) < 0.05


def test_iid_deterministic():
    a, _ = generate(SimConfig(seed=11))
    b, _ = generate(SimConfig(seed=11))
    c, _ = generate(SimConfig(seed=12))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_zero_signal_gives_pure_noise_mean():
    field, truth = gen_iid(SimConfig(mu1=0.0, seed=1))
    assert abs(field.values[truth.signal].mean()) < 3 / math.sqrt(truth.count)


def test_exp_covariance_values():
    assert exp_covariance(1.0, 0.3) == pytest.approx(0.035673993347252395, rel=1e-12)
    assert exp_covariance(1.0, 0.1) == pytest.approx(4.5399929762484854e-05, rel=1e-12)
    assert exp_covariance(0.0, 0.5) == 1.0


def test_expcov_size_cap():
    with pytest.raises(UnsupportedSizeError):
        gen_expcov(SimConfig(rows=101, cols=100, noise="expcov", scale=0.3))
    assert MAX_EXPCOV_CELLS == 10_000


def test_expcov_marginal_variance_and_neighbour_correlation():
    r = 1.0
    draws = np.stack([
        gen_expcov(SimConfig(rows=30, cols=30, mu1=0.0, noise="expcov", scale=r, seed=s))[0].values
        for s in range(40)
    ])
    # pooled across cells and draws
    assert abs(draws.var() - 1.0) < 0.05
    x = draws - draws.mean()
    horiz = np.mean(x[:, :, 1:] * x[:, :, :-1]) / draws.var()
    diag = np.mean(x[:, 1:, 1:] * x[:, :-1, :-1]) / draws.var()
    assert horiz == pytest.approx(math.exp(-1 / r), abs=0.03)
    assert diag == pytest.approx(math.exp(-math.sqrt(2) / r), abs=0.03)


def test_expcov_deterministic_and_shifted():
    cfg = SimConfig(rows=25, cols=25, mu1=1.5, noise="expcov", scale=0.5, seed=7)
    a, truth = generate(cfg)
    b, _ = generate(cfg)
    assert np.array_equal(a.values, b.values)
    base, _ = generate(SimConfig(rows=25, cols=25, mu1=0.0, noise="expcov", scale=0.5, seed=7))
    assert np.allclose(a.values - base.values, 1.5 * truth.signal, atol=1e-12)
