import numpy as np
import pytest

from gnlm.metrics import (
    DegenerateRegionError,
    RegionRect,
    cooccurrence,
    enl,
    homogeneity,
    metrics_report,
    psnr,
    quantize,
    ratio_image,
    ris,
    ris_from_joint,
)


def test_enl_of_gamma_field():
    rng = np.random.default_rng(0)
    for looks in (1, 4):
        z = rng.gamma(looks, 1.0 / looks, (200, 200))
        assert enl(z) == pytest.approx(looks, rel=0.05)


def test_enl_region_and_constant():
    img = np.ones((20, 20))
    img[:, 10:] = np.random.default_rng(1).gamma(1.0, 1.0, (20, 10))
    with pytest.raises(DegenerateRegionError):
        enl(img, RegionRect(0, 0, 10, 20))
    assert enl(img, RegionRect(10, 0, 10, 20)) == pytest.approx(enl(img[:, 10:]))


def test_region_parse_and_check():
    r = RegionRect.parse("3,4,10,12")
    assert r == RegionRect(3, 4, 10, 12)
    with pytest.raises(ValueError):
        RegionRect.parse("1,2,3")
    with pytest.raises(ValueError):
        r.check((10, 10))
    with pytest.raises(ValueError):
        RegionRect(0, 0, 3, 3).check((10, 10))
    with pytest.raises(ValueError):
        RegionRect(-1, 0, 5, 5).check((10, 10))


def test_ratio_image():
    z = np.array([[1.0, 2.0], [0.0, 4.0]])
    x = np.array([[1.0, 1.0], [1.0, 0.0]])
    r = ratio_image(z, x)
    assert r.values[0, 1] == 2.0
    assert r.values[1, 0] > 0
    assert np.isfinite(r.values).all()
    with pytest.raises(ValueError):
        ratio_image(z, x[:1])
    with pytest.raises(ValueError):
        ratio_image(z, x, epsilon=0.0)


def test_iid_ratio_scores_near_zero():
    rng = np.random.default_rng(2)
    for looks in (1, 4):
        assert abs(ris(rng.gamma(looks, 1.0 / looks, (1024, 1024)))) < 0.5


def test_structured_ratio_scores_high():
    rng = np.random.default_rng(3)
    r = np.kron(rng.gamma(1.0, 1.0, (32, 32)), np.ones((8, 8)))
    assert ris(r) > 50


def test_ris_identity_and_constant():
    # p equal to the product of its marginals gives exactly 0
    m = np.array([0.1, 0.2, 0.3, 0.4])
    assert ris_from_joint(np.outer(m, m)) == pytest.approx(0.0, abs=1e-12)
    assert ris_from_joint(np.diag(m)) > 0
    with pytest.raises(ValueError):
        ris(np.ones((16, 16)))
    with pytest.raises(ValueError):
        ris(np.random.default_rng(0).random((16, 16)), levels=4)


def test_literal_denominator_singular():
    rng = np.random.default_rng(4)
    with pytest.raises(ValueError):
        ris(rng.gamma(1.0, 1.0, (64, 64)), literal=True)
    p = np.zeros((8, 8))
    p[0, 0] = p[7, 7] = 0.5
    # marginals put mass on levels 0 and 7 only; no adjacent-level mass
    h, h0 = homogeneity(p, literal=True)
    assert h == pytest.approx(-1.0) and np.isfinite(h0)


def test_quantize_and_cooccurrence():
    q = quantize(np.arange(100.0).reshape(10, 10), 8)
    assert q.min() == 0 and q.max() == 7
    p = cooccurrence(q, 8)
    assert p.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(p, p.T)
    tiny = np.array([[0, 1], [1, 1]])
    c = cooccurrence(tiny, 2) * 8
    np.testing.assert_allclose(c, [[0, 2], [2, 4]])


def test_psnr():
    ref = np.full((8, 8), 2.0)
    est = ref + 0.2
    assert psnr(ref, est) == pytest.approx(10 * np.log10(4 / 0.04))
    assert psnr(ref, est, peak=1.0) == pytest.approx(10 * np.log10(1 / 0.04))


def test_metrics_report():
    rng = np.random.default_rng(5)
    z = rng.gamma(1.0, 1.0, (32, 32))
    f = np.full((32, 32), 1.0) + 0.01 * rng.random((32, 32))
    rep = metrics_report(z, f, {"a": RegionRect(0, 0, 16, 16)}, predictor_count=np.array([[1, 5], [9, 2]]))
    assert set(rep) == {"enl", "enl_original", "ris", "levels", "predictor_count"}
    assert rep["enl"]["a"] > rep["enl_original"]["a"]
    assert rep["predictor_count"]["unfiltered_fraction"] == 0.25
