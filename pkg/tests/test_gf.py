"""Field-arithmetic and Reed-Solomon erasure-codec tests."""

import itertools

import numpy as np
import pytest

from dnachannel.gf import GF2w, ReedSolomonErasure, TooManyErasures


@pytest.mark.parametrize("w", range(2, 17))
def test_field_tables_cover_all_nonzero_elements(w):
    f = GF2w(w)
    assert sorted(f.exp.tolist()) == list(range(1, f.order))
    # log and exp are inverse on the multiplicative group
    assert (f.exp[f.log[np.arange(1, f.order)]] == np.arange(1, f.order)).all()


@pytest.mark.parametrize("w", [2, 4, 8, 12, 16])
def test_field_axioms_sampled(w):
    f = GF2w(w)
    rng = np.random.default_rng(w)
    a, b, c = rng.integers(0, f.order, size=(3, 500))
    assert (f.mul(a, b) == f.mul(b, a)).all()
    assert (f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))).all()
    # distributivity over the field addition (xor)
    assert (f.mul(a, b ^ c) == (f.mul(a, b) ^ f.mul(a, c))).all()
    nz = np.where(a == 0, 1, a)
    assert (f.mul(nz, f.inv(nz)) == 1).all()
    assert (f.mul(a, 0) == 0).all()


def test_field_inv_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        GF2w(4).inv(np.array([0]))


def test_field_invalid_width():
    with pytest.raises(ValueError):
        GF2w(1)
    with pytest.raises(ValueError):
        GF2w(17)


def test_rs_systematic_prefix():
    rs = ReedSolomonErasure(16, 12, 4)
    data = np.arange(12) % 16
    cw = rs.encode(data)
    assert cw.shape == (16,)
    assert (cw[:12] == data).all()


def test_rs_rate_one_is_identity():
    rs = ReedSolomonErasure(8, 8, 4)
    data = np.arange(8)
    assert (rs.encode(data) == data).all()
    decoded = rs.decode_erasures(data, np.zeros(8, dtype=bool))
    assert (decoded == data).all()


def test_rs_all_four_erasure_patterns_recover():
    rs = ReedSolomonErasure(16, 12, 4)
    rng = np.random.default_rng(3)
    data = rng.integers(0, 16, size=12)
    cw = rs.encode(data)
    for pattern in itertools.combinations(range(16), 4):
        erased = np.zeros(16, dtype=bool)
        erased[list(pattern)] = True
        got = rs.decode_erasures(cw, erased)
        assert (got == data).all()


def test_rs_five_erasures_signal_failure():
    rs = ReedSolomonErasure(16, 12, 4)
    cw = rs.encode(np.arange(12))
    erased = np.zeros(16, dtype=bool)
    erased[:5] = True
    with pytest.raises(TooManyErasures):
        rs.decode_erasures(cw, erased)


@pytest.mark.parametrize("n,k,w", [(16, 12, 4), (255, 200, 8), (256, 230, 8), (20, 7, 5)])
def test_rs_random_erasures_roundtrip(n, k, w):
    rs = ReedSolomonErasure(n, k, w)
    rng = np.random.default_rng(n * 31 + k)
    for _ in range(20):
        data = rng.integers(0, 1 << w, size=k)
        cw = rs.encode(data)
        n_erase = rng.integers(0, n - k + 1)
        erased = np.zeros(n, dtype=bool)
        erased[rng.choice(n, size=n_erase, replace=False)] = True
        # corrupt erased positions to prove they are ignored
        noisy = cw.copy()
        noisy[erased] = rng.integers(0, 1 << w, size=n_erase)
        assert (rs.decode_erasures(noisy, erased) == data).all()


def test_rs_parameter_validation():
    with pytest.raises(ValueError):
        ReedSolomonErasure(17, 4, 4)  # n > 2^w
    with pytest.raises(ValueError):
        ReedSolomonErasure(8, 9, 4)  # k > n
    rs = ReedSolomonErasure(8, 4, 4)
    with pytest.raises(ValueError):
        rs.encode(np.arange(5))  # wrong length
    with pytest.raises(ValueError):
        rs.encode(np.array([0, 1, 2, 99]))  # out of field
