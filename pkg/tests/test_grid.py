import numpy as np
import pytest

from cosmon.grid import GridMismatchError, GridSpec, SpacetimeField


def test_grid_layout():
    g = GridSpec(4.0, 8, 2.0, 10)
    assert g.dt == 0.5 and g.dr == 0.2
    assert g.r[0] == pytest.approx(0.1) and g.r[-1] == pytest.approx(1.9)
    assert g.lam[1] == pytest.approx(2 * np.pi / 4.0)
    with pytest.raises(ValueError):
        GridSpec(4.0, 12, 2.0, 10)


def test_norm_and_inner():
    g = GridSpec(2 * np.pi, 64, 1.0, 100)
    u = g.field(lambda T, R: np.exp(2j * T) * np.ones_like(R))
    # int_0^{2 pi} int_0^1 r dr dt = pi
    assert u.norm2() == pytest.approx(np.pi, rel=1e-12)
    assert u.inner(u).real == pytest.approx(u.norm2())


def test_roundtrip_csv_and_binary(tmp_path):
    g = GridSpec(1.0, 4, 1.0, 8, k=2)
    u = g.field(lambda T, R: T + 1j * R)
    u.to_csv(tmp_path / "u.csv")
    v = SpacetimeField.from_csv(tmp_path / "u.csv", k=2)
    assert np.array_equal(u.values, v.values)
    u.to_binary(tmp_path / "u.bin")
    w = SpacetimeField.from_binary(tmp_path / "u.bin")
    assert np.array_equal(u.values, w.values) and w.k == 2


def test_grid_mismatch():
    g = GridSpec(1.0, 4, 1.0, 8)
    u = GridSpec(1.0, 4, 2.0, 8).zeros()
    with pytest.raises(GridMismatchError):
        u.check_grid(g)
