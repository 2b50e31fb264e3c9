import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expstencil.errors import EvaluationError, GridMismatchError
from expstencil.grid import (
    Field,
    Grid3D,
    eval_on_grid,
    linear_index,
    read_field_binary,
    read_field_csv,
    write_field_binary,
    write_field_csv,
    zeros_field,
)


def test_linear_index_examples():
    g = Grid3D(4, 4, 4)
    assert linear_index(g, 0, 0, 0) == 0
    assert linear_index(g, 3, 3, 3) == 63
    assert linear_index(g, 1, 2, 3) == 1 + 4 * (2 + 4 * 3) == 57


def test_linear_index_out_of_range():
    g = Grid3D(4, 4, 4)
    for bad in [(-1, 0, 0), (4, 0, 0), (0, 4, 0), (0, 0, 4)]:
        with pytest.raises(IndexError):
            linear_index(g, *bad)


@given(
    st.integers(1, 6), st.integers(1, 6), st.integers(1, 6)
)
@settings(max_examples=30, deadline=None)
def test_linear_index_bijection(nx, ny, nz):
    g = Grid3D(nx, ny, nz)
    seen = {
        linear_index(g, ix, iy, iz)
        for iz in range(nz)
        for iy in range(ny)
        for ix in range(nx)
    }
    assert seen == set(range(g.n))


def test_spacing_per_axis():
    g = Grid3D(3, 7, 1)
    assert g.dx == 1.0 / 4
    assert g.dy == 1.0 / 8
    assert g.dz == 1.0 / 2


def test_eval_constant():
    g = Grid3D(4, 3, 2)
    f = eval_on_grid(g, lambda x, y, z: 1.0)
    assert np.all(f.values == 1.0)


def test_eval_x_coordinate():
    g = Grid3D(3, 1, 1)
    f = eval_on_grid(g, lambda x, y, z: x)
    assert np.allclose(f.values, [0.25, 0.5, 0.75])


def test_eval_boundary_function_value():
    # sin(pi z) exp(-x y) at the midpoint (0.5, 0.5, 0.5)
    g = Grid3D(1, 1, 1)
    f = eval_on_grid(g, lambda x, y, z: np.sin(np.pi * z) * np.exp(-x * y))
    expected = math.sin(math.pi / 2) * math.exp(-0.25)
    assert f.values[0] == pytest.approx(expected, rel=1e-15)
    assert f.values[0] == pytest.approx(0.7788, abs=1e-4)


def test_eval_pointwise_fallback():
    g = Grid3D(3, 3, 3)
    f = eval_on_grid(g, lambda x, y, z: math.sin(x) + y)  # rejects arrays
    ref = eval_on_grid(g, lambda x, y, z: np.sin(x) + y)
    assert np.allclose(f.values, ref.values)


def test_eval_nonfinite_names_point():
    g = Grid3D(3, 3, 3)
    with np.errstate(divide="ignore"):
        with pytest.raises(EvaluationError, match=r"ix=0,iy=0,iz=0"):
            eval_on_grid(g, lambda x, y, z: 1.0 / (x - 0.25))


def test_reflection_consistency():
    g = Grid3D(5, 4, 3)
    f = eval_on_grid(g, lambda x, y, z: x + 2 * y + 3 * z)
    r = eval_on_grid(g, lambda x, y, z: (1 - x) + 2 * y + 3 * z)
    assert np.allclose(f.as3d[:, :, ::-1], r.as3d)


def test_field_length_checked():
    g = Grid3D(2, 2, 2)
    with pytest.raises(GridMismatchError):
        Field(g, np.zeros(7))


@pytest.mark.parametrize("kind", ["f32", "f64", "c128"])
def test_binary_roundtrip(tmp_path, kind):
    g = Grid3D(4, 3, 2)
    rng = np.random.default_rng(5)
    vals = rng.standard_normal(g.n)
    if kind == "c128":
        vals = vals + 1j * rng.standard_normal(g.n)
    f = Field(g, vals.astype({"f32": np.float32, "f64": np.float64, "c128": np.complex128}[kind]))
    path = tmp_path / "field.bin"
    write_field_binary(f, path)
    back = read_field_binary(path)
    assert back.grid == g
    assert back.kind == kind
    assert np.array_equal(back.values, f.values)


def test_binary_truncated(tmp_path):
    g = Grid3D(4, 3, 2)
    path = tmp_path / "field.bin"
    write_field_binary(zeros_field(g), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(EvaluationError, match="bytes"):
        read_field_binary(path)


@pytest.mark.parametrize("kind", ["f64", "c128"])
def test_csv_roundtrip(tmp_path, kind):
    g = Grid3D(3, 2, 2)
    rng = np.random.default_rng(6)
    vals = rng.standard_normal(g.n)
    if kind == "c128":
        vals = vals + 1j * rng.standard_normal(g.n)
    f = Field(g, vals.astype(np.complex128 if kind == "c128" else np.float64))
    path = tmp_path / "field.csv"
    write_field_csv(f, path)
    back = read_field_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
