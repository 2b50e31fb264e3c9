import math

import numpy as np
import pytest

from expstencil._kernels import available_backends
from expstencil.errors import BoundaryKindError, GridMismatchError
from expstencil.expr import parse_expression
from expstencil.grid import Field, Grid3D, eval_on_grid, linear_index, zeros_field
from expstencil.sparse import spmv
from expstencil.stencil import (
    BoundaryCondition,
    StencilOperator,
    apply,
    apply_affine_split,
    boundary_source_field,
    fused_apply,
    gershgorin_bounds,
)
from oracles import dense_stencil

BOUNDARIES = {
    "none": BoundaryCondition.none(),
    "homogeneous": BoundaryCondition.homogeneous(),
    "poly": BoundaryCondition.function(parse_expression("z*(1-z)*x*y"), "z*(1-z)*x*y"),
    "trig": BoundaryCondition.function(
        parse_expression("sin(pi*z)*exp(-x*y)"), "sin(pi*z)*exp(-x*y)"
    ),
}


def coeff_d(x, y, z):
    return 1.0 / np.sqrt(1.0 + x * x + y * y)


def center_impulse(g: Grid3D) -> Field:
    u = zeros_field(g)
    u.values[linear_index(g, g.nx // 2, g.ny // 2, g.nz // 2)] = 1.0
    return u


def test_zero_field_maps_to_zero():
    g = Grid3D(4, 4, 4)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    assert np.all(apply(op, zeros_field(g)).values == 0.0)


def test_center_impulse_values():
    g = Grid3D(3, 3, 3)  # dx = 1/4
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    y = apply(op, center_impulse(g)).values
    c = linear_index(g, 1, 1, 1)
    assert y[c] == 96.0  # 6/dx^2
    for nb in [(0, 1, 1), (2, 1, 1), (1, 0, 1), (1, 2, 1), (1, 1, 0), (1, 1, 2)]:
        assert y[linear_index(g, *nb)] == -16.0
    assert np.count_nonzero(y) == 7


def test_center_impulse_with_coefficient():
    g = Grid3D(3, 3, 3)
    plain = apply(StencilOperator(g, BoundaryCondition.homogeneous()), center_impulse(g)).values
    scaled = apply(
        StencilOperator(g, BoundaryCondition.homogeneous(), coeff=coeff_d), center_impulse(g)
    ).values
    d = eval_on_grid(g, coeff_d).values
    assert np.allclose(scaled, plain * d, rtol=1e-14)
    c = linear_index(g, 1, 1, 1)
    assert scaled[c] == pytest.approx(96.0 / math.sqrt(1.5), rel=1e-14)
    assert scaled[c] == pytest.approx(78.384, abs=1e-3)


def test_fused_identity_and_apply_bitwise():
    g = Grid3D(5, 4, 3)
    rng = np.random.default_rng(2)
    x = Field(g, rng.standard_normal(g.n))
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    assert np.array_equal(fused_apply(op, 0.0, 1.0, x).values, x.values)
    assert np.array_equal(fused_apply(op, 1.0, 0.0, x).values, apply(op, x).values)


def test_fused_center_impulse():
    g = Grid3D(3, 3, 3)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    y = fused_apply(op, 2.0, 1.0, center_impulse(g)).values
    assert y[linear_index(g, 1, 1, 1)] == 193.0  # 2*96 + 1


def test_fused_rejects_function_boundary():
    g = Grid3D(3, 3, 3)
    op = StencilOperator(g, BOUNDARIES["poly"])
    with pytest.raises(BoundaryKindError, match="affine"):
        fused_apply(op, 1.0, 0.0, zeros_field(g))


def test_grid_mismatch():
    op = StencilOperator(Grid3D(3, 3, 3), BoundaryCondition.homogeneous())
    with pytest.raises(GridMismatchError):
        apply(op, zeros_field(Grid3D(4, 3, 3)))


@pytest.mark.parametrize("dims", [(5, 5, 5), (9, 9, 9), (7, 5, 3)])
@pytest.mark.parametrize("bc_name", list(BOUNDARIES))
@pytest.mark.parametrize("traversal", ["naive", "tiled"])
def test_oracle_equivalence_f64(dims, bc_name, traversal):
    g = Grid3D(*dims)
    bc = BOUNDARIES[bc_name]
    op = StencilOperator(g, bc, traversal=traversal, tile=(4, 3))
    mat, b = dense_stencil(g, bc.kind, boundary_fn=bc.fn)
    rng = np.random.default_rng(33)
    u = Field(g, rng.standard_normal(g.n))
    ref = mat @ u.values + b
    got = apply(op, u).values
    assert np.max(np.abs(got - ref)) <= 1e-13 * np.max(np.abs(ref))


@pytest.mark.parametrize("bc_name", list(BOUNDARIES))
def test_oracle_equivalence_f32(bc_name):
    g = Grid3D(7, 5, 3)
    bc = BOUNDARIES[bc_name]
    op = StencilOperator(g, bc)
    mat, b = dense_stencil(g, bc.kind, boundary_fn=bc.fn)
    rng = np.random.default_rng(34)
    u32 = rng.standard_normal(g.n).astype(np.float32)
    ref = mat @ u32.astype(np.float64) + b
    got = apply(op, Field(g, u32)).values.astype(np.float64)
    assert np.max(np.abs(got - ref)) <= 1e-5 * np.max(np.abs(ref))


def test_oracle_equivalence_with_coefficient():
    g = Grid3D(6, 5, 4)
    op = StencilOperator(g, BoundaryCondition.homogeneous(), coeff=coeff_d)
    mat, _ = dense_stencil(g, "homogeneous", coeff=coeff_d)
    rng = np.random.default_rng(35)
    u = Field(g, rng.standard_normal(g.n))
    ref = mat @ u.values
    got = apply(op, u).values
    assert np.max(np.abs(got - ref)) <= 1e-13 * np.max(np.abs(ref))


@pytest.mark.parametrize("backend", available_backends())
@pytest.mark.parametrize("bc_name", list(BOUNDARIES))
def test_traversal_invariance_bitwise(backend, bc_name):
    g = Grid3D(9, 7, 5)
    rng = np.random.default_rng(4)
    u = Field(g, rng.standard_normal(g.n))
    ops = [
        StencilOperator(g, BOUNDARIES[bc_name], traversal=t, tile=(4, 2), backend=backend)
        for t in ("naive", "tiled")
    ]
    a, b = (apply(op, u).values for op in ops)
    assert np.array_equal(a, b)


def test_linearity_homogeneous():
    g = Grid3D(6, 6, 6)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    rng = np.random.default_rng(8)
    u = rng.standard_normal(g.n)
    v = rng.standard_normal(g.n)
    a, b = 1.7, -0.3
    lhs = op.fused_apply_flat(1.0, 0.0, a * u + b * v)
    rhs = a * op.fused_apply_flat(1.0, 0.0, u) + b * op.fused_apply_flat(1.0, 0.0, v)
    scale = (np.linalg.norm(u) + np.linalg.norm(v)) / (g.dx * g.dx)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_assembled_symmetric_psd():
    g = Grid3D(5, 5, 5)
    mat, _ = dense_stencil(g, "homogeneous")
    assert np.allclose(mat, mat.T)
    assert np.linalg.eigvalsh(mat).min() >= -1e-10


def test_affine_split_contract():
    g = Grid3D(5, 4, 3)
    for name in ("poly", "trig"):
        op = StencilOperator(g, BOUNDARIES[name])
        rng = np.random.default_rng(9)
        u = Field(g, rng.standard_normal(g.n))
        hom, b = apply_affine_split(op, u)
        full = apply(op, u)
        assert np.max(np.abs(hom.values + b.values - full.values)) <= 1e-12 * np.max(
            np.abs(full.values)
        )
        # b is independent of u
        _, b2 = apply_affine_split(op, Field(g, rng.standard_normal(g.n)))
        assert np.array_equal(b.values, b2.values)


def test_affine_split_zero_input_and_zero_function():
    g = Grid3D(4, 4, 4)
    op = StencilOperator(g, BOUNDARIES["poly"])
    hom, b = apply_affine_split(op, zeros_field(g))
    assert np.all(hom.values == 0.0)
    assert np.array_equal(b.values, apply(op, zeros_field(g)).values)

    zero_bc = BoundaryCondition.function(lambda x, y, z: 0.0 * x, "0")
    opz = StencilOperator(g, zero_bc)
    _, bz = apply_affine_split(opz, zeros_field(g))
    assert np.all(bz.values == 0.0)


def test_affine_split_corner_value():
    # at the interior corner (0,0,0), b = -(1/dx^2) * sum of f over the
    # 3 adjacent ghost positions
    g = Grid3D(3, 3, 3)
    fn = BOUNDARIES["poly"].fn
    op = StencilOperator(g, BOUNDARIES["poly"])
    b = boundary_source_field(op).values
    dx = g.dx
    x0 = y0 = z0 = dx  # physical coordinates of the corner point
    expected = -(1.0 / dx**2) * (fn(0.0, y0, z0) + fn(x0, 0.0, z0) + fn(x0, y0, 0.0))
    assert b[linear_index(g, 0, 0, 0)] == pytest.approx(expected, rel=1e-14)


def test_apply_vs_assembled_spmv_cross_route():
    # product-internal dual route: kernel apply vs assembled CSR
    from expstencil.sparse import assemble_stencil

    g = Grid3D(6, 5, 4)
    for name, bc in BOUNDARIES.items():
        op = StencilOperator(g, bc)
        a, b = assemble_stencil(op)
        rng = np.random.default_rng(10)
        u = Field(g, rng.standard_normal(g.n))
        ref = spmv(a, u.values) + b
        got = apply(op, u).values
        assert np.max(np.abs(got - ref)) <= 1e-13 * max(np.max(np.abs(ref)), 1e-300), name


def test_complex_field_apply_matches_parts():
    g = Grid3D(4, 4, 4)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    rng = np.random.default_rng(11)
    z = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    got = op.fused_apply_flat(2.0, 0.5, z)
    re = op.fused_apply_flat(1.0, 0.0, z.real.copy())
    im = op.fused_apply_flat(1.0, 0.0, z.imag.copy())
    assert np.array_equal(got, 2.0 * (re + 1j * im) + 0.5 * z)


def test_degenerate_axes_are_one_dimensional():
    # 3x1x1 grid behaves as the 1D three-point stencil: tridiag(+32, -16)
    g = Grid3D(3, 1, 1)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    u = Field(g, np.array([1.0, 0.0, 0.0]))
    y = apply(op, u).values
    assert np.array_equal(y, [32.0, -16.0, 0.0])


def test_gershgorin_stencil_interval():
    g = Grid3D(3, 1, 1)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    assert gershgorin_bounds(op) == (0.0, 64.0)


def test_gershgorin_periodic():
    g = Grid3D(4, 4, 4)
    op = StencilOperator(g, BoundaryCondition.none())
    lo, hi = gershgorin_bounds(op)
    assert lo == 0.0
    assert hi == pytest.approx(4 * 3 / g.dx**2, rel=1e-14)
