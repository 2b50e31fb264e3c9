"""CSR sparse matrices with plain and fused SpMV, plus Matrix Market I/O.

Row sums are accumulated in storage order per row, so results do not depend
on how rows are distributed across workers.  Column indices are 32-bit by
default and widen to 64-bit automatically for very large matrices.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import _kernels
from .errors import MatrixMarketError
from .stencil import StencilOperator, boundary_faces

_COMPILED_COMBOS = {
    (np.dtype(np.float32), np.dtype(np.float32)),
    (np.dtype(np.float64), np.dtype(np.float64)),
    (np.dtype(np.float64), np.dtype(np.complex128)),
    (np.dtype(np.complex128), np.dtype(np.complex128)),
}


class CsrMatrix:
    """Compressed sparse row matrix with real or complex entries.

    Invariants checked on construction: row_ptr starts at 0, is nondecreasing
    and ends at nnz; column indices are in range and strictly increasing
    within each row.
    """

    def __init__(self, nrows: int, ncols: int, row_ptr, col_idx, vals, check: bool = True):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        idx_dtype = np.int64 if ncols > 2**31 - 1 else np.int32
        self.col_idx = np.ascontiguousarray(col_idx, dtype=idx_dtype)
        vals = np.asarray(vals)
        if vals.dtype not in (np.float32, np.float64, np.complex128):
            vals = vals.astype(np.complex128 if np.iscomplexobj(vals) else np.float64)
        self.vals = np.ascontiguousarray(vals)
        if check:
            self._validate()

    def _validate(self):
        nnz = self.vals.shape[0]
        if self.row_ptr.shape != (self.nrows + 1,):
            raise ValueError("row_ptr must have length nrows+1")
        if self.col_idx.shape != (nnz,):
            raise ValueError("col_idx and vals must have equal length")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != nnz:
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if nnz and (self.col_idx.min() < 0 or self.col_idx.max() >= self.ncols):
            raise ValueError("column index out of range")
        # strictly increasing columns within each row
        if nnz > 1:
            same_row = np.repeat(np.arange(self.nrows), np.diff(self.row_ptr))
            inner = same_row[1:] == same_row[:-1]
            if np.any(inner & (np.diff(self.col_idx.astype(np.int64)) <= 0)):
                raise ValueError("column indices must be strictly increasing within a row")

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])

    @property
    def n(self) -> int:
        if self.nrows != self.ncols:
            raise ValueError("operator dimension requires a square matrix")
        return self.nrows

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals, sum_duplicates: bool = False):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows) and sum_duplicates:
            key_same = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if key_same.any():
                group = np.concatenate([[0], np.cumsum(~key_same)])
                ngroups = group[-1] + 1
                out_vals = np.zeros(ngroups, dtype=vals.dtype)
                np.add.at(out_vals, group, vals)
                firsts = np.concatenate([[True], ~key_same])
                rows, cols, vals = rows[firsts], cols[firsts], out_vals
        row_ptr = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(nrows, ncols, row_ptr, cols, vals)

    @classmethod
    def identity(cls, n: int, dtype=np.float64):
        return cls(
            n, n, np.arange(n + 1, dtype=np.int64), np.arange(n), np.ones(n, dtype=dtype)
        )

    @classmethod
    def from_dense(cls, m: np.ndarray):
        m = np.asarray(m)
        rows, cols = np.nonzero(m)
        return cls.from_coo(m.shape[0], m.shape[1], rows, cols, m[rows, cols])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols), dtype=self.vals.dtype)
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_ptr))
        out[rows, self.col_idx] = self.vals
        return out

    def conj_transpose(self) -> "CsrMatrix":
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_ptr))
        return CsrMatrix.from_coo(
            self.ncols, self.nrows, self.col_idx, rows, np.conj(self.vals)
        )

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.nrows, self.ncols), dtype=self.vals.dtype)
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_ptr))
        hit = rows == self.col_idx
        d[rows[hit]] = self.vals[hit]
        return d

    def row_abs_sums(self) -> np.ndarray:
        """Per-row sums of |a_ij| (exact segment sums, empty rows give 0)."""
        a = np.abs(self.vals)
        if self.nnz == 0:
            return np.zeros(self.nrows)
        padded = np.concatenate([a, [0.0]])
        sums = np.add.reduceat(padded, self.row_ptr[:-1])
        sums[self.row_ptr[1:] == self.row_ptr[:-1]] = 0.0
        return sums

    def storage_bytes(self, index_width: int = 32) -> int:
        """Reported CSR footprint: values + column indices + row pointers."""
        if index_width not in (32, 64):
            raise ValueError("index_width must be 32 or 64")
        ib = index_width // 8
        return self.vals.itemsize * self.nnz + ib * self.nnz + ib * (self.nrows + 1)

    # flat-vector protocol shared with the stencil operators
    def fused_apply_flat(self, alpha, beta, x: np.ndarray) -> np.ndarray:
        return fused_spmv(self, alpha, beta, x)

    def __repr__(self):
        return f"CsrMatrix({self.nrows}x{self.ncols}, nnz={self.nnz}, dtype={self.vals.dtype})"


def csr_storage_bytes(nrows: int, nnz: int, value_bytes: int = 8, index_width: int = 32) -> int:
    """Storage model for a CSR matrix that is not materialized."""
    ib = index_width // 8
    return value_bytes * nnz + ib * nnz + ib * (nrows + 1)


def _run_kernel(a: CsrMatrix, alpha, beta, x: np.ndarray, use_beta: bool, backend: str):
    out_dtype = np.result_type(a.vals.dtype, x.dtype, type(alpha), type(beta))
    if out_dtype == np.complex64:
        out_dtype = np.dtype(np.complex128)
    y = np.empty(a.nrows, dtype=out_dtype)
    kern = _kernels.get_kernels(backend)
    combo = (a.vals.dtype, np.dtype(out_dtype))
    if kern.backend_name == "compiled" and combo not in _COMPILED_COMBOS:
        kern = _kernels.get_kernels("python")
    xx = np.ascontiguousarray(x, dtype=out_dtype)
    kern.csr_fused(a.nrows, a.row_ptr, a.col_idx, a.vals, xx, y, alpha, beta, use_beta)
    return y


def spmv(a: CsrMatrix, x, backend: str = "auto") -> np.ndarray:
    """y = A x, row sums accumulated in storage order."""
    x = np.asarray(x)
    if x.shape != (a.ncols,):
        raise ValueError(f"vector length {x.shape} does not match ncols={a.ncols}")
    return _run_kernel(a, 1.0, 0.0, x, use_beta=False, backend=backend)


def fused_spmv(a: CsrMatrix, alpha, beta, x, backend: str = "auto") -> np.ndarray:
    """y = alpha A x + beta x in one pass; requires a square matrix."""
    if a.nrows != a.ncols:
        raise ValueError("fused apply requires a square matrix")
    x = np.asarray(x)
    if x.shape != (a.ncols,):
        raise ValueError(f"vector length {x.shape} does not match n={a.ncols}")
    return _run_kernel(a, alpha, beta, x, use_beta=True, backend=backend)


def gershgorin_bounds_csr(a: CsrMatrix, axis: str = "real") -> tuple[float, float]:
    """Projection of the Gershgorin disks on the real or imaginary axis."""
    if a.nrows != a.ncols:
        raise ValueError("Gershgorin bounds require a square matrix")
    if a.nrows == 0:
        return (0.0, 0.0)
    diag = a.diagonal()
    radius = a.row_abs_sums() - np.abs(diag)
    np.maximum(radius, 0.0, out=radius)
    centers = diag.real if axis == "real" else diag.imag
    return float(np.min(centers - radius)), float(np.max(centers + radius))


# ---------------------------------------------------------------------------
# Stencil assembly: explicit matrix + boundary vector such that
# apply(op, u) == A u + b for every u (b == 0 for linear boundaries).

ASSEMBLE_GUARD = 2**22


def assemble_stencil(op: StencilOperator) -> tuple[CsrMatrix, np.ndarray]:
    g = op.grid
    if g.n > ASSEMBLE_GUARD:
        raise ValueError(f"grid too large to assemble (n={g.n} > {ASSEMBLE_GUARD})")
    wx, wy, wz = op.weights()
    shape = g.shape
    n = g.n
    idx3 = np.arange(n, dtype=np.int64).reshape(shape)
    periodic = op.bc.kind == "none"

    d = op.coeff_values("f64")
    rowscale = np.ones(n) if d is None else d.reshape(n).copy()

    rows = [np.arange(n, dtype=np.int64)]
    cols = [np.arange(n, dtype=np.int64)]
    vals = [np.full(n, 2.0 * (wx + wy + wz)) * rowscale]

    def axis_entries(axis_len, w, axis):
        if w == 0.0:
            return
        for step in (-1, +1):
            if periodic:
                nb = np.roll(idx3, -step, axis=axis)
                r = idx3.reshape(n)
                c = nb.reshape(n)
            else:
                sl_keep = [slice(None)] * 3
                sl_nb = [slice(None)] * 3
                if step == -1:
                    sl_keep[axis] = slice(1, None)
                    sl_nb[axis] = slice(None, -1)
                else:
                    sl_keep[axis] = slice(None, -1)
                    sl_nb[axis] = slice(1, None)
                r = idx3[tuple(sl_keep)].reshape(-1)
                c = idx3[tuple(sl_nb)].reshape(-1)
            rows.append(r)
            cols.append(c)
            vals.append(-w * rowscale[r])

    axis_entries(g.nz, wz, 0)
    axis_entries(g.ny, wy, 1)
    axis_entries(g.nx, wx, 2)

    mat = CsrMatrix.from_coo(
        n,
        n,
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(vals),
        sum_duplicates=True,
    )

    b = np.zeros(n)
    if op.bc.kind == "function":
        fx_lo, fx_hi, fy_lo, fy_hi, fz_lo, fz_hi = boundary_faces(op, np.float64)
        b3 = b.reshape(shape)
        if wx:
            b3[:, :, 0] -= wx * fx_lo
            b3[:, :, -1] -= wx * fx_hi
        if wy:
            b3[:, 0, :] -= wy * fy_lo
            b3[:, -1, :] -= wy * fy_hi
        if wz:
            b3[0, :, :] -= wz * fz_lo
            b3[-1, :, :] -= wz * fz_hi
        b *= rowscale
    return mat, b


# ---------------------------------------------------------------------------
# Matrix Market coordinate format.

_MM_FIELDS = ("real", "integer", "complex", "pattern")
_MM_SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


def read_matrix_market(path) -> CsrMatrix:
    """Parse a coordinate-format .mtx file; symmetric storage is expanded.

    Errors (malformed header, out-of-range or duplicate entries, symmetry
    violations) carry the 1-based line number.
    """
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("empty file", line=1)
    head = lines[0].strip().split()
    if len(head) != 5 or head[0] != "%%MatrixMarket":
        raise MatrixMarketError(
            "header must be '%%MatrixMarket matrix coordinate <field> <symmetry>'", line=1
        )
    obj, fmt, field_tag, symmetry = (t.lower() for t in head[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format {obj!r} {fmt!r}", line=1)
    if field_tag not in _MM_FIELDS:
        raise MatrixMarketError(f"unknown field {field_tag!r}", line=1)
    if symmetry not in _MM_SYMMETRIES:
        raise MatrixMarketError(f"unknown symmetry {symmetry!r}", line=1)

    lineno = 1
    nrows = ncols = nnz_decl = None
    for lineno in range(2, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError("size line must be 'nrows ncols nnz'", line=lineno)
        try:
            nrows, ncols, nnz_decl = (int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError("size line must be integer", line=lineno) from None
        break
    if nrows is None:
        raise MatrixMarketError("missing size line", line=len(lines))
    if nrows < 0 or ncols < 0 or nnz_decl < 0:
        raise MatrixMarketError("negative dimension", line=lineno)
    if symmetry != "general" and nrows != ncols:
        raise MatrixMarketError(f"{symmetry} matrix must be square", line=lineno)

    complex_vals = field_tag == "complex"
    ri, ci = [], []
    vv = []
    entry_lines = []
    count = 0
    for ln in range(lineno + 1, len(lines) + 1):
        s = lines[ln - 1].strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        count += 1
        if count > nnz_decl:
            raise MatrixMarketError(f"more than the declared {nnz_decl} entries", line=ln)
        try:
            i = int(parts[0]) - 1
            j = int(parts[1]) - 1
        except (ValueError, IndexError):
            raise MatrixMarketError("entry must start with two integer indices", line=ln) from None
        if not (0 <= i < nrows and 0 <= j < ncols):
            raise MatrixMarketError(f"index ({i + 1},{j + 1}) out of bounds", line=ln)
        try:
            if complex_vals:
                if len(parts) != 4:
                    raise MatrixMarketError("complex entry needs 're im'", line=ln)
                v = complex(float(parts[2]), float(parts[3]))
            elif field_tag == "pattern":
                # pattern+values extension: an optional third column is a value
                v = float(parts[2]) if len(parts) >= 3 else 1.0
            else:
                if len(parts) != 3:
                    raise MatrixMarketError("entry needs exactly one value", line=ln)
                v = float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"bad numeric value in {s!r}", line=ln) from None
        if symmetry != "general" and i < j:
            raise MatrixMarketError(
                f"{symmetry} storage requires lower-triangle entries (got row {i + 1} < col {j + 1})",
                line=ln,
            )
        if symmetry == "hermitian" and i == j and complex_vals and v.imag != 0.0:
            raise MatrixMarketError("hermitian diagonal must be real", line=ln)
        ri.append(i)
        ci.append(j)
        vv.append(v)
        entry_lines.append(ln)
    if count != nnz_decl:
        raise MatrixMarketError(
            f"declared {nnz_decl} entries but found {count}", line=len(lines)
        )

    ri = np.asarray(ri, dtype=np.int64)
    ci = np.asarray(ci, dtype=np.int64)
    vv = np.asarray(vv, dtype=np.complex128 if complex_vals else np.float64)
    if count:
        order = np.lexsort((ci, ri))
        dup = (np.diff(ri[order]) == 0) & (np.diff(ci[order]) == 0)
        if dup.any():
            k = int(np.argmax(dup)) + 1
            bad_line = entry_lines[int(order[k])]
            raise MatrixMarketError(
                f"duplicate entry ({ri[order[k]] + 1},{ci[order[k]] + 1})", line=bad_line
            )

    if symmetry != "general":
        off = ri != ci
        mi, mj, mv = ci[off], ri[off], vv[off]
        if symmetry == "hermitian":
            mv = np.conj(mv)
        elif symmetry == "skew-symmetric":
            mv = -mv
        ri = np.concatenate([ri, mi])
        ci = np.concatenate([ci, mj])
        vv = np.concatenate([vv, mv])

    return CsrMatrix.from_coo(nrows, ncols, ri, ci, vv)


def write_matrix_market(a: CsrMatrix, path, comment: Optional[str] = None) -> None:
    """Write in coordinate format with 17-significant-digit values."""
    complex_vals = np.iscomplexobj(a.vals)
    field_tag = "complex" if complex_vals else "real"
    rows = np.repeat(np.arange(a.nrows), np.diff(a.row_ptr))
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field_tag} general\n")
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"{a.nrows} {a.ncols} {a.nnz}\n")
        if complex_vals:
            for r, c, v in zip(rows, a.col_idx, a.vals):
                fh.write(f"{r + 1} {c + 1} {v.real:.17g} {v.imag:.17g}\n")
        else:
            for r, c, v in zip(rows, a.col_idx, a.vals):
                fh.write(f"{r + 1} {c + 1} {v:.17g}\n")
