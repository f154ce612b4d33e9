"""Metric-level differential geometry on a single coordinate chart.

Conventions (fixed once, everything downstream depends on them):

* Christoffel:  Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
* Curvature:    R^l_ijk = d_i Gamma^l_jk - d_j Gamma^l_ik
                + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
* Ricci:        Ric_ij = R^k_kij, so the unit sphere has Ric = +g and the
                hyperbolic plane Ric = -g; the operator raises an index.
* Laplacian:    analyst sign, Delta f = g^{ij} Hess_ij, so Delta(x^2) = 2 on
                the flat line.

Every operator accepts points whose coordinates are floats *or* jets; in the
jet case all internal linear algebra runs generic Gaussian elimination, which
is how gradient-of-Laplacian and similar third-order quantities are obtained
without hand-written index formulas.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import autodiff as ad
from . import expr as ex


class SingularMetricError(ValueError):
    """Metric failed the positive-definiteness gate at an evaluation point."""


# ---------------------------------------------------------------------------
# scalar helpers: entries of matrices may be floats or jets
# ---------------------------------------------------------------------------

def _val(x):
    return x.value if isinstance(x, ad.Jet3) else x


def _d1(x, i):
    return x.partial1(i) if isinstance(x, ad.Jet3) else 0.0


def _d2(x, d, i, j):
    if not isinstance(x, ad.Jet3):
        return 0.0
    alpha = [0] * d
    alpha[i] += 1
    alpha[j] += 1
    return x.partial(alpha)


def solve_generic(A: list, B: list) -> list:
    """Solve A X = B by Gauss-Jordan with value-part pivoting; scalars may be jets."""
    n = len(A)
    m = len(B[0])
    M = [list(A[r]) + list(B[r]) for r in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(ad.real_value(M[r][col])))
        if abs(ad.real_value(M[piv][col])) < 1e-300:
            raise SingularMetricError("singular matrix in generic solve")
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
        ipiv = ad.inv(M[col][col])
        M[col] = [entry * ipiv for entry in M[col]]
        for r in range(n):
            if r != col:
                factor = M[r][col]
                if isinstance(factor, ad.Jet3) or factor != 0.0:
                    M[r] = [a - factor * b for a, b in zip(M[r], M[col])]
    return [row[n:] for row in M]


def invert_generic(A: list) -> list:
    n = len(A)
    eye = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    return solve_generic(A, eye)


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameInverseEntries:
    """Metric entries induced by declaring a frame orthonormal: g = (E^T E)^-1."""

    var_names: tuple[str, ...]
    frame: tuple[tuple[ex.Expression, ...], ...]  # frame[a][k]: coord component k of field a

    def __call__(self, point: Sequence) -> list:
        n = len(self.var_names)
        bindings = dict(zip(self.var_names, point))
        E = [[ex.evaluate(c, bindings) for c in row] for row in self.frame]
        S = [[sum(E[a][i] * E[a][j] for a in range(n)) for j in range(n)] for i in range(n)]
        return invert_generic(S)


@dataclass(frozen=True)
class MetricField:
    """Dimension plus a point -> symmetric matrix map given by entry expressions."""

    dim: int
    var_names: tuple[str, ...]
    entries: tuple[tuple[ex.Expression, ...], ...] | None = None
    validity: tuple[ex.Expression, ...] = ()
    name: str = ""
    entry_source: FrameInverseEntries | None = None

    def __post_init__(self):
        if len(self.var_names) != self.dim:
            raise ValueError("variable count must equal dim")
        if (self.entries is None) == (self.entry_source is None):
            raise ValueError("exactly one of entries/entry_source required")
        if self.entries is not None:
            if len(self.entries) != self.dim or any(len(r) != self.dim for r in self.entries):
                raise ValueError("entry matrix must be dim x dim")
            allowed = set(self.var_names)
            for row in self.entries:
                for e in row:
                    extra = ex.free_vars(e) - allowed
                    if extra:
                        raise ValueError(f"metric entry uses unknown variables {sorted(extra)}")

    # -- construction ---------------------------------------------------------

    @staticmethod
    def from_entries(entries, var_names, validity=(), name="") -> "MetricField":
        parsed = tuple(
            tuple(ex.parse(e) if isinstance(e, str) else e for e in row) for row in entries
        )
        val = tuple(ex.parse(v) if isinstance(v, str) else v for v in validity)
        return MetricField(len(parsed), tuple(var_names), parsed, val, name)

    @staticmethod
    def euclidean(n: int, var_names: Sequence[str] | None = None) -> "MetricField":
        names = tuple(var_names) if var_names else tuple(f"x{i+1}" for i in range(n))
        rows = [[ex.Const(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
        return MetricField(n, names, tuple(tuple(r) for r in rows), (), f"euclidean({n})")

    @staticmethod
    def sphere2() -> "MetricField":
        return MetricField.from_entries(
            [["1", "0"], ["0", "sin(theta)^2"]],
            ("theta", "phi"),
            validity=("sin(theta)-0.001",),
            name="sphere2",
        )

    @staticmethod
    def hyperbolic2() -> "MetricField":
        return MetricField.from_entries(
            [["1/y^2", "0"], ["0", "1/y^2"]],
            ("x", "y"),
            validity=("y-0.001",),
            name="hyperbolic2",
        )

    @staticmethod
    def from_orthonormal_frame(frame, var_names, validity=(), name="") -> "MetricField":
        rows = tuple(
            tuple(ex.parse(c) if isinstance(c, str) else c for c in row) for row in frame
        )
        val = tuple(ex.parse(v) if isinstance(v, str) else v for v in validity)
        return MetricField(
            len(rows), tuple(var_names), None, val, name,
            FrameInverseEntries(tuple(var_names), rows),
        )

    # -- evaluation -----------------------------------------------------------

    def entries_at(self, point: Sequence) -> list:
        """n x n matrix of scalars (jets when the coordinates are jets)."""
        if self.entry_source is not None:
            return self.entry_source(point)
        bindings = dict(zip(self.var_names, point))
        return [[ex.evaluate(e, bindings) for e in row] for row in self.entries]

    def contains(self, point: Sequence[float]) -> bool:
        bindings = dict(zip(self.var_names, (float(x) for x in point)))
        try:
            return all(ex.evaluate(v, bindings) > 0.0 for v in self.validity)
        except ex.EvalError:
            return False


# ---------------------------------------------------------------------------
# scalar and vector fields over a chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExprField:
    """Expression as a scalar field over named chart coordinates."""

    expression: ex.Expression
    var_names: tuple[str, ...]

    def __call__(self, point: Sequence):
        return ex.evaluate(self.expression, dict(zip(self.var_names, point)))


ScalarField = Union[ex.Expression, Callable]


def as_scalar_field(f: ScalarField, g: MetricField) -> Callable:
    if isinstance(f, (ex.Const, ex.Var, ex.Unary, ex.Binary)):
        extra = ex.free_vars(f) - set(g.var_names)
        if extra:
            raise ValueError(f"field uses variables {sorted(extra)} outside the chart")
        return ExprField(f, g.var_names)
    if callable(f):
        return f
    raise TypeError(f"not a scalar field: {f!r}")


@dataclass(frozen=True)
class TangentVector:
    point: tuple[float, ...]
    components: tuple[float, ...]

    def __post_init__(self):
        if len(self.point) != len(self.components):
            raise ValueError("component count must match the chart dimension")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float)


@dataclass(frozen=True)
class CurvatureSlice:
    point: tuple[float, ...]
    riemann: np.ndarray       # R[l, i, j, k]
    ricci: np.ndarray         # Ric[i, j]
    ricci_operator: np.ndarray  # Op[i, j] = g^{ik} Ric_kj


# ---------------------------------------------------------------------------
# per-point evaluation context
# ---------------------------------------------------------------------------

class MetricAt:
    """Metric data at one point: entry jets, inverse, Christoffels, derivatives.

    The point may have float or jet coordinates; every derived array lives at
    the same scalar level as the coordinates.
    """

    def __init__(self, g: MetricField, point: Sequence):
        self.metric = g
        self.point = list(point)
        self.n = g.dim
        if len(self.point) != g.dim:
            raise ValueError(f"point has {len(self.point)} coordinates, metric needs {g.dim}")
        self.pjets = ad.seed(self.point)
        self.G = g.entries_at(self.pjets)
        n = self.n
        value_matrix = np.array(
            [[ad.real_value(_val(self.G[i][j])) for j in range(n)] for i in range(n)]
        )
        try:
            np.linalg.cholesky(value_matrix)
        except np.linalg.LinAlgError:
            raise SingularMetricError(
                f"metric '{g.name or 'anonymous'}' is not positive definite at "
                f"{[ad.real_value(x) for x in self.point]}"
            ) from None
        self.gval = [[_val(self.G[i][j]) for j in range(n)] for i in range(n)]
        self.ginv = invert_generic(self.gval)
        self._gamma = None
        self._dgamma = None

    @property
    def gamma(self) -> list:
        """Gamma[k][i][j], symmetric in (i, j)."""
        if self._gamma is None:
            n = self.n
            G, ginv = self.G, self.ginv
            dg = [[[_d1(G[i][j], m) for j in range(n)] for i in range(n)] for m in range(n)]
            gam = [[[0.0] * n for _ in range(n)] for _ in range(n)]
            for k in range(n):
                for i in range(n):
                    for j in range(i, n):
                        acc = 0.0
                        for l in range(n):
                            acc = acc + ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j])
                        acc = acc * 0.5
                        gam[k][i][j] = acc
                        gam[k][j][i] = acc
            self._gamma = gam
            self._dg = dg
        return self._gamma

    @property
    def dgamma(self) -> list:
        """dGamma[m][k][i][j] = d_m Gamma^k_ij."""
        if self._dgamma is None:
            n = self.n
            _ = self.gamma  # ensures self._dg
            G, ginv, dg = self.G, self.ginv, self._dg
            d2g = [[[[_d2(G[i][j], n, a, b) for j in range(n)] for i in range(n)]
                    for b in range(n)] for a in range(n)]
            # d_m g^{kl} = -g^{ka} (d_m g_ab) g^{bl}
            dginv = []
            for m in range(n):
                dm = [[0.0] * n for _ in range(n)]
                for k in range(n):
                    for l in range(n):
                        acc = 0.0
                        for a in range(n):
                            for b in range(n):
                                acc = acc + ginv[k][a] * dg[m][a][b] * ginv[b][l]
                        dm[k][l] = -acc
                dginv.append(dm)
            out = [[[[0.0] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
            for m in range(n):
                for k in range(n):
                    for i in range(n):
                        for j in range(i, n):
                            acc = 0.0
                            for l in range(n):
                                sym = dg[i][j][l] + dg[j][i][l] - dg[l][i][j]
                                dsym = d2g[m][i][j][l] + d2g[m][j][i][l] - d2g[m][l][i][j]
                                acc = acc + dginv[m][k][l] * sym + ginv[k][l] * dsym
                            acc = acc * 0.5
                            out[m][k][i][j] = acc
                            out[m][k][j][i] = acc
            self._dgamma = out
        return self._dgamma

    def inner(self, X: Sequence, Y: Sequence):
        acc = 0.0
        for i in range(self.n):
            for j in range(self.n):
                acc = acc + self.gval[i][j] * X[i] * Y[j]
        return acc


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def _float_point(p) -> bool:
    return all(isinstance(x, numbers.Real) for x in p)


def christoffel(g: MetricField, p: Sequence) -> np.ndarray:
    """Connection coefficients Gamma[k, i, j] at a float point."""
    ctx = MetricAt(g, p)
    return np.array([[[ad.real_value(x) for x in row] for row in plane]
                     for plane in ctx.gamma])


def riemann_components(ctx: MetricAt) -> list:
    n = ctx.n
    gam, dgam = ctx.gamma, ctx.dgamma
    R = [[[[0.0] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for l in range(n):
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc = dgam[i][l][j][k] - dgam[j][l][i][k]
                    for m in range(n):
                        acc = acc + gam[l][i][m] * gam[m][j][k] - gam[l][j][m] * gam[m][i][k]
                    R[l][i][j][k] = acc
    return R


def riemann(g: MetricField, p: Sequence) -> np.ndarray:
    """Curvature components R[l, i, j, k] at a float point."""
    ctx = MetricAt(g, p)
    R = riemann_components(ctx)
    return np.array([[[[ad.real_value(x) for x in row] for row in plane]
                      for plane in block] for block in R])


def ricci_components(ctx: MetricAt) -> list:
    n = ctx.n
    R = riemann_components(ctx)
    return [[sum((R[k][k][i][j] for k in range(n)), start=0.0) for j in range(n)]
            for i in range(n)]


def ricci(g: MetricField, p: Sequence) -> np.ndarray:
    ctx = MetricAt(g, p)
    return np.array([[ad.real_value(x) for x in row] for row in ricci_components(ctx)])


def ricci_operator_matrix(ctx: MetricAt) -> list:
    n = ctx.n
    ric = ricci_components(ctx)
    return [[sum((ctx.ginv[i][k] * ric[k][j] for k in range(n)), start=0.0)
             for j in range(n)] for i in range(n)]


def ricci_op(g: MetricField, p: Sequence, X) -> TangentVector:
    """Ricci operator applied to a tangent vector: unit sphere gives the identity."""
    ctx = MetricAt(g, p)
    comps = X.components if isinstance(X, TangentVector) else tuple(X)
    op = ricci_operator_matrix(ctx)
    out = [sum(op[i][j] * comps[j] for j in range(ctx.n)) for i in range(ctx.n)]
    return TangentVector(tuple(float(x) for x in p), tuple(ad.real_value(v) for v in out))


def curvature_slice(g: MetricField, p: Sequence) -> CurvatureSlice:
    ctx = MetricAt(g, p)
    R = riemann_components(ctx)
    ric = ricci_components(ctx)
    op = ricci_operator_matrix(ctx)
    conv = ad.real_value
    return CurvatureSlice(
        tuple(float(x) for x in p),
        np.array([[[[conv(x) for x in r2] for r2 in r1] for r1 in r0] for r0 in R]),
        np.array([[conv(x) for x in row] for row in ric]),
        np.array([[conv(x) for x in row] for row in op]),
    )


def gradient_components(g: MetricField, f: ScalarField, p: Sequence) -> list:
    """grad^i = g^{ij} d_j f at a point with scalar (possibly jet) coordinates."""
    field_fn = as_scalar_field(f, g)
    ctx = MetricAt(g, p)
    fj = field_fn(ctx.pjets)
    df = [_d1(fj, i) for i in range(ctx.n)]
    return [sum((ctx.ginv[i][j] * df[j] for j in range(ctx.n)), start=0.0)
            for i in range(ctx.n)]


def gradient(g: MetricField, f: ScalarField, p: Sequence) -> TangentVector:
    comps = gradient_components(g, f, p)
    return TangentVector(tuple(float(x) for x in p),
                         tuple(ad.real_value(c) for c in comps))


def hessian_components(g: MetricField, f: ScalarField, p: Sequence) -> list:
    field_fn = as_scalar_field(f, g)
    ctx = MetricAt(g, p)
    fj = field_fn(ctx.pjets)
    n = ctx.n
    gam = ctx.gamma
    df = [_d1(fj, k) for k in range(n)]
    H = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            acc = _d2(fj, n, i, j)
            for k in range(n):
                acc = acc - gam[k][i][j] * df[k]
            H[i][j] = acc
            H[j][i] = acc
    return H


def hessian(g: MetricField, f: ScalarField, p: Sequence) -> np.ndarray:
    H = hessian_components(g, f, p)
    return np.array([[ad.real_value(x) for x in row] for row in H])


def laplacian_value(g: MetricField, f: ScalarField, p: Sequence):
    ctx_free = hessian_components(g, f, p)
    ctx = MetricAt(g, p)
    n = ctx.n
    acc = 0.0
    for i in range(n):
        for j in range(n):
            acc = acc + ctx.ginv[i][j] * ctx_free[i][j]
    return acc


def laplacian(g: MetricField, f: ScalarField, p: Sequence) -> float:
    return ad.real_value(laplacian_value(g, f, p))


def grad_norm_sq(g: MetricField, f: ScalarField, p: Sequence):
    """|grad f|^2 = g^{ij} d_i f d_j f; works at jet points."""
    field_fn = as_scalar_field(f, g)
    ctx = MetricAt(g, p)
    fj = field_fn(ctx.pjets)
    df = [_d1(fj, i) for i in range(ctx.n)]
    acc = 0.0
    for i in range(ctx.n):
        for j in range(ctx.n):
            acc = acc + ctx.ginv[i][j] * df[i] * df[j]
    return acc


def rough_laplacian_vec_components(g: MetricField, V: Callable, p: Sequence) -> list:
    """Tr_g (nabla^2 V) for a vector field V given as point -> component list.

    V is evaluated at jet coordinates, so any field built from the generic
    operators in this module (gradients included) differentiates correctly.
    """
    ctx = MetricAt(g, p)
    n = ctx.n
    Vj = V(ctx.pjets)
    Vval = [_val(c) for c in Vj]
    dV = [[_d1(Vj[k], i) for k in range(n)] for i in range(n)]
    ddV = [[[_d2(Vj[k], n, i, j) for k in range(n)] for j in range(n)] for i in range(n)]
    gam, dgam = ctx.gamma, ctx.dgamma
    # T[k][j] = (nabla_j V)^k
    T = [[dV[j][k] + sum((gam[k][j][l] * Vval[l] for l in range(n)), start=0.0)
          for j in range(n)] for k in range(n)]
    out = []
    for k in range(n):
        acc = 0.0
        for i in range(n):
            for j in range(n):
                dT = ddV[i][j][k]
                for l in range(n):
                    dT = dT + dgam[i][k][j][l] * Vval[l] + gam[k][j][l] * dV[i][l]
                term = dT
                for m in range(n):
                    term = term + gam[k][i][m] * T[m][j] - gam[m][i][j] * T[k][m]
                acc = acc + ctx.ginv[i][j] * term
        out.append(acc)
    return out


def rough_laplacian_vec(g: MetricField, V: Callable, p: Sequence) -> TangentVector:
    comps = rough_laplacian_vec_components(g, V, p)
    return TangentVector(tuple(float(x) for x in p),
                         tuple(ad.real_value(c) for c in comps))


def covariant_self_advection(g: MetricField, V: Callable, p: Sequence) -> list:
    """(nabla_V V)^k = V^j d_j V^k + Gamma^k_ij V^i V^j."""
    ctx = MetricAt(g, p)
    n = ctx.n
    Vj = V(ctx.pjets)
    Vval = [_val(c) for c in Vj]
    gam = ctx.gamma
    out = []
    for k in range(n):
        acc = 0.0
        for j in range(n):
            acc = acc + Vval[j] * _d1(Vj[k], j)
        for i in range(n):
            for j in range(n):
                acc = acc + gam[k][i][j] * Vval[i] * Vval[j]
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# diagnostics used by the invariant tests
# ---------------------------------------------------------------------------

def metric_compatibility_defect(g: MetricField, p: Sequence[float]) -> float:
    """max | d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il |; zero for any metric."""
    ctx = MetricAt(g, p)
    n = ctx.n
    gam = ctx.gamma
    worst = 0.0
    for k in range(n):
        for i in range(n):
            for j in range(n):
                acc = _d1(ctx.G[i][j], k)
                for l in range(n):
                    acc = acc - gam[l][k][i] * ctx.gval[l][j] - gam[l][k][j] * ctx.gval[i][l]
                worst = max(worst, abs(ad.real_value(acc)))
    return worst


def first_bianchi_defect(g: MetricField, p: Sequence[float]) -> float:
    """max | R^l_ijk + R^l_jki + R^l_kij |."""
    R = riemann(g, p)
    n = g.dim
    worst = 0.0
    for l in range(n):
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    worst = max(worst, abs(R[l, i, j, k] + R[l, j, k, i] + R[l, k, i, j]))
    return worst
