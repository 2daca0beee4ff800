"""Discrete geometry of graphs y(x) > 0 in the upper half-space model.

The ambient metric is ``(dx_1^2 + ... + dx_n^2 + dy^2) / y^2``.  A graph
``x -> (x, y(x))`` over a periodic grid carries the induced metric
``g_ij = (delta_ij + y_i y_j) / y^2`` and, with the normal pointing towards
``{y = 0}``, mean curvature

    H = (n + y * dt^{ij} y_ij) / v,    v = sqrt(1 + |grad y|^2),

where ``dt^{ij} = delta^{ij} - y^i y^j / v^2``.  Horospheres ``y = const``
have ``H = n`` and vertical semicircles (geodesics) have ``H = 0``.

Tensor fields are stored components-first: a vector field has shape
``(n, *grid.shape)`` and a 2-tensor ``(n, n, *grid.shape)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LostMeanConvexity, NonPositiveHeight

__all__ = [
    "Grid",
    "GraphState",
    "GeometryFields",
    "derivatives",
    "centered_derivatives_1d",
    "geometry",
    "geometry_from_jet",
    "speed",
    "flow_terms",
    "laplace_beltrami",
    "gradient",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the torus ``[0, length)^n``."""

    n: int
    points_per_axis: int
    length: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 8:
            raise ValueError(f"points_per_axis must be an integer >= 8, got {self.points_per_axis}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive and finite, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates ``x_i = i * h`` as broadcast-ready ``ij`` meshgrids."""
        axis = np.arange(self.points_per_axis) * self.spacing
        return tuple(np.meshgrid(*([axis] * self.n), indexing="ij"))


@dataclass(frozen=True)
class GraphState:
    grid: Grid
    t: float
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.shape != self.grid.shape:
            raise ValueError(f"y has shape {y.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        if not (np.isfinite(self.t) and self.t >= 0):
            raise ValueError(f"time must be finite and >= 0, got {self.t}")
        object.__setattr__(self, "y", y)

    def with_y(self, y: np.ndarray, t: float | None = None) -> "GraphState":
        return GraphState(self.grid, self.t if t is None else t, y)


@dataclass(frozen=True)
class GeometryFields:
    """Pointwise geometry of one graph; see the module docstring for layout."""

    n: int
    y: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    v: np.ndarray
    w: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    det_g: np.ndarray
    delta_tilde: np.ndarray
    H: np.ndarray
    A_mixed: np.ndarray
    A_norm2: np.ndarray
    G: np.ndarray
    P_max: np.ndarray
    M_mixed: np.ndarray
    diff_coeff: np.ndarray
    # n + y dt^{ij} y_ij; its sign decides mean convexity without dividing by v
    denominator: np.ndarray = field(repr=False)

    @property
    def grad_norm2(self) -> np.ndarray:
        return np.sum(self.grad**2, axis=0)


def _argloc(mask_or_values: np.ndarray, use_min: bool = True) -> tuple[int, ...]:
    arr = np.asarray(mask_or_values)
    flat = np.argmin(arr) if use_min else np.argmax(arr)
    return tuple(int(i) for i in np.unravel_index(flat, arr.shape))


def derivatives(state: GraphState) -> tuple[np.ndarray, np.ndarray]:
    """Second-order centred first and second derivatives with periodic wrap.

    Sums of opposite neighbours are formed before subtracting, so reflected
    input produces exactly reflected output.
    """
    y = state.y
    n = state.grid.n
    h = state.grid.spacing
    grad = np.empty((n,) + y.shape)
    hess = np.empty((n, n) + y.shape)
    for i in range(n):
        yp = np.roll(y, -1, axis=i)
        ym = np.roll(y, 1, axis=i)
        grad[i] = (yp - ym) / (2.0 * h)
        hess[i, i] = ((yp + ym) - 2.0 * y) / (h * h)
    if n == 2:
        ypp = np.roll(y, (-1, -1), axis=(0, 1))
        ymm = np.roll(y, (1, 1), axis=(0, 1))
        ypm = np.roll(y, (-1, 1), axis=(0, 1))
        ymp = np.roll(y, (1, -1), axis=(0, 1))
        hess[0, 1] = hess[1, 0] = ((ypp + ymm) - (ypm + ymp)) / (4.0 * h * h)
    return grad, hess


def centered_derivatives_1d(y: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Centred derivatives on the interior of a non-periodic 1-D sample.

    Returns ``(grad, hess)`` shaped ``(1, m-2)`` and ``(1, 1, m-2)``, matching
    ``y[1:-1]``.  Used for static test patches that are not periodic.
    """
    y = np.asarray(y, dtype=np.float64)
    yp, y0, ym = y[2:], y[1:-1], y[:-2]
    grad = ((yp - ym) / (2.0 * h))[None]
    hess = (((yp + ym) - 2.0 * y0) / (h * h))[None, None]
    return grad, hess


def geometry_from_jet(y: np.ndarray, grad: np.ndarray, hess: np.ndarray) -> GeometryFields:
    """All geometric fields from the 2-jet ``(y, Dy, D^2 y)`` at each point."""
    y = np.asarray(y, dtype=np.float64)
    n = grad.shape[0]
    if np.any(y <= 0):
        raise NonPositiveHeight(_argloc(y))

    eye = np.eye(n).reshape((n, n) + (1,) * y.ndim)
    p2 = np.sum(grad**2, axis=0)
    v2 = 1.0 + p2
    v = np.sqrt(v2)
    w = 1.0 / (v * y)

    outer = grad[:, None] * grad[None, :]
    delta_tilde = eye - outer / v2
    g = (eye + outer) / y**2
    g_inv = y**2 * delta_tilde
    det_g = v2 / y ** (2 * n)

    # B^i_j = dt^{ik} y_kj
    B = np.einsum("ik...,kj...->ij...", delta_tilde, hess)
    yB = y * B
    trace_yB = np.einsum("ii...->...", yB)
    denominator = n + trace_yB
    H = denominator / v

    A_mixed = (yB + eye) / v
    # A - I written so the horosphere limit does not cancel: 1/v - 1 = -p2 / (v (1 + v))
    A_minus_I = yB / v - (p2 / (v * (1.0 + v))) * eye
    A_norm2 = np.einsum("ij...,ji...->...", A_mixed, A_mixed)
    G = np.einsum("ij...,ji...->...", A_minus_I, A_minus_I)

    P = y * (yB + eye)
    if n == 1:
        P_max = P[0, 0]
    else:
        half_tr = 0.5 * (P[0, 0] + P[1, 1])
        half_diff = 0.5 * (P[0, 0] - P[1, 1])
        disc = np.maximum(half_diff**2 + P[0, 1] * P[1, 0], 0.0)
        P_max = half_tr + np.sqrt(disc)

    M_mixed = H * A_mixed
    with np.errstate(divide="ignore", invalid="ignore"):
        diff_coeff = (y**2 / H**2) * delta_tilde

    return GeometryFields(
        n=n,
        y=y,
        grad=grad,
        hess=hess,
        v=v,
        w=w,
        g=g,
        g_inv=g_inv,
        det_g=det_g,
        delta_tilde=delta_tilde,
        H=H,
        A_mixed=A_mixed,
        A_norm2=A_norm2,
        G=G,
        P_max=P_max,
        M_mixed=M_mixed,
        diff_coeff=diff_coeff,
        denominator=denominator,
    )


def geometry(state: GraphState) -> GeometryFields:
    grad, hess = derivatives(state)
    return geometry_from_jet(state.y, grad, hess)


def flow_terms(state: GraphState) -> tuple[np.ndarray, np.ndarray]:
    """``(v^2, n + y dt^{ij} y_ij)`` without building the full geometry."""
    y = state.y
    if np.any(y <= 0):
        raise NonPositiveHeight(_argloc(y))
    grad, hess = derivatives(state)
    if state.grid.n == 1:
        gx = grad[0]
        v2 = 1.0 + gx * gx
        return v2, 1.0 + y * hess[0, 0] / v2
    gx, gy = grad
    v2 = 1.0 + gx * gx + gy * gy
    contraction = hess[0, 0] + hess[1, 1] - (gx * gx * hess[0, 0] + 2.0 * gx * gy * hess[0, 1] + gy * gy * hess[1, 1]) / v2
    return v2, 2.0 + y * contraction


def speed(state: GraphState, fields: GeometryFields | None = None) -> np.ndarray:
    """Right-hand side of the graphical flow, ``dy/dt = -y v^2 / (n + y dt^{ij} y_ij)``."""
    if fields is None:
        v2, denom = flow_terms(state)
    else:
        v2, denom = fields.v**2, fields.denominator
    if np.any(denom <= 0):
        raise LostMeanConvexity(_argloc(denom))
    return -state.y * v2 / denom


def gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Centred periodic gradient of a scalar field, shape ``(n, *grid.shape)``."""
    h = grid.spacing
    return np.stack([(np.roll(f, -1, axis=i) - np.roll(f, 1, axis=i)) / (2.0 * h) for i in range(grid.n)])


def laplace_beltrami(
    state: GraphState, f: np.ndarray, fields: GeometryFields | None = None
) -> np.ndarray:
    """Intrinsic Laplacian of ``f`` on the graph, in conservative form.

    ``(1/sqrt|g|) d_i (sqrt|g| g^{ij} d_j f)``.  Diagonal fluxes live on
    half-points with arithmetic averaging of the coefficient; the mixed
    terms (n = 2) use centred differences of centred differences.
    """
    if fields is None:
        fields = geometry(state)
    grid = state.grid
    h = grid.spacing
    f = np.asarray(f, dtype=np.float64)
    sqrt_det = np.sqrt(fields.det_g)
    a = sqrt_det * fields.g_inv

    out = np.zeros_like(f)
    for i in range(grid.n):
        a_ii = a[i, i]
        a_half = 0.5 * (a_ii + np.roll(a_ii, -1, axis=i))
        flux = a_half * (np.roll(f, -1, axis=i) - f) / h
        out += (flux - np.roll(flux, 1, axis=i)) / h
    if grid.n == 2:
        df = gradient(f, grid)
        for i, j in ((0, 1), (1, 0)):
            q = a[i, j] * df[j]
            out += (np.roll(q, -1, axis=i) - np.roll(q, 1, axis=i)) / (2.0 * h)
    return out / sqrt_det
