"""Weighted mixed-norm Lebesgue norms and the kinetic Sobolev norm.

mixed_norm iterates discrete L_p integrals from the inside out:

    time_outer   L_p over x, then weighted L_{r_i} over each v_i in order,
                 then weighted L_q over t restricted to t <= T
    x_weighted   L_p over (x, t) jointly against |x|^alpha, then the
                 weighted L_{r_i} chain over v; no outer time norm

Periodic axes use the rectangle rule (spectrally accurate for smooth
periodic integrands); the time axis uses the trapezoid rule.  These choices
are fixed so norms are reproducible bit for bit.

s_norm adds the velocity gradient, velocity Hessian, and the transport
derivative Yu = dt u - v . Dx u to the plain norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridField, GridSpec
from .weights import ProductWeight, Weight1D, unit_product_weight

__all__ = [
    "MixedNormSpec",
    "mixed_norm",
    "transport_derivative",
    "s_norm",
    "s_norm_terms",
    "spectral_derivative",
    "v_gradient_magnitude",
    "v_hessian_magnitude",
    "x_gradient_magnitude",
    "x_hessian_magnitude",
]


@dataclass(frozen=True)
class MixedNormSpec:
    """Exponents, weight, and time cut for a mixed norm.

    r holds the velocity exponents (r_1 .. r_d).  weight None means the unit
    product weight.  variant 'x_weighted' integrates |x|^alpha jointly over
    (x, t) innermost and requires alpha in (-1, p-1); the time exponent q is
    ignored there.
    """

    p: float
    r: tuple
    q: float
    weight: ProductWeight | None = None
    T: float = math.inf
    variant: str = "time_outer"
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(ri) for ri in self.r))
        if self.variant not in ("time_outer", "x_weighted"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.p > 1 or not self.q > 1 or any(not ri > 1 for ri in self.r):
            raise ValueError("all exponents must exceed 1")
        if not self.r:
            raise ValueError("need at least one velocity exponent")
        if self.variant == "x_weighted" and not (-1.0 < self.alpha < self.p - 1.0):
            raise ValueError("x_weighted needs alpha in (-1, p-1)")
        if self.weight is not None and self.weight.d != len(self.r):
            raise ValueError("weight dimension does not match exponent list")

    @classmethod
    def unmixed(cls, p: float, d: int, **kw) -> "MixedNormSpec":
        return cls(p=p, r=(p,) * d, q=p, **kw)


def _nodal_weight(w: Weight1D, nodes: np.ndarray, h: float) -> np.ndarray:
    """Weight values at grid nodes; a singular node (power weight with a
    negative exponent hit exactly) is replaced by the closed-form cell
    average."""
    vals = np.asarray(w.eval(nodes), dtype=float)
    bad = ~np.isfinite(vals)
    for i in np.nonzero(bad)[0]:
        vals[i] = w.cell_average(nodes[i] - 0.5 * h, nodes[i] + 0.5 * h)
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ValueError("weight must be finite after cell patching and nonnegative")
    return vals


def _radial_power_nodes(alpha: float, spec: GridSpec) -> np.ndarray:
    """|x|^alpha on the position mesh, the singular origin node replaced by a
    cell average (closed form in one dimension, a fixed even midpoint subgrid
    in higher dimensions so the singular center is never sampled)."""
    mesh = np.meshgrid(*([spec.x_nodes] * spec.d), indexing="ij")
    rad = np.sqrt(sum(m * m for m in mesh))
    with np.errstate(divide="ignore"):
        out = rad ** alpha
    bad = ~np.isfinite(out)
    if np.any(bad):
        h = spec.dx
        if spec.d == 1:
            patch = Weight1D(kind="power", alpha=alpha, p=2.0).cell_average(-h / 2, h / 2)
        else:
            m = 32
            sub = (np.arange(m) + 0.5) / m * h - h / 2
            smesh = np.meshgrid(*([sub] * spec.d), indexing="ij")
            srad = np.sqrt(sum(s * s for s in smesh))
            patch = float(np.mean(srad ** alpha))
        out[bad] = patch
    return out


def _trapezoid_weights(t_nodes: np.ndarray, T: float) -> np.ndarray:
    """Trapezoid quadrature weights over the nodes with t <= T, zero beyond;
    a cut between nodes truncates to the node sub-grid (no partial cell)."""
    n = len(t_nodes)
    w = np.zeros(n)
    k = int(np.searchsorted(t_nodes, T, side="right"))
    if k >= 2:
        dt = t_nodes[1] - t_nodes[0]
        w[:k] = dt
        w[0] = w[k - 1] = 0.5 * dt
    return w


def mixed_norm(f: GridField, nspec: MixedNormSpec) -> float:
    spec = f.spec
    if len(nspec.r) != spec.d:
        raise ValueError(f"norm has {len(nspec.r)} velocity exponents, field dimension is {spec.d}")
    w = nspec.weight or unit_product_weight(spec.d)
    vals = np.abs(f.values) ** nspec.p

    if nspec.variant == "time_outer":
        cur = vals.sum(axis=spec.x_axes) * spec.dx ** spec.d
    else:
        wx = _radial_power_nodes(nspec.alpha, spec)
        wx = wx.reshape((1,) + wx.shape + (1,) * spec.d)
        cur = (vals * wx).sum(axis=spec.x_axes) * spec.dx ** spec.d
        tw = _trapezoid_weights(spec.t_nodes, nspec.T)
        cur = np.tensordot(tw, cur, axes=(0, 0))

    prev = nspec.p
    for i in range(spec.d):
        wnodes = _nodal_weight(w.wi[i], spec.v_nodes, spec.dv)
        axis = 1 if nspec.variant == "time_outer" else 0
        cur = np.tensordot(cur ** (nspec.r[i] / prev), wnodes, axes=([axis], [0])) * spec.dv
        prev = nspec.r[i]

    if nspec.variant == "x_weighted":
        return float(cur) ** (1.0 / prev)

    tw = _trapezoid_weights(spec.t_nodes, nspec.T)
    w0 = _nodal_weight(w.w0, spec.t_nodes, spec.dt if spec.n_t > 1 else 1.0)
    total = float(np.sum(tw * w0 * cur ** (nspec.q / prev)))
    return total ** (1.0 / nspec.q)


def _fd1_matrix(nodes: np.ndarray, max_stencil: int = 9) -> np.ndarray:
    """First-derivative matrix on arbitrary nodes from sliding local stencils
    (centered inside, one-sided at the ends), each solved from the scaled
    Taylor system."""
    n = len(nodes)
    m = min(max_stencil, n)
    D = np.zeros((n, n))
    for i in range(n):
        s0 = min(max(i - (m - 1) // 2, 0), n - m)
        pts = nodes[s0:s0 + m] - nodes[i]
        scale = np.max(np.abs(pts))
        tau = pts / scale
        V = np.vander(tau, increasing=True).T
        rhs = np.zeros(m)
        rhs[1] = 1.0 / scale
        D[i, s0:s0 + m] = np.linalg.solve(V, rhs)
    return D


def spectral_derivative(values: np.ndarray, axis: int, half_length: float,
                        order: int = 1) -> np.ndarray:
    """Differentiate along a periodic axis of physical length 2*half_length
    via the FFT.  The unpaired Nyquist mode is dropped for odd orders."""
    n = values.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * half_length / n)
    if order == 1:
        mult = 1j * k
        if n % 2 == 0:
            mult[n // 2] = 0.0
    elif order == 2:
        mult = -(k ** 2)
    else:
        raise ValueError("only first and second derivatives are supported")
    shape = [1] * values.ndim
    shape[axis] = n
    F = np.fft.fft(values, axis=axis) * mult.reshape(shape)
    return np.fft.ifft(F, axis=axis).real


def transport_derivative(u: GridField) -> GridField:
    """Yu = dt u - v . Dx u; time by sliding high-order finite differences,
    position spectrally."""
    spec = u.spec
    if spec.n_t < 3:
        raise ValueError("transport derivative needs at least three time nodes")
    D = _fd1_matrix(spec.t_nodes)
    out = np.tensordot(D, u.values, axes=(1, 0))
    for i in range(spec.d):
        dx_u = spectral_derivative(u.values, axis=1 + i, half_length=spec.L_x)
        vshape = [1] * u.values.ndim
        vshape[1 + spec.d + i] = spec.n_v
        out -= spec.v_nodes.reshape(vshape) * dx_u
    return u.like(out)


def _gradient_magnitude(u: GridField, axes: tuple, half_length: float) -> GridField:
    sq = np.zeros_like(u.values)
    for ax in axes:
        g = spectral_derivative(u.values, axis=ax, half_length=half_length)
        sq += g * g
    return u.like(np.sqrt(sq))


def _hessian_magnitude(u: GridField, axes: tuple, half_length: float) -> GridField:
    """Pointwise Frobenius magnitude of the second-derivative matrix."""
    sq = np.zeros_like(u.values)
    for ia, ax_a in enumerate(axes):
        for ax_b in axes[ia:]:
            if ax_a == ax_b:
                h = spectral_derivative(u.values, axis=ax_a, half_length=half_length, order=2)
                sq += h * h
            else:
                h = spectral_derivative(
                    spectral_derivative(u.values, axis=ax_a, half_length=half_length),
                    axis=ax_b, half_length=half_length)
                sq += 2.0 * h * h
    return u.like(np.sqrt(sq))


def v_gradient_magnitude(u: GridField) -> GridField:
    return _gradient_magnitude(u, u.spec.v_axes, u.spec.L_v)


def v_hessian_magnitude(u: GridField) -> GridField:
    return _hessian_magnitude(u, u.spec.v_axes, u.spec.L_v)


def x_gradient_magnitude(u: GridField) -> GridField:
    return _gradient_magnitude(u, u.spec.x_axes, u.spec.L_x)


def x_hessian_magnitude(u: GridField) -> GridField:
    return _hessian_magnitude(u, u.spec.x_axes, u.spec.L_x)


def s_norm_terms(u: GridField, nspec: MixedNormSpec) -> dict:
    return {
        "u": mixed_norm(u, nspec),
        "dv": mixed_norm(v_gradient_magnitude(u), nspec),
        "d2v": mixed_norm(v_hessian_magnitude(u), nspec),
        "transport": mixed_norm(transport_derivative(u), nspec),
    }


def s_norm(u: GridField, nspec: MixedNormSpec) -> float:
    return float(sum(s_norm_terms(u, nspec).values()))
