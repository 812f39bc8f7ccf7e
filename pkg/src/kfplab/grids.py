"""Gridded space-time fields.

A GridField carries real values on a uniform time window crossed with
periodic tensor grids in position and velocity.  Position axes live on
[-L_x, L_x) and velocity axes on [-L_v, L_v), endpoint excluded; the time
axis is node-inclusive on [t_lo, t_hi] and does not wrap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["GridSpec", "GridField", "MAGIC"]

MAGIC = b"KFP-GRIDFIELD-01"


@dataclass(frozen=True)
class GridSpec:
    """Shape and extent of a space-time grid.

    n_t counts time nodes (a single node means one time slice with a
    degenerate window); n_x and n_v count points per periodic axis.
    """

    d: int
    n_t: int
    n_x: int
    n_v: int
    t_lo: float
    t_hi: float
    L_x: float
    L_v: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if self.n_t < 1 or self.n_x < 1 or self.n_v < 1:
            raise ValueError("grid extents must be positive")
        if self.n_t == 1:
            if self.t_hi != self.t_lo:
                raise ValueError("a single time node needs t_lo == t_hi")
        elif not self.t_hi > self.t_lo:
            raise ValueError("time window must have positive length")
        if not (self.L_x > 0 and self.L_v > 0):
            raise ValueError("periodic half-lengths must be positive")

    @property
    def shape(self) -> tuple:
        return (self.n_t,) + (self.n_x,) * self.d + (self.n_v,) * self.d

    @property
    def t_nodes(self) -> np.ndarray:
        return np.linspace(self.t_lo, self.t_hi, self.n_t)

    @property
    def dt(self) -> float:
        return (self.t_hi - self.t_lo) / (self.n_t - 1) if self.n_t > 1 else 0.0

    @property
    def dx(self) -> float:
        return 2.0 * self.L_x / self.n_x

    @property
    def dv(self) -> float:
        return 2.0 * self.L_v / self.n_v

    @property
    def x_nodes(self) -> np.ndarray:
        return -self.L_x + self.dx * np.arange(self.n_x)

    @property
    def v_nodes(self) -> np.ndarray:
        return -self.L_v + self.dv * np.arange(self.n_v)

    @property
    def x_axes(self) -> tuple:
        return tuple(range(1, 1 + self.d))

    @property
    def v_axes(self) -> tuple:
        return tuple(range(1 + self.d, 1 + 2 * self.d))


@dataclass(frozen=True)
class GridField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.spec.shape}")
        object.__setattr__(self, "values", vals)

    def like(self, values: np.ndarray) -> "GridField":
        return GridField(self.spec, values)

    @classmethod
    def from_callable(cls, spec: GridSpec, fn) -> "GridField":
        """Evaluate fn(t, xs, vs) on the dense grid; xs and vs are lists of
        d broadcast position/velocity arrays."""
        mesh = np.meshgrid(spec.t_nodes, *([spec.x_nodes] * spec.d),
                           *([spec.v_nodes] * spec.d), indexing="ij", sparse=True)
        t = mesh[0]
        xs = list(mesh[1:1 + spec.d])
        vs = list(mesh[1 + spec.d:])
        return cls(spec, np.broadcast_to(fn(t, xs, vs), spec.shape).astype(float))

    def dump(self, path) -> None:
        """Binary dump: 16-byte magic, little-endian u64 extents
        (n_t, n_x, n_v, d), f64 bounds (t_lo, t_hi, L_x, L_v), then the
        row-major f64 values."""
        s = self.spec
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(np.array([s.n_t, s.n_x, s.n_v, s.d], dtype="<u8").tobytes())
            fh.write(np.array([s.t_lo, s.t_hi, s.L_x, s.L_v], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "GridField":
        raw = Path(path).read_bytes()
        if raw[:16] != MAGIC:
            raise ValueError("not a grid field dump (bad magic)")
        n_t, n_x, n_v, d = (int(u) for u in np.frombuffer(raw[16:48], dtype="<u8"))
        t_lo, t_hi, L_x, L_v = (float(f) for f in np.frombuffer(raw[48:80], dtype="<f8"))
        spec = GridSpec(d=d, n_t=n_t, n_x=n_x, n_v=n_v,
                        t_lo=t_lo, t_hi=t_hi, L_x=L_x, L_v=L_v)
        count = int(np.prod(spec.shape))
        payload = raw[80:]
        if len(payload) != 8 * count:
            raise ValueError(f"dump payload holds {len(payload)} bytes, expected {8 * count}")
        values = np.frombuffer(payload, dtype="<f8").reshape(spec.shape).copy()
        return cls(spec, values)
