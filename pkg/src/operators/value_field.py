"""Space-time lattice functions u^i(t, x) with interpolation and a growth envelope."""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

_MAX_GROWTH = 8.0


@dataclass(frozen=True)
class GrowthEnvelope:
    """|u(t, x)| ≤ C(1 + |x|^p)."""

    C: float
    p: float

    def bound(self, x: np.ndarray) -> np.ndarray:
        return self.C * (1.0 + np.linalg.norm(x, axis=-1) ** self.p)

    @classmethod
    def fit(cls, points: np.ndarray, values: np.ndarray) -> "GrowthEnvelope":
        """Fit on lattice nodes; values has shape (n_t, G), points (G, k)."""
        mag = np.abs(values).max(axis=0)
        if not np.any(mag > 0):
            return cls(0.0, 0.0)
        radius = np.linalg.norm(points, axis=1)
        p = 0.0
        bands = np.floor(np.log2(np.maximum(radius, 1e-300))).astype(int)
        tops = [mag[bands == j].max() for j in np.unique(bands) if j >= 0]
        levels = [j for j in np.unique(bands) if j >= 0]
        usable = [(j, v) for j, v in zip(levels, tops) if v > 0]
        if len(usable) >= 2:
            js, vs = zip(*usable)
            p = float(np.clip(np.polyfit(np.array(js) * np.log(2.0), np.log(vs), 1)[0], 0.0, _MAX_GROWTH))
        C = float(np.max(mag / (1.0 + radius ** p)))
        return cls(C, p)


@dataclass(frozen=True, eq=False)
class ValueField:
    """u^i on a lattice over [times] × box ⊂ R^k.

    Multilinear interpolation inside the box. Outside, the value at the
    nearest boundary point plus the fitted growth term C(|x|^p - |x_b|^p),
    signed by the direction the boundary cell is heading.
    """

    times: np.ndarray
    axes: Tuple[np.ndarray, ...]
    values: np.ndarray                      # (m, n_t, *shape)
    envelopes: Tuple[GrowthEnvelope, ...]
    cache: Dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_values(cls, times: Sequence[float], axes: Sequence[np.ndarray], values: np.ndarray) -> "ValueField":
        times = np.atleast_1d(np.asarray(times, dtype=float))
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        values = np.asarray(values, dtype=float)
        shape = tuple(len(a) for a in axes)
        if values.shape[1:] != (len(times),) + shape:
            raise ValueError(f"values shape {values.shape} does not match lattice {(len(times),) + shape}")
        points = lattice_points(axes)
        flat = values.reshape(values.shape[0], len(times), -1)
        envelopes = tuple(GrowthEnvelope.fit(points, flat[i]) for i in range(values.shape[0]))
        return cls(times, axes, values, envelopes)

    @classmethod
    def from_function(cls, fn: Callable[[float, np.ndarray], np.ndarray], times: Sequence[float],
                      axes: Sequence[np.ndarray]) -> "ValueField":
        """Tabulate fn(t, x (G, k)) -> (G, m) on the lattice."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        points = lattice_points(axes)
        shape = tuple(len(a) for a in axes)
        slices = [np.asarray(fn(t, points), dtype=float).reshape(len(points), -1) for t in np.atleast_1d(times)]
        values = np.stack(slices, axis=1)                     # (G, n_t, m)
        values = np.moveaxis(values, -1, 0).reshape((values.shape[-1], len(slices)) + shape)
        return cls.from_values(times, axes, values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([a[0] for a in self.axes]), np.array([a[-1] for a in self.axes])

    def lattice_points(self) -> np.ndarray:
        return lattice_points(self.axes)

    def _interp(self, table: np.ndarray, t, x: np.ndarray) -> np.ndarray:
        """table (c, n_t, *shape) at (t, x (..., k)) -> (..., c)."""
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        pts = x.reshape(-1, self.k)
        c = table.shape[0]
        t_arr = np.asarray(t, dtype=float)

        if t_arr.ndim == 0 or len(self.times) == 1:
            tt = float(np.clip(t_arr.reshape(-1)[0] if t_arr.ndim else t_arr, self.times[0], self.times[-1]))
            if len(self.times) == 1:
                spatial = table[:, 0]
            else:
                i1 = int(np.clip(np.searchsorted(self.times, tt, side="right"), 1, len(self.times) - 1))
                i0 = i1 - 1
                w = (tt - self.times[i0]) / (self.times[i1] - self.times[i0])
                spatial = (1.0 - w) * table[:, i0] + w * table[:, i1] if w > 0 else table[:, i0]
            if self.k == 1:
                out = _interp_1d(self.axes[0], spatial, pts[:, 0])
            else:
                interp = RegularGridInterpolator(self.axes, np.moveaxis(spatial, 0, -1), method="linear",
                                                 bounds_error=False, fill_value=None)
                out = interp(pts)
            return out.reshape(lead + (c,))

        tt = np.clip(np.broadcast_to(t_arr, lead).reshape(-1), self.times[0], self.times[-1])
        interp = RegularGridInterpolator((self.times,) + self.axes, np.moveaxis(table, 0, -1), method="linear",
                                         bounds_error=False, fill_value=None)
        out = interp(np.column_stack([tt, pts]))
        return out.reshape(lead + (c,))

    def __call__(self, t, x: np.ndarray) -> np.ndarray:
        """u(t, x) for x of shape (..., k); returns (..., m)."""
        x = np.asarray(x, dtype=float)
        out = self._interp(self.values, t, x)
        lo, hi = self.box
        outside = np.any((x < lo) | (x > hi), axis=-1)
        if np.any(outside):
            x_b = np.clip(x, lo, hi)
            at_boundary = self._interp(self.values, t, x_b)
            r, r_b = np.linalg.norm(x, axis=-1), np.linalg.norm(x_b, axis=-1)
            for i, env in enumerate(self.envelopes):
                growth = env.C * np.maximum(r ** env.p - r_b ** env.p, 0.0)
                heading = np.sign(out[..., i] - at_boundary[..., i])
                out[..., i] = np.where(outside, at_boundary[..., i] + heading * growth, out[..., i])
        return out

    def component(self, i: int) -> Callable[[float, np.ndarray], np.ndarray]:
        return lambda t, x: self(t, x)[..., i]

    def _gradient_table(self, stencil: int) -> np.ndarray:
        key = ("grad", stencil)
        if key not in self.cache:
            grads = [_central_difference(self.values, axis=2 + a, h=self.spacing[a], stencil=stencil)
                     for a in range(self.k)]
            table = np.stack(grads, axis=1)                   # (m, k, n_t, *shape)
            self.cache[key] = table.reshape((self.m * self.k,) + table.shape[2:])
        return self.cache[key]

    def _hessian_table(self) -> np.ndarray:
        if "hess" not in self.cache:
            grads = self._gradient_table(1).reshape((self.m, self.k) + self.values.shape[1:])
            rows = []
            for a in range(self.k):
                cols = []
                for b in range(self.k):
                    if a == b:
                        cols.append(_second_difference(self.values, axis=2 + a, h=self.spacing[a]))
                    else:
                        cols.append(_central_difference(grads[:, a], axis=2 + b, h=self.spacing[b], stencil=1))
                rows.append(np.stack(cols, axis=1))
            table = np.stack(rows, axis=1)                    # (m, k, k, n_t, *shape)
            self.cache["hess"] = table.reshape((self.m * self.k * self.k,) + table.shape[3:])
        return self.cache["hess"]

    def gradient(self, t, x: np.ndarray, stencil: int = 1) -> np.ndarray:
        """Central-difference D_x u interpolated from the lattice; (..., m, k)."""
        out = self._interp(self._gradient_table(stencil), t, x)
        return out.reshape(out.shape[:-1] + (self.m, self.k))

    def hessian(self, t, x: np.ndarray) -> np.ndarray:
        """Finite-difference D²_xx u interpolated from the lattice; (..., m, k, k)."""
        out = self._interp(self._hessian_table(), t, x)
        return out.reshape(out.shape[:-1] + (self.m, self.k, self.k))

    def time_slice(self, t: float) -> "ValueField":
        """The field frozen at time t (single time node)."""
        values = self._interp(self.values, t, self.lattice_points())
        shape = tuple(len(a) for a in self.axes)
        values = np.moveaxis(values, -1, 0).reshape((self.m, 1) + shape)
        return ValueField(np.array([t]), self.axes, values, self.envelopes)

    def envelope_holds(self) -> bool:
        """|u| ≤ envelope on every lattice node."""
        pts = self.lattice_points()
        flat = self.values.reshape(self.m, len(self.times), -1)
        return all(bool(np.all(np.abs(flat[i]) <= env.bound(pts) * (1 + 1e-12) + 1e-300))
                   for i, env in enumerate(self.envelopes))

    def to_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {"times": self.times, "values": self.values,
                  "envelopes": np.array([[e.C, e.p] for e in self.envelopes])}
        arrays.update({f"axis_{a}": ax for a, ax in enumerate(self.axes)})
        return arrays

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "ValueField":
        axes = tuple(arrays[f"axis_{a}"] for a in range(len([k for k in arrays if k.startswith("axis_")])))
        envelopes = tuple(GrowthEnvelope(float(c), float(p)) for c, p in arrays["envelopes"])
        return cls(np.asarray(arrays["times"]), axes, np.asarray(arrays["values"]), envelopes)


class FunctionField:
    """An analytic u(t, x) with finite-difference derivatives; same interface as ValueField."""

    def __init__(self, fn: Callable[[float, np.ndarray], np.ndarray], m: int, k: int, h: float = 1e-3,
                 box: Optional[Tuple[np.ndarray, np.ndarray]] = None):
        self.fn = fn
        self.m = m
        self.k = k
        self.spacing = np.full(k, h)
        self.box = box or (np.full(k, -np.inf), np.full(k, np.inf))

    def __call__(self, t, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.fn(t, x), dtype=float).reshape(x.shape[:-1] + (self.m,))

    def component(self, i: int):
        return lambda t, x: self(t, x)[..., i]

    def gradient(self, t, x: np.ndarray, stencil: int = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cols = []
        for a in range(self.k):
            step = np.zeros(self.k)
            step[a] = stencil * self.spacing[a]
            cols.append((self(t, x + step) - self(t, x - step)) / (2 * step[a]))
        return np.stack(cols, axis=-1)

    def hessian(self, t, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.spacing
        base = self(t, x)
        out = np.empty(x.shape[:-1] + (self.m, self.k, self.k))
        for a in range(self.k):
            ea = np.zeros(self.k)
            ea[a] = h[a]
            out[..., a, a] = (self(t, x + ea) - 2 * base + self(t, x - ea)) / h[a] ** 2
            for b in range(a + 1, self.k):
                eb = np.zeros(self.k)
                eb[b] = h[b]
                mixed = (self(t, x + ea + eb) - self(t, x + ea - eb) - self(t, x - ea + eb)
                         + self(t, x - ea - eb)) / (4 * h[a] * h[b])
                out[..., a, b] = mixed
                out[..., b, a] = mixed
        return out


def lattice_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    """All lattice nodes, C order, shape (G, k)."""
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def linear_combination(fields: Sequence[ValueField], coefs: Sequence[float]) -> ValueField:
    """Σ c_j u_j for fields on the same lattice."""
    first = fields[0]
    values = sum(c * f.values for c, f in zip(coefs, fields))
    return ValueField.from_values(first.times, first.axes, values)


def _pad_linear(values: np.ndarray, axis: int, width: int) -> np.ndarray:
    """Extend by `width` nodes on each side along axis by linear extrapolation."""
    v = np.moveaxis(values, axis, -1)
    left_slope = v[..., 1:2] - v[..., 0:1]
    right_slope = v[..., -1:] - v[..., -2:-1]
    steps = np.arange(1, width + 1)
    left = v[..., 0:1] - left_slope * steps[::-1]
    right = v[..., -1:] + right_slope * steps
    return np.moveaxis(np.concatenate([left, v, right], axis=-1), -1, axis)


def _central_difference(values: np.ndarray, axis: int, h: float, stencil: int) -> np.ndarray:
    padded = _pad_linear(values, axis, stencil)
    n = values.shape[axis]
    fwd = np.take(padded, np.arange(2 * stencil, n + 2 * stencil), axis=axis)
    bwd = np.take(padded, np.arange(0, n), axis=axis)
    return (fwd - bwd) / (2 * stencil * h)


def _second_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    padded = _pad_linear(values, axis, 1)
    n = values.shape[axis]
    fwd = np.take(padded, np.arange(2, n + 2), axis=axis)
    mid = np.take(padded, np.arange(1, n + 1), axis=axis)
    bwd = np.take(padded, np.arange(0, n), axis=axis)
    return (fwd - 2 * mid + bwd) / h ** 2


def _interp_1d(axis: np.ndarray, table: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of table (c, n) at x, linear beyond the ends; (len(x), c)."""
    out = np.empty((len(x), table.shape[0]))
    lo, hi = axis[0], axis[-1]
    below, above = x < lo, x > hi
    for c in range(table.shape[0]):
        col = np.interp(x, axis, table[c])
        if np.any(below):
            slope = (table[c, 1] - table[c, 0]) / (axis[1] - axis[0])
            col[below] = table[c, 0] + slope * (x[below] - lo)
        if np.any(above):
            slope = (table[c, -1] - table[c, -2]) / (axis[-1] - axis[-2])
            col[above] = table[c, -1] + slope * (x[above] - hi)
        out[:, c] = col
    return out
