"""Uniformly sampled vector-valued functions on a time window.

GridFunction is the common currency of the solver and diagnostic modules: a
window ``[a, b]``, a uniform step ``h`` and an array of samples, with cubic
interpolation between samples and the sup-norm taken as the max over samples.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = ["GridFunction", "write_csv"]


class GridFunction:
    """Samples of a function ``[a, b] -> R^n`` on a uniform grid.

    Parameters
    ----------
    a, b : float
        Window endpoints, ``a < b``.
    values : array_like, shape (m+1, n) or (m+1,)
        Samples at ``a + k*(b-a)/m``; 1-d input is treated as scalar-valued.
    """

    def __init__(self, a: float, b: float, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 2:
            raise ValueError("values must be a (m+1, n) array with m >= 1")
        if not b > a:
            raise ValueError("window must satisfy a < b")
        if not np.all(np.isfinite(values)):
            raise ValueError("samples must all be finite")
        self.a = float(a)
        self.b = float(b)
        self.values = values
        self._spline = None

    @classmethod
    def from_callable(cls, fn, a: float, b: float, step: float) -> "GridFunction":
        """Sample ``fn`` (vectorized or not over t) at spacing <= ``step``."""
        m = max(1, int(np.ceil((b - a) / step - 1e-12)))
        times = np.linspace(a, b, m + 1)
        try:
            vals = np.asarray(fn(times), dtype=float)
            if vals.shape[0] != times.shape[0]:
                raise ValueError
        except Exception:
            vals = np.asarray([np.atleast_1d(fn(t)) for t in times], dtype=float)
        return cls(a, b, vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.values.shape[0] - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.values.shape[0])

    @property
    def sup_norm(self) -> float:
        """Max over samples of the euclidean vector norm."""
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def _ensure_spline(self):
        if self._spline is None:
            self._spline = CubicSpline(self.times, self.values, axis=0)
        return self._spline

    def __call__(self, t):
        """Cubic interpolation at ``t`` (scalar or array), strict on bounds."""
        t_arr = np.asarray(t, dtype=float)
        slack = 1e-9 * max(1.0, abs(self.a), abs(self.b))
        if np.any(t_arr < self.a - slack) or np.any(t_arr > self.b + slack):
            raise ValueError(
                f"evaluation at t outside window [{self.a}, {self.b}]"
            )
        out = self._ensure_spline()(np.clip(t_arr, self.a, self.b))
        return out

    def restrict(self, a2: float, b2: float) -> "GridFunction":
        """Slice to the grid-aligned subwindow containing ``[a2, b2]``."""
        h = self.h
        i0 = max(0, int(np.floor((a2 - self.a) / h + 1e-9)))
        i1 = min(self.values.shape[0] - 1, int(np.ceil((b2 - self.a) / h - 1e-9)))
        if i1 - i0 < 1:
            raise ValueError("restriction window too small")
        a_new, b_new = self.a + i0 * h, self.a + i1 * h
        # absorb accumulated rounding when the request is already a node
        if abs(a_new - a2) <= 1e-9 * max(1.0, abs(a2)):
            a_new = float(a2)
        if abs(b_new - b2) <= 1e-9 * max(1.0, abs(b2)):
            b_new = float(b2)
        return GridFunction(a_new, b_new, self.values[i0 : i1 + 1])

    def derivative_grid(self) -> np.ndarray:
        """Fourth-order finite-difference derivative at the sample points.

        Central five-point stencils inside, one-sided fourth-order stencils at
        the first/last two points.
        """
        v = self.values
        h = self.h
        m = v.shape[0]
        if m < 5:
            return self._ensure_spline()(self.times, 1)
        d = np.empty_like(v)
        d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
        for k in (0, 1):
            d[k] = fwd @ v[k : k + 5]
            idx = np.arange(m - 1 - k, m - 6 - k, -1)
            d[m - 1 - k] = -(fwd @ v[idx])
        return d

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        if (
            abs(other.a - self.a) > 1e-12
            or abs(other.b - self.b) > 1e-12
            or other.values.shape != self.values.shape
        ):
            raise ValueError("grid mismatch")
        return GridFunction(self.a, self.b, self.values - other.values)


def write_csv(path, gf: GridFunction) -> None:
    """Write ``t, x1..xn`` rows with 17 significant digits."""
    times = gf.times
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(f"x{i+1}" for i in range(gf.dim)) + "\n")
        for t, row in zip(times, gf.values):
            fh.write(",".join(f"{v:.17g}" for v in (t, *row)) + "\n")
