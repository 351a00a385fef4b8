"""Activation (voltage-to-rate) functions and their derivatives up to order 4."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError

KINDS = ("logistic", "shifted-tanh", "shifted-sigmoid", "custom-table")

# numba kernels dispatch on these integer codes
KIND_CODES = {"logistic": 0, "shifted-tanh": 1, "shifted-sigmoid": 2, "custom-table": 3}


def _logistic_derivs(x: np.ndarray, order: int) -> np.ndarray:
    f = 0.5 * (1.0 + np.tanh(0.5 * x))  # overflow-free logistic
    d1 = f * (1.0 - f)
    out = [f, d1]
    if order >= 2:
        out.append(d1 * (1.0 - 2.0 * f))
    if order >= 3:
        out.append(d1 * (1.0 - 6.0 * f + 6.0 * f * f))
    if order >= 4:
        out.append(d1 * (1.0 - 2.0 * f) * (1.0 - 12.0 * f + 12.0 * f * f))
    return np.array(out[: order + 1])


def _tanh_derivs(x: np.ndarray, order: int, shift: float) -> np.ndarray:
    t = np.tanh(x)
    s = 1.0 - t * t
    out = [t - shift, s]
    if order >= 2:
        out.append(-2.0 * t * s)
    if order >= 3:
        out.append(-2.0 * s * (1.0 - 3.0 * t * t))
    if order >= 4:
        out.append(8.0 * t * s * (2.0 - 3.0 * t * t))
    return np.array(out[: order + 1])


@dataclass(frozen=True)
class Activation:
    """A sigmoidal activation ``f`` with analytic derivatives.

    Kinds
    -----
    ``logistic``
        ``f(x) = 1 / (1 + exp(-x))``.
    ``shifted-tanh``
        ``f(x) = tanh(x) - tanh(I0)`` so that ``f(I0) = 0``.
    ``shifted-sigmoid``
        Homotopy ``f_p = g - p * inf(g)`` of ``g = tanh(x) - tanh(I0)``;
        ``p = 0`` is the shifted tanh and ``p = 1`` is the positive sigmoid
        ``1 + tanh(x)``.
    ``custom-table``
        Cubic spline through tabulated ``(x, y)`` pairs; derivatives are
        central finite differences.
    """

    kind: str = "logistic"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown activation kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "custom-table":
            x = np.asarray(self.params.get("x", ()), dtype=float)
            y = np.asarray(self.params.get("y", ()), dtype=float)
            if x.ndim != 1 or x.size < 4 or x.shape != y.shape or np.any(np.diff(x) <= 0):
                raise ConfigError("custom-table needs >= 4 strictly increasing x values and matching y")
            from scipy.interpolate import CubicSpline

            object.__setattr__(self, "_spline", CubicSpline(x, y, bc_type="natural", extrapolate=True))

    # convenience constructors -------------------------------------------------
    @classmethod
    def logistic(cls) -> "Activation":
        return cls("logistic")

    @classmethod
    def shifted_tanh(cls, i0: float) -> "Activation":
        return cls("shifted-tanh", {"I0": float(i0)})

    @classmethod
    def shifted_sigmoid(cls, i0: float, p: float) -> "Activation":
        return cls("shifted-sigmoid", {"I0": float(i0), "p": float(p)})

    @classmethod
    def table(cls, x, y) -> "Activation":
        return cls("custom-table", {"x": list(map(float, x)), "y": list(map(float, y))})

    # --------------------------------------------------------------------------
    @property
    def offset(self) -> float:
        """Constant subtracted from ``tanh`` for the tanh-based kinds."""
        i0 = float(self.params.get("I0", 0.0))
        if self.kind == "shifted-tanh":
            return np.tanh(i0)
        if self.kind == "shifted-sigmoid":
            p = float(self.params.get("p", 0.0))
            # inf of tanh(x) - tanh(I0) is -1 - tanh(I0)
            return np.tanh(i0) - p * (1.0 + np.tanh(i0))
        return 0.0

    @property
    def infimum(self) -> float:
        if self.kind == "logistic":
            return 0.0
        if self.kind in ("shifted-tanh", "shifted-sigmoid"):
            return -1.0 - self.offset
        return float(np.min(self.params["y"]))

    def derivs(self, x, order: int = 2) -> np.ndarray:
        """Stack ``[f, f', ..., f^(order)]`` evaluated at ``x``.

        The result has shape ``(order + 1,) + np.shape(x)``.
        """
        if not 0 <= order <= 4:
            raise ValueError("derivative order must be in [0, 4]")
        x = np.asarray(x, dtype=float)
        if self.kind == "logistic":
            return _logistic_derivs(x, order)
        if self.kind in ("shifted-tanh", "shifted-sigmoid"):
            return _tanh_derivs(x, order, self.offset)
        return self._table_derivs(x, order)

    def _table_derivs(self, x: np.ndarray, order: int) -> np.ndarray:
        f = self._spline
        out = [f(x)]
        for k in range(1, order + 1):
            # higher orders need wider stencils to keep round-off below truncation
            h = np.maximum(1e-4, 1e-4 * np.abs(x)) * (1.0, 1.0, 1.0, 30.0, 100.0)[k]
            fm2, fm1, fp1, fp2 = f(x - 2 * h), f(x - h), f(x + h), f(x + 2 * h)
            if k == 1:
                d = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
            elif k == 2:
                d = (-fm2 + 16 * fm1 - 30 * out[0] + 16 * fp1 - fp2) / (12 * h * h)
            elif k == 3:
                d = (-fm2 + 2 * fm1 - 2 * fp1 + fp2) / (2 * h**3)
            else:
                d = (fm2 - 4 * fm1 + 6 * out[0] - 4 * fp1 + fp2) / h**4
            out.append(d)
        return np.array(out)

    def __call__(self, x):
        return self.derivs(x, 0)[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "Activation":
        if isinstance(d, str):
            return cls(d)
        try:
            return cls(d["kind"], dict(d.get("params", {})))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed activation entry: {d!r}") from exc

    def kernel_params(self) -> tuple[int, float]:
        """``(code, offset)`` pair understood by the compiled SSA kernels."""
        if self.kind == "custom-table":
            raise ConfigError("custom-table activations are not supported by the compiled kernels")
        return KIND_CODES[self.kind], float(self.offset)

    def __hash__(self):
        return hash((self.kind, repr(sorted(self.params.items()))))

    def __eq__(self, other):
        return isinstance(other, Activation) and self.kind == other.kind and self.params == other.params
