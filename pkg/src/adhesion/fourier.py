"""Real trigonometric series used as smooth periodic initial potentials."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class FourierSeries:
    """Smooth periodic function ``c0 + sum_j a_j cos(w_j . x) + b_j sin(w_j . x)``.

    ``w_j = 2 pi k_j / period`` where ``k_j`` are integer wavevectors.  Real
    cosine/sine pairs are used instead of complex coefficients, so the series
    is real-valued by construction.

    Parameters
    ----------
    wavevectors : (n, d) integer array
    cos_coeffs, sin_coeffs : (n,) arrays
    period : (d,) positive array
    constant : float
    """

    wavevectors: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    period: np.ndarray
    constant: float = 0.0
    _freq: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.wavevectors, dtype=float))
        period = np.atleast_1d(np.asarray(self.period, dtype=float))
        if k.size == 0:
            k = np.zeros((0, period.size))
        a = np.asarray(self.cos_coeffs, dtype=float).reshape(-1)
        b = np.asarray(self.sin_coeffs, dtype=float).reshape(-1)
        if k.shape[1] != period.size:
            raise ValueError("wavevector dimension does not match period")
        if not (k.shape[0] == a.size == b.size):
            raise ValueError("coefficient lists have different lengths")
        if np.any(period <= 0):
            raise ValueError("period must be positive")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ValueError("coefficients must be finite")
        for name, val in (("wavevectors", k), ("cos_coeffs", a),
                          ("sin_coeffs", b), ("period", period)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        freq = 2.0 * np.pi * k / period
        freq.setflags(write=False)
        object.__setattr__(self, "_freq", freq)
        object.__setattr__(self, "constant", float(self.constant))

    # -- construction -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int = 1, period: float = 2 * np.pi) -> "FourierSeries":
        return cls(np.zeros((0, dim)), [], [], np.full(dim, period))

    @classmethod
    def cosine(cls, amplitude: float = 1.0, period: float = 2 * np.pi) -> "FourierSeries":
        """``amplitude * cos(2 pi x / period)`` in one dimension."""
        return cls([[1]], [amplitude], [0.0], [period])

    @classmethod
    def from_terms(cls, terms: Iterable[Mapping[str, Any]], period, constant=0.0):
        """Build from config-style records ``{"k": [..], "cos": a, "sin": b}``."""
        period = np.atleast_1d(np.asarray(period, dtype=float))
        ks, a, b = [], [], []
        for term in terms:
            k = np.atleast_1d(np.asarray(term["k"], dtype=float))
            if k.size != period.size or np.any(k != np.round(k)):
                raise ValueError(f"wavevector {term['k']!r} must be {period.size} integers")
            ks.append(k)
            a.append(float(term.get("cos", 0.0)))
            b.append(float(term.get("sin", 0.0)))
        if not ks:
            return cls(np.zeros((0, period.size)), [], [], period, constant)
        return cls(np.array(ks), a, b, period, constant)

    def to_terms(self) -> list[dict]:
        return [
            {"k": [int(v) for v in k], "cos": float(a), "sin": float(b)}
            for k, a, b in zip(self.wavevectors, self.cos_coeffs, self.sin_coeffs)
        ]

    # -- evaluation -----------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.period.size

    def _phase(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return x @ self._freq.T  # (..., n)

    def __call__(self, x):
        th = self._phase(x)
        return self.constant + np.cos(th) @ self.cos_coeffs + np.sin(th) @ self.sin_coeffs

    def gradient(self, x):
        th = self._phase(x)
        g = (-np.sin(th) * self.cos_coeffs + np.cos(th) * self.sin_coeffs) @ self._freq
        if self.dim == 1:
            return g[..., 0]
        return g

    def hessian(self, x):
        th = self._phase(x)
        c = -(np.cos(th) * self.cos_coeffs + np.sin(th) * self.sin_coeffs)
        h = np.einsum("...n,ni,nj->...ij", c, self._freq, self._freq)
        if self.dim == 1:
            return h[..., 0, 0]
        return h

    def derivative(self, x, order: int):
        """``order``-th derivative of a one-dimensional series."""
        if self.dim != 1:
            raise ValueError("derivative() is for one-dimensional series")
        th = self._phase(x)
        w = self._freq[:, 0] ** order
        # d^n/dx^n cos = cos(x + n pi/2), likewise for sin
        shift = order * np.pi / 2
        out = np.cos(th + shift) @ (self.cos_coeffs * w) + np.sin(th + shift) @ (self.sin_coeffs * w)
        if order == 0:
            out = out + self.constant
        return out

    def sample_grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Values on a uniform ``n``-per-axis grid of one period cell."""
        axes = [np.arange(n) * (L / n) for L in self.period]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        if self.dim == 1:
            mesh = mesh[..., 0]
        return mesh, self(mesh)

    def oscillation(self, n: int = 512) -> float:
        """``max - min`` over a period, from a sample grid plus a curvature margin."""
        if self.wavevectors.shape[0] == 0:
            return 0.0
        _, vals = self.sample_grid(n if self.dim == 1 else 128)
        h = float(np.max(self.period)) / (n if self.dim == 1 else 128)
        curv = float(np.sum((np.abs(self.cos_coeffs) + np.abs(self.sin_coeffs))
                            * np.sum(self._freq ** 2, axis=1)))
        return float(np.ptp(vals)) + curv * h * h

    def gradient_bound(self) -> float:
        """Upper bound of ``|grad|`` from the coefficients."""
        amp = np.hypot(self.cos_coeffs, self.sin_coeffs)
        return float(np.sum(amp * np.linalg.norm(self._freq, axis=1)))
