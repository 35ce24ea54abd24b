"""Interaction kernels Gamma(theta, theta') and intrinsic drifts F(theta).

A kernel carries a plain evaluator plus, when available, its Fourier
data in the convention

    Gamma(t1, t2) = sum_{a,b} g[a, b] * exp(i*(a*t1 + b*t2)),

which the spectral solvers and the fast drift path consume.  Kernels
without explicit modes get them numerically from a 2-d FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass
class KernelSpec:
    gamma: Callable[[np.ndarray, np.ndarray], np.ndarray]
    intrinsic: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fourier_modes: Optional[list[tuple[int, int, complex]]] = None
    label: str = "custom"

    _table_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def gamma_from_modes(self, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
        if self.fourier_modes is None:
            raise ValueError("kernel has no Fourier modes")
        out = np.zeros(np.broadcast(t1, t2).shape, dtype=complex)
        for a, b, c in self.fourier_modes:
            out += c * np.exp(1j * (a * np.asarray(t1) + b * np.asarray(t2)))
        return out.real

    def mode_table(self, band: int) -> np.ndarray:
        """g[a+band, b+band] for |a|,|b| <= band (exact or via FFT)."""
        if band in self._table_cache:
            return self._table_cache[band]
        size = 2 * band + 1
        G = np.zeros((size, size), dtype=complex)
        if self.fourier_modes is not None:
            for a, b, c in self.fourier_modes:
                if abs(a) <= band and abs(b) <= band:
                    G[a + band, b + band] = c
        else:
            m = max(4 * band + 4, 32)
            theta = 2.0 * np.pi * np.arange(m) / m
            samples = self.gamma(theta[:, None], theta[None, :])
            F = np.fft.fft2(samples) / m**2
            for a in range(-band, band + 1):
                for b in range(-band, band + 1):
                    G[a + band, b + band] = F[a % m, b % m]
        self._table_cache[band] = G
        return G

    def intrinsic_modes(self, band: int) -> np.ndarray:
        """fhat[c+band] with F(theta) = sum_c fhat[c] exp(i*c*theta)."""
        out = np.zeros(2 * band + 1, dtype=complex)
        if self.intrinsic is None:
            return out
        m = max(4 * band + 4, 32)
        theta = 2.0 * np.pi * np.arange(m) / m
        F = np.fft.fft(self.intrinsic(theta)) / m
        for c in range(-band, band + 1):
            out[c + band] = F[c % m]
        return out

    def sup_norm(self, grid: int = 512) -> float:
        theta = 2.0 * np.pi * np.arange(grid) / grid
        return float(np.abs(self.gamma(theta[:, None], theta[None, :])).max())

    def intrinsic_sup_norm(self, grid: int = 512) -> float:
        if self.intrinsic is None:
            return 0.0
        theta = 2.0 * np.pi * np.arange(grid) / grid
        return float(np.abs(self.intrinsic(theta)).max())


def kuramoto(K: float = 1.0) -> KernelSpec:
    """Gamma(t1, t2) = -K sin(t1 - t2)."""
    K = float(K)
    return KernelSpec(
        gamma=lambda t1, t2: -K * np.sin(np.asarray(t1) - np.asarray(t2)),
        fourier_modes=[(1, -1, 0.5j * K), (-1, 1, -0.5j * K)],
        label=f"kuramoto(K={K:g})",
    )


def zero_kernel() -> KernelSpec:
    return KernelSpec(
        gamma=lambda t1, t2: np.zeros(np.broadcast(np.asarray(t1), np.asarray(t2)).shape),
        fourier_modes=[],
        label="zero",
    )


def kernel_from_config(cfg: dict) -> KernelSpec:
    kind = cfg.get("type", "kuramoto")
    if kind == "kuramoto":
        return kuramoto(cfg.get("K", 1.0))
    if kind == "zero":
        return zero_kernel()
    raise ValueError(f"unknown kernel type {kind!r}")
