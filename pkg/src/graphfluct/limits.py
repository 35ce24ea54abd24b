"""Spectral solvers for the limit PDE and the limiting fluctuation SPDEs.

Everything lives on the truncated orthonormal Fourier basis of
``measures`` (coefficients c_a = <field, conj(e_a)>).  The nonlinear
Fokker-Planck equation

    d/dt mu = 1/2 mu'' - d/dtheta [ mu * (Gamma * mu + F) ]

is integrated with an exponential factor on the diffusion (exact heat
semigroup) and a pseudo-spectral transport term, so mass is conserved
exactly and the zero-kernel case reproduces exp(-a^2 t / 2) to machine
precision.

Linear operators are assembled as matrices acting on test-function
coefficients; their action on field coefficients (the adjoint flow) is
the flip-transpose ``M[::-1, ::-1].T``, which works verbatim for
flattened 2-d mode grids since reversing a row-major (a, b) grid negates
both indices.

Gaussian noise increments are sampled in the real trigonometric basis:
the covariance <mu, df dg> over {cos(a.), sin(a.)}/sqrt(pi) is a Gram
matrix, hence positive semidefinite by construction; its eigenfactor is
cached per stored mu snapshot.  Mode coefficients are recovered via
c_a = (x_cos - i x_sin)/sqrt(2), which keeps every sampled field real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .kernels import KernelSpec
from .measures import (
    TWO_PI,
    AtomicMeasure,
    SpectralField,
    _fourier_any,
    sobolev_norm,
)
from .rng import LIMIT, stream

MeasureLike = Union[AtomicMeasure, SpectralField]


class SolverBlowupError(RuntimeError):
    def __init__(self, t: float, magnitude: float):
        super().__init__(f"spectral solve blew up at t={t:.6g} (max |coeff| = {magnitude:.3g})")
        self.t = t
        self.magnitude = magnitude


# ---------------------------------------------------------------------------
# kernel / measure mode helpers
# ---------------------------------------------------------------------------

def _kernel_band(kernel: KernelSpec, default: int = 8) -> int:
    if kernel.fourier_modes is not None:
        if not kernel.fourier_modes:
            return 0
        return max(max(abs(a), abs(b)) for a, b, _ in kernel.fourier_modes)
    return default


def _exp_moments(mu: MeasureLike, band: int) -> np.ndarray:
    """M_m = int exp(i m theta) d mu for |m| <= band (index m + band)."""
    f = _fourier_any(mu, band) if not isinstance(mu, AtomicMeasure) else mu.fourier(band)
    return np.sqrt(TWO_PI) * f.coeffs[::-1]


def _drift_field_modes(mu: MeasureLike, kernel: KernelSpec, band: int) -> np.ndarray:
    """v_c with (Gamma * mu)(theta) + F(theta) = sum_c v_c exp(i c theta)."""
    if band == 0 and kernel.intrinsic is None:
        return np.zeros(1, dtype=complex)
    G = kernel.mode_table(band)
    M = _exp_moments(mu, band)
    v = G @ M + kernel.intrinsic_modes(band)
    return v


# ---------------------------------------------------------------------------
# Fokker-Planck (and the two-community variant)
# ---------------------------------------------------------------------------

@dataclass
class FPTrajectory:
    a_max: int
    dt: float
    coeffs: np.ndarray  # (n_steps+1, 2A+1) complex

    @property
    def n_steps(self) -> int:
        return self.coeffs.shape[0] - 1

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.coeffs.shape[0])

    def field(self, k: int) -> SpectralField:
        return SpectralField(1, self.coeffs[k])

    def at_time(self, t: float) -> SpectralField:
        k = int(round(t / self.dt))
        k = min(max(k, 0), self.n_steps)
        return self.field(k)

    def order_parameter_series(self) -> tuple[np.ndarray, np.ndarray]:
        """r_t, psi_t with r e^{i psi} = <mu_t, e^{i theta}>."""
        A = self.a_max
        z = np.sqrt(TWO_PI) * self.coeffs[:, A - 1]  # c_{-1}
        return np.abs(z), np.mod(np.angle(z), TWO_PI)


def _fp_transport(coeffs_list, weights, kernel, grid, a_idx, band):
    """Pseudo-spectral coefficients of d/dtheta [mu_i * V_i] for a system
    of densities with V_i = Gamma * (sum_j W_ij mu_j) + F."""
    G = grid
    theta = TWO_PI * np.arange(G) / G
    dens = []
    for c in coeffs_list:
        spec = np.zeros(G, dtype=complex)
        spec[a_idx % G] = c
        dens.append(np.fft.ifft(spec) * G / np.sqrt(TWO_PI))
    cband = np.arange(-band, band + 1)
    Eband = np.exp(1j * np.outer(theta, cband))
    out = []
    for i in range(len(coeffs_list)):
        mix = sum(w * coeffs_list[j] for j, w in enumerate(weights[i]))
        v = _drift_field_modes(SpectralField(1, mix), kernel, band)
        prod = dens[i] * (Eband @ v)
        Np = np.fft.fft(prod) * np.sqrt(TWO_PI) / G
        out.append(1j * a_idx * Np[a_idx % G])
    return out


def _solve_fp_system(mu0_list, mixing, kernel, t_final, dt, a_max,
                     check_every: int = 25):
    n_steps = int(round(t_final / dt))
    K = 2 * a_max + 1
    a_idx = np.arange(-a_max, a_max + 1)
    band = _kernel_band(kernel)
    grid = max(4 * (a_max + band + 1), 64)
    E = np.exp(-0.5 * a_idx.astype(float) ** 2 * dt)
    cur = [np.asarray(_fourier_any(m, a_max).coeffs, dtype=complex) for m in mu0_list]
    hist = [np.empty((n_steps + 1, K), dtype=complex) for _ in mu0_list]
    for h, c in zip(hist, cur):
        h[0] = c
    for k in range(1, n_steps + 1):
        transports = _fp_transport(cur, mixing, kernel, grid, a_idx, band)
        cur = [E * (c - dt * tr) for c, tr in zip(cur, transports)]
        for h, c in zip(hist, cur):
            h[k] = c
        if k % check_every == 0 or k == n_steps:
            m = max(float(np.abs(c).max()) for c in cur)
            if not np.isfinite(m) or m > 1e8:
                raise SolverBlowupError(k * dt, m)
    return [FPTrajectory(a_max, dt, h) for h in hist]


def solve_fokker_planck(mu0: MeasureLike, kernel: KernelSpec, t_final: float,
                        dt: float = 1e-3, a_max: int = 64) -> FPTrajectory:
    """Mean-field limit density; mu0 may be spectral or atomic (Diracs are
    usable directly, the heat factor damps unresolved modes immediately)."""
    return _solve_fp_system([mu0], [[1.0]], kernel, t_final, dt, a_max)[0]


def solve_fokker_planck_sbm(mu0_pair, alpha: float, kernel: KernelSpec, t_final: float,
                            dt: float = 1e-3, a_max: int = 64):
    """Two-community system: community i is driven by
    Gamma * (alpha mu_i + (1-alpha) mu_other)."""
    mixing = [[alpha, 1.0 - alpha], [1.0 - alpha, alpha]]
    return tuple(_solve_fp_system(list(mu0_pair), mixing, kernel, t_final, dt, a_max))


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------

@dataclass
class OperatorMatrix:
    which: str
    a_max: int
    time: float
    matrix: np.ndarray  # columns: test-function coefficients

    def adjoint_matrix(self) -> np.ndarray:
        """Hilbert adjoint in the orthonormal basis."""
        return np.conj(self.matrix).T

    def solver_matrix(self) -> np.ndarray:
        """Action on field pairing-coefficients c_a = <field, conj(e_a)>:
        dc = solver_matrix() @ c reproduces d<field, f> = <field, L f>."""
        return self.matrix[::-1, ::-1].T


def _flat(b1: np.ndarray, b2: np.ndarray, A: int) -> np.ndarray:
    return (b1 + A) * (2 * A + 1) + (b2 + A)


def assemble_operator(which: str, mu: Optional[MeasureLike], kernel: KernelSpec,
                      a_max: int, time: float = 0.0) -> OperatorMatrix:
    """Galerkin matrix of one of the limit generators.

    which: "L1" | "U" | "V" (maps functions on T to functions on T),
           "L2" (functions on T^2), "Theta" (functions on T to T^2).
    ``mu`` is the frozen density entering the coefficients (unused for
    Theta, which is time independent).
    """
    A = a_max
    K = 2 * A + 1
    B = _kernel_band(kernel)
    G = kernel.mode_table(B)
    bs = np.arange(-A, A + 1)
    cs = np.arange(-B, B + 1)
    need_mu = which in ("L1", "U", "V", "L2")
    if need_mu:
        if mu is None:
            raise ValueError(f"operator {which} needs a density")
        Mex = _exp_moments(mu, A + B)  # index m + (A+B)
        v = _drift_field_modes(mu, kernel, B)

    if which in ("L1", "U"):
        M = np.zeros((K, K), dtype=complex)
        M[np.arange(K), np.arange(K)] = -0.5 * bs.astype(float) ** 2
        for ci, c in enumerate(cs):
            if v[ci] == 0:
                continue
            ok = np.abs(bs + c) <= A
            M[_b(bs[ok] + c, A), _b(bs[ok], A)] += 1j * bs[ok] * v[ci]
        if which == "L1":
            for ci, c in enumerate(cs):
                for di, d in enumerate(cs):
                    g = G[ci, di]
                    if g == 0 or abs(d) > A:
                        continue
                    M[_b(d, A), _b(bs, A)] += 1j * bs * g * Mex[bs + c + A + B]
        return OperatorMatrix(which, A, time, M)

    if which == "V":
        M = np.zeros((K, K), dtype=complex)
        for ci, c in enumerate(cs):
            for di, d in enumerate(cs):
                g = G[ci, di]
                if g == 0 or abs(d) > A:
                    continue
                M[_b(d, A), _b(bs, A)] += 1j * bs * g * Mex[bs + c + A + B]
        return OperatorMatrix(which, A, time, M)

    if which == "Theta":
        M = np.zeros((K * K, K), dtype=complex)
        for ci, c in enumerate(cs):
            for di, d in enumerate(cs):
                g = G[ci, di]
                if g == 0 or abs(d) > A:
                    continue
                ok = np.abs(bs + c) <= A
                rows = _flat(bs[ok] + c, np.full(ok.sum(), d), A)
                M[rows, _b(bs[ok], A)] += 1j * bs[ok] * np.sqrt(TWO_PI) * g
        return OperatorMatrix(which, A, time, M)

    if which == "L2":
        b1 = np.repeat(bs, K)
        b2 = np.tile(bs, K)
        M = np.zeros((K * K, K * K), dtype=complex)
        idx = np.arange(K * K)
        M[idx, idx] = -0.5 * (b1.astype(float) ** 2 + b2.astype(float) ** 2)
        for ci, c in enumerate(cs):
            if v[ci] == 0:
                continue
            ok = np.abs(b1 + c) <= A
            M[_flat(b1[ok] + c, b2[ok], A), idx[ok]] += 1j * b1[ok] * v[ci]
            ok = np.abs(b2 + c) <= A
            M[_flat(b1[ok], b2[ok] + c, A), idx[ok]] += 1j * b2[ok] * v[ci]
        return OperatorMatrix(which, A, time, M)

    raise ValueError(f"unknown operator {which!r}")


def _b(b, A):
    return np.asarray(b) + A


# ---------------------------------------------------------------------------
# noise models
# ---------------------------------------------------------------------------

def _quad_points(mu: MeasureLike, grid: int = 512) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(mu, AtomicMeasure):
        return mu.locations, mu.weights
    dens = np.clip(mu.density(grid), 0.0, None)
    theta = TWO_PI * np.arange(grid) / grid
    return theta, dens * TWO_PI / grid


def _real_basis(theta: np.ndarray, a_max: int, derivative: bool) -> np.ndarray:
    """Rows: [cos(a.)/sqrt(pi) for a=1..A] + [sin(a.)/sqrt(pi) ...] or
    their derivatives, evaluated at theta."""
    a = np.arange(1, a_max + 1)[:, None]
    if derivative:
        top = -a * np.sin(a * theta[None, :])
        bot = a * np.cos(a * theta[None, :])
    else:
        top = np.cos(a * theta[None, :])
        bot = np.sin(a * theta[None, :])
    return np.vstack([top, bot]) / np.sqrt(np.pi)


def modes_from_real(x: np.ndarray, a_max: int) -> np.ndarray:
    """Map real-basis samples (..., 2A) to field coefficients (..., 2A+1):
    c_a = (x_cos[a] - i x_sin[a]) / sqrt(2), c_{-a} = conj(c_a), c_0 = 0."""
    A = a_max
    xc = x[..., :A]
    xs = x[..., A:]
    pos = (xc - 1j * xs) / np.sqrt(2.0)
    out = np.zeros(x.shape[:-1] + (2 * A + 1,), dtype=complex)
    out[..., A + 1:] = pos
    out[..., :A] = np.conj(pos[..., ::-1])
    return out


class NoiseModel:
    """Gaussian forcing with covariance int <mu_u, df dg> du.

    The Hermitian mode covariance C[a, b] = <mu, d e_a d conj(e_b)> is
    exposed for verification; sampling goes through the real basis whose
    covariance is a Gram matrix (PSD by construction).  Factorizations
    are cached per snapshot index and linearly interpolated in between.
    """

    def __init__(self, a_max: int, p: Optional[float] = None):
        self.a_max = a_max
        self.p = p
        self._factor_cache: dict = {}

    def hermitian_covariance(self, mu: MeasureLike) -> np.ndarray:
        """C[a, b] = <mu, d e_a d conj(e_b)> = a b / (2 pi) int e^{i(a-b)t} dmu.

        Sampled increments are stored as pairing coefficients
        c_a = W(conj(e_a)), whose second moments satisfy
        E[conj(c_a) c_b] = C[a, b]."""
        A = self.a_max
        a = np.arange(-A, A + 1)
        Mex = _exp_moments(mu, 2 * A)  # index m + 2A
        C = (a[:, None] * a[None, :]).astype(complex)
        C *= Mex[(a[:, None] - a[None, :]) + 2 * A] / TWO_PI
        return C

    def local_block_covariance(self, mu: MeasureLike) -> np.ndarray:
        if self.p is None:
            raise ValueError("local covariance needs the limiting edge density p")
        C = self.hermitian_covariance(mu)
        B = self.block_correlation(self.p)
        return np.kron(B, C)

    @staticmethod
    def block_correlation(p: float) -> np.ndarray:
        s = np.sqrt(p)
        return np.array([[1.0, p, s], [p, 1.0, s], [s, s, 1.0]])

    @staticmethod
    def block_factor(p: float) -> np.ndarray:
        """R with R R^T = block_correlation(p); rows (W^1, W^2, W) combine
        independent (Z, Y_1, Y_2)."""
        s, q = np.sqrt(p), np.sqrt(1.0 - p)
        return np.array([[s, q, 0.0], [s, 0.0, q], [1.0, 0.0, 0.0]])

    def real_covariance(self, mu: MeasureLike) -> np.ndarray:
        theta, w = _quad_points(mu)
        Phi = _real_basis(theta, self.a_max, derivative=True)
        return (Phi * w[None, :]) @ Phi.T

    def spatial_factor(self, mu: MeasureLike, cache_key=None) -> np.ndarray:
        """S with S S^T = real_covariance(mu); eigendecomposition, reused
        while the snapshot coefficients are unchanged (single-slot cache)."""
        key = cache_key
        if key is None and isinstance(mu, SpectralField):
            key = mu.coeffs.tobytes()
        if key is not None and self._factor_cache.get("key") == key:
            return self._factor_cache["S"]
        Sigma = self.real_covariance(mu)
        lam, U = np.linalg.eigh(Sigma)
        if lam.min() < -1e-10 * max(1.0, lam.max()):
            raise ValueError(f"noise covariance has negative eigenvalue {lam.min():.3e}")
        S = U * np.sqrt(np.clip(lam, 0.0, None))[None, :]
        if key is not None:
            self._factor_cache = {"key": key, "S": S}
        return S

    def factor_between(self, mu_a: MeasureLike, mu_b: MeasureLike, lam: float,
                       key_a=None, key_b=None) -> np.ndarray:
        """Square roots linearly interpolated between two snapshots."""
        Sa = self.spatial_factor(mu_a, key_a)
        if lam <= 0.0:
            return Sa
        Sb = self.spatial_factor(mu_b, key_b)
        return (1.0 - lam) * Sa + lam * Sb


# ---------------------------------------------------------------------------
# initial laws for the fluctuation fields
# ---------------------------------------------------------------------------

HAT_ETA0_PRESETS = {
    # statement-level constants; the two disagree in the source material,
    # both are kept and the Monte Carlo estimator arbitrates empirically
    "prop26": (
        1.0 / (6.0 * np.sqrt(np.pi)),
        [((0.0, 0.0), -1.0), ((np.pi / 2, 0.0), 2.0), ((np.pi / 2, np.pi / 2), -1.0)],
    ),
    "sec35": (
        2.0 / (3.0 * np.sqrt(np.pi)),
        [((0.0, 0.0), -1.0), ((0.0, np.pi / 2), 1.0), ((np.pi / 2, 0.0), 1.0),
         ((np.pi / 2, np.pi / 2), -1.0)],
    ),
}


def hat_eta0_preset(name: str, a_max: int) -> SpectralField:
    scale, atoms = HAT_ETA0_PRESETS[name]
    locs = np.array([loc for loc, _ in atoms])
    w = scale * np.array([c for _, c in atoms])
    return AtomicMeasure(2, locs, w, label=f"hat_eta0:{name}").fourier(a_max)


@dataclass
class InitialLawSpec:
    kind: str                      # zero | gaussian_clt | local_joint | explicit_atoms
    mu0: Optional[MeasureLike] = None
    p: float = 1.0
    hat_preset: str = "prop26"


def _clt_factor(mu0: MeasureLike, a_max: int) -> np.ndarray:
    """S with S S^T = Cov_{mu0} over the real basis (Gram minus rank one)."""
    theta, w = _quad_points(mu0)
    Phi = _real_basis(theta, a_max, derivative=False)
    mean = Phi @ w
    Sigma = (Phi * w[None, :]) @ Phi.T - np.outer(mean, mean)
    lam, U = np.linalg.eigh(Sigma)
    return U * np.sqrt(np.clip(lam, 0.0, None))[None, :]


def sample_initial(spec: InitialLawSpec, a_max: int, seed: int, m: int = 1) -> dict:
    """Draw mode-space initial vectors; shapes are (m, 2A+1) complex."""
    rng = stream(seed, LIMIT, 0)
    K = 2 * a_max + 1
    if spec.kind == "zero":
        zero = np.zeros((m, K), dtype=complex)
        return {"eta0": zero.copy(), "zeta1_0": zero.copy(), "zeta2_0": zero.copy()}
    if spec.kind == "gaussian_clt":
        S = _clt_factor(spec.mu0, a_max)
        x = rng.standard_normal((m, S.shape[1])) @ S.T
        return {"eta0": modes_from_real(x, a_max)}
    if spec.kind == "local_joint":
        S = _clt_factor(spec.mu0, a_max)
        p = spec.p
        cmu = (_fourier_any(spec.mu0, a_max).coeffs if not isinstance(spec.mu0, AtomicMeasure)
               else spec.mu0.fourier(a_max).coeffs)
        H = modes_from_real(rng.standard_normal((m, S.shape[1])) @ S.T, a_max)
        V1 = modes_from_real(rng.standard_normal((m, S.shape[1])) @ S.T, a_max)
        V2 = modes_from_real(rng.standard_normal((m, S.shape[1])) @ S.T, a_max)
        G = np.sqrt(1.0 - p) * rng.standard_normal((m, 2))
        z1 = np.sqrt(p) * H + np.sqrt(1.0 - p) * V1 + G[:, :1] * cmu[None, :]
        z2 = np.sqrt(p) * H + np.sqrt(1.0 - p) * V2 + G[:, 1:] * cmu[None, :]
        return {"eta0": H, "zeta1_0": z1, "zeta2_0": z2}
    if spec.kind == "explicit_atoms":
        Z = 0.5 * rng.standard_normal((m, 1))
        d0 = AtomicMeasure(1, [0.0], [1.0]).fourier(a_max).coeffs
        d1 = AtomicMeasure(1, [np.pi / 2], [1.0]).fourier(a_max).coeffs
        return {"eta0": Z * (d0 - d1)[None, :],
                "hat_eta0": hat_eta0_preset(spec.hat_preset, a_max)}
    raise ValueError(f"unknown initial law {spec.kind!r}")


# ---------------------------------------------------------------------------
# SPDE integration
# ---------------------------------------------------------------------------

@dataclass
class ModeTrajectory:
    a_max: int
    dt: float
    save_steps: np.ndarray
    values: np.ndarray            # (n_save, m, 2A+1) complex
    noise_record: Optional[np.ndarray] = None
    hat_values: Optional[np.ndarray] = None

    def times(self) -> np.ndarray:
        return self.dt * self.save_steps

    def final(self) -> np.ndarray:
        return self.values[-1]


def _solver_transport(which: str, mu: MeasureLike, kernel: KernelSpec, a_max: int):
    """Solver-form matrix with the Laplacian diagonal removed (the
    diffusion is applied exactly through the exponential factor)."""
    op = assemble_operator(which, mu, kernel, a_max)
    R = op.solver_matrix()
    bs = np.arange(-a_max, a_max + 1).astype(float)
    if which in ("L1", "U"):
        R = R + np.diag(0.5 * bs**2)
    return R


def _theta_solver(kernel: KernelSpec, a_max: int) -> np.ndarray:
    op = assemble_operator("Theta", None, kernel, a_max)
    return op.solver_matrix()  # shape (K, K*K)


def _l2_solver(mu: MeasureLike, kernel: KernelSpec, a_max: int) -> np.ndarray:
    op = assemble_operator("L2", mu, kernel, a_max)
    R = op.solver_matrix()
    bs = np.arange(-a_max, a_max + 1)
    b1 = np.repeat(bs, 2 * a_max + 1).astype(float)
    b2 = np.tile(bs, 2 * a_max + 1).astype(float)
    return R + np.diag(0.5 * (b1**2 + b2**2))


def solve_coupled(eta0: np.ndarray, hat_eta0: Optional[SpectralField],
                  mu_traj: FPTrajectory, kernel: KernelSpec, seed: int = 0,
                  save_every: int = 100, noise_path: Optional[np.ndarray] = None,
                  record_noise: bool = False, noise_chunk: int = 64) -> ModeTrajectory:
    """System: eta driven by L1* + Theta* hat_eta + W; hat_eta evolves
    deterministically by L2*.  ``eta0`` is (m, 2A+1) or (2A+1,).

    A second-order field that is identically zero stays zero (linear
    deterministic flow), in which case the eta recursion is bit-identical
    to ``solve_limit_eta`` under the same seed.
    """
    eta = np.atleast_2d(np.asarray(eta0, dtype=complex)).copy()
    m, K = eta.shape
    A = (K - 1) // 2
    dt = mu_traj.dt
    n_steps = mu_traj.n_steps
    has_hat = hat_eta0 is not None and np.any(hat_eta0.coeffs != 0)
    if has_hat and hat_eta0.a_max != A:
        raise ValueError(f"second-order field cutoff {hat_eta0.a_max} must match "
                         f"the first-order cutoff {A}")
    noise = NoiseModel(A)
    bs = np.arange(-A, A + 1).astype(float)
    E = np.exp(-0.5 * bs**2 * dt)
    E2 = None
    hat = None
    theta_T = None
    if has_hat:
        hat = hat_eta0.coeffs.reshape(-1).astype(complex).copy()
        b1 = np.repeat(bs, K)
        b2 = np.tile(bs, K)
        E2 = np.exp(-0.5 * (b1**2 + b2**2) * dt)
        theta_T = _theta_solver(kernel, A).T  # (K*K, K)
    gens = [stream(seed, LIMIT, 1 + r) for r in range(m)]
    sqrt_dt = np.sqrt(dt)
    chunk = max(1, noise_chunk)
    buf = np.empty((m, chunk, 2 * A), dtype=np.float64)
    used = chunk
    save_steps = sorted(set(list(range(0, n_steps + 1, max(1, save_every))) + [n_steps]))
    out = np.empty((len(save_steps), m, K), dtype=complex)
    hat_out = np.empty((len(save_steps), K * K), dtype=complex) if has_hat else None
    rec = np.empty((n_steps, m, K), dtype=complex) if record_noise else None
    si = 0
    if 0 in save_steps:
        out[0] = eta
        if has_hat:
            hat_out[0] = hat
        si = 1
    last_row = None
    R = L2 = S = None
    for k in range(1, n_steps + 1):
        row = mu_traj.coeffs[k - 1]
        if last_row is None or not np.array_equal(row, last_row):
            mu_k = mu_traj.field(k - 1)
            R = _solver_transport("L1", mu_k, kernel, A)
            S = noise.spatial_factor(mu_k, cache_key=k - 1) if noise_path is None else None
            if has_hat:
                L2 = _l2_solver(mu_k, kernel, A)
            last_row = row
        if noise_path is not None:
            dW = noise_path[k - 1]
        else:
            if used == chunk:
                for r in range(m):
                    buf[r] = gens[r].standard_normal((chunk, 2 * A))
                used = 0
            x = buf[:, used] @ S.T * sqrt_dt
            used += 1
            dW = modes_from_real(x, A)
        if record_noise:
            rec[k - 1] = dW
        drift = eta @ R.T
        if has_hat:
            theta_term = hat @ theta_T
            eta = E * (eta + dt * drift + dt * theta_term[None, :] + dW)
            hat = E2 * (hat + dt * (L2 @ hat))
        else:
            eta = E * (eta + dt * drift + dW)
        if si < len(save_steps) and k == save_steps[si]:
            out[si] = eta
            if has_hat:
                hat_out[si] = hat
            si += 1
    return ModeTrajectory(A, dt, np.asarray(save_steps), out, noise_record=rec,
                          hat_values=hat_out)


def solve_limit_eta(eta0: np.ndarray, mu_traj: FPTrajectory, kernel: KernelSpec,
                    seed: int = 0, save_every: int = 100,
                    noise_path: Optional[np.ndarray] = None,
                    record_noise: bool = False, noise_chunk: int = 64) -> ModeTrajectory:
    """Universal mean-field fluctuation SPDE (no second-order coupling)."""
    return solve_coupled(eta0, None, mu_traj, kernel, seed=seed, save_every=save_every,
                         noise_path=noise_path, record_noise=record_noise,
                         noise_chunk=noise_chunk)


def solve_local_system(init: dict, p: float, mu_traj: FPTrajectory, kernel: KernelSpec,
                       seed: int = 0, save_every: int = 100,
                       noise_chunk: int = 64) -> dict:
    """Joint (zeta^1, zeta^2, eta) flow with correlated noise.

    init holds (m, 2A+1) arrays "zeta1_0", "zeta2_0", "eta0"; the noise
    triple combines independent spatial draws through the explicit
    block factor, realizing the p / sqrt(p) cross-covariances.
    """
    z1 = np.atleast_2d(np.asarray(init["zeta1_0"], dtype=complex)).copy()
    z2 = np.atleast_2d(np.asarray(init["zeta2_0"], dtype=complex)).copy()
    eta = np.atleast_2d(np.asarray(init["eta0"], dtype=complex)).copy()
    m, K = eta.shape
    A = (K - 1) // 2
    dt = mu_traj.dt
    n_steps = mu_traj.n_steps
    noise = NoiseModel(A, p=p)
    RB = NoiseModel.block_factor(p)
    bs = np.arange(-A, A + 1).astype(float)
    E = np.exp(-0.5 * bs**2 * dt)
    gens = [stream(seed, LIMIT, 1 + r) for r in range(m)]
    sqrt_dt = np.sqrt(dt)
    chunk = max(1, noise_chunk)
    buf = np.empty((m, chunk, 3, 2 * A))
    used = chunk
    save_steps = sorted(set(list(range(0, n_steps + 1, max(1, save_every))) + [n_steps]))
    out = {name: np.empty((len(save_steps), m, K), dtype=complex)
           for name in ("zeta1", "zeta2", "eta")}
    si = 0
    if 0 in save_steps:
        out["zeta1"][0], out["zeta2"][0], out["eta"][0] = z1, z2, eta
        si = 1
    sqrt_p = np.sqrt(p)
    last_row = None
    RU = RV = RL1 = S = None
    for k in range(1, n_steps + 1):
        row = mu_traj.coeffs[k - 1]
        if last_row is None or not np.array_equal(row, last_row):
            mu_k = mu_traj.field(k - 1)
            RU = _solver_transport("U", mu_k, kernel, A)
            RV = assemble_operator("V", mu_k, kernel, A).solver_matrix()
            RL1 = _solver_transport("L1", mu_k, kernel, A)
            S = noise.spatial_factor(mu_k, cache_key=k - 1)
            last_row = row
        if used == chunk:
            for r in range(m):
                buf[r] = gens[r].standard_normal((chunk, 3, 2 * A))
            used = 0
        raw = buf[:, used]                       # (m, 3, 2A) independent Z, Y1, Y2
        used += 1
        spatial = raw @ S.T * sqrt_dt            # apply spatial covariance
        mixed = np.einsum("ls,msk->mlk", RB, spatial)
        dW1 = modes_from_real(mixed[:, 0], A)
        dW2 = modes_from_real(mixed[:, 1], A)
        dW = modes_from_real(mixed[:, 2], A)
        v_term = eta @ RV.T
        z1 = E * (z1 + dt * (z1 @ RU.T) + dt * sqrt_p * v_term + dW1)
        z2 = E * (z2 + dt * (z2 @ RU.T) + dt * sqrt_p * v_term + dW2)
        eta = E * (eta + dt * (eta @ RL1.T) + dW)
        if si < len(save_steps) and k == save_steps[si]:
            out["zeta1"][si], out["zeta2"][si], out["eta"][si] = z1, z2, eta
            si += 1
    steps = np.asarray(save_steps)
    return {name: ModeTrajectory(A, dt, steps, vals) for name, vals in out.items()}


def eta_variance_closed_form(a: int, t: float, var0: float) -> float:
    """E |c_a(eta_t)|^2 for the zero-kernel flow from Gaussian initial data:
    exp(-a^2 t) var0 + (1 - exp(-a^2 t)) / (2 pi)."""
    if a == 0:
        return var0
    decay = np.exp(-float(a) ** 2 * t)
    return float(decay * var0 + (1.0 - decay) / TWO_PI)
