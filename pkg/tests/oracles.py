"""Independent reference implementations used to freeze expected values.

These deliberately avoid the package's own code paths: plain loops,
finite differences, full enumerations.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def naive_fourier_1d(locations, weights, a_max):
    """coeff(a) = sum_k w_k (2 pi)^(-1/2) exp(-i a x_k), via a plain loop."""
    out = np.zeros(2 * a_max + 1, dtype=complex)
    for idx, a in enumerate(range(-a_max, a_max + 1)):
        total = 0.0 + 0.0j
        for x, w in zip(locations, weights):
            total += w * np.exp(-1j * a * x) / np.sqrt(TWO_PI)
        out[idx] = total
    return out


def two_particle_em(theta0, K, dt, n_steps, noise):
    """Scalar Euler-Maruyama for two Kuramoto particles on the complete
    graph with self-loops, matching the package's wrapping convention."""
    th = list(theta0)
    for k in range(n_steps):
        d0 = (-K * np.sin(th[0] - th[0]) - K * np.sin(th[0] - th[1])) / 2.0
        d1 = (-K * np.sin(th[1] - th[0]) - K * np.sin(th[1] - th[1])) / 2.0
        th[0] = np.mod(th[0] + d0 * dt + noise[k, 0], TWO_PI)
        th[1] = np.mod(th[1] + d1 * dt + noise[k, 1], TWO_PI)
    return np.array(th)


def fd_fokker_planck_kuramoto(dens0, K, t_final, grid, dt=None):
    """Finite-difference solver for the Kuramoto mean-field density:
    second-order central differences, explicit Euler (diffusion-stable dt),
    the convolution reduced to the first trigonometric moments."""
    G = grid
    h = TWO_PI / G
    if dt is None:
        dt = 0.4 * h * h
    n_steps = int(round(t_final / dt))
    dt = t_final / n_steps
    theta = h * np.arange(G)
    mu = np.asarray(dens0, dtype=np.float64).copy()
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    for _ in range(n_steps):
        C = np.sum(cos_t * mu) * h
        S = np.sum(sin_t * mu) * h
        V = -K * (sin_t * C - cos_t * S)      # (Gamma * mu)(theta)
        flux = mu * V
        lap = (np.roll(mu, -1) - 2.0 * mu + np.roll(mu, 1)) / h**2
        div = (np.roll(flux, -1) - np.roll(flux, 1)) / (2.0 * h)
        mu = mu + dt * (0.5 * lap - div)
    return mu


def full_enumeration_sn(A, pattern, l=0):
    """Brute-force supremum over all three sign vectors from the defining
    coefficient tensor; exponential cost, n <= 7 or so."""
    n = A.shape[0]
    T = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if pattern == "tri_ulr":
                    T[i, j, k] = A[i, j] * A[i, k]
                elif pattern == "tri_udd":
                    T[i, j, k] = A[i, j] * A[j, k]
                elif pattern == "tri_vzt":
                    T[i, j, k] = A[i, k] * A[j, k]
                elif pattern == "tri_umr":
                    T[i, j, k] = A[i, j] * A[k, i]
                elif pattern == "tri_udlr":
                    T[i, j, k] = A[l, i] * A[i, j] * A[i, k]
                elif pattern == "tri_uddd":
                    T[i, j, k] = A[l, i] * A[i, j] * A[j, k]
                else:
                    raise ValueError(pattern)
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij"))
    signs = signs.reshape(n, -1).T          # (2^n, n)
    M1 = np.tensordot(signs, T, axes=(1, 0))       # (S, n, n)
    M2 = np.tensordot(M1, signs.T, axes=(2, 0))    # (S, n, S)
    vals = np.abs(np.tensordot(M2, signs.T, axes=(1, 0)))  # |sum| over all triples
    return float(vals.max()) / n**3


def full_enumeration_pair(A):
    n = A.shape[0]
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
    vals = np.abs(signs @ A @ signs.T)
    return float(vals.max()) / n**2


def ou_second_moment(a, t, var0):
    """E|c_a(eta_t)|^2 for the zero-kernel limit SPDE, derived from the
    Duhamel formula with noise intensity a^2/(2 pi) per unit time."""
    if a == 0:
        return var0
    decay = np.exp(-float(a) ** 2 * t)
    return decay * var0 + (1.0 - decay) / TWO_PI


def wrapped_gaussian_density(theta, centers, weights, sigma, terms=8):
    """Mollified atomic measure: sum of wrapped normals."""
    theta = np.asarray(theta)
    out = np.zeros_like(theta, dtype=float)
    for c, w in zip(centers, weights):
        for k in range(-terms, terms + 1):
            out += w * np.exp(-0.5 * ((theta - c + TWO_PI * k) / sigma) ** 2) \
                / (sigma * np.sqrt(TWO_PI))
    return out
