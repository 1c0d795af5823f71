"""Mean-field q-state Potts primitives.

The model lives on the complete graph with N sites and q spin values.
Everything reduces to the vector of spin proportions x in the simplex
Xi = {x >= 0, sum x = 1}: the energy per site is H(x) = -|x|^2/2, the
entropy is S(x) = sum_k x_k log x_k (with 0 log 0 = 0), and the free
energy at inverse temperature beta is

    F_beta(x) = H(x) + S(x) / beta.

Derivatives of F_beta are taken in the (q-1)-dimensional chart that keeps
the first q-1 coordinates and eliminates x_q = 1 - sum_{k<q} x_k.  In that
chart dF/dx_k = phi(x_q) - phi(x_k) with phi(t) = t - log(t)/beta.

Spin configurations are integer arrays with values in 0..q-1; sites are
0-based.  Three single-site jump-rate families are supported (square-root,
heat-bath, Metropolis), all reversible for the Gibbs measure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import BoundaryPoint, DomainError

SIMPLEX_TOL = 1e-12


class RateKind(enum.Enum):
    """Single-site jump-rate convention of the Glauber dynamics."""

    SQRT = "sqrt"
    HEAT_BATH = "heat-bath"
    METROPOLIS = "metropolis"

    @classmethod
    def from_string(cls, name: str) -> "RateKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown rate kind {name!r}; expected one of "
                         f"{[k.value for k in cls]}")


@dataclass(frozen=True)
class ModelParams:
    """Global instance descriptor: spin count, temperature, size, rate kind."""

    q: int
    beta: float
    n_sites: int = 1
    rate_kind: RateKind = RateKind.SQRT

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be >= 2")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")


def check_simplex(x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate a proportions vector: nonnegative, sums to 1 within tol."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("simplex point must be a 1-d vector")
    if np.any(x < -tol):
        raise ValueError("simplex point has a negative coordinate")
    if abs(x.sum() - 1.0) > max(tol, 4 * np.finfo(float).eps * x.size):
        raise ValueError("simplex coordinates do not sum to 1")
    return x


def check_counts(counts, n_sites: int) -> np.ndarray:
    """Validate a grid point: nonnegative integer counts summing to n_sites."""
    counts = np.asarray(counts)
    if counts.ndim != 1 or not np.issubdtype(counts.dtype, np.integer):
        raise ValueError("grid point must be a 1-d integer vector")
    if np.any(counts < 0) or counts.sum() != n_sites:
        raise ValueError("counts must be nonnegative and sum to n_sites")
    return counts


def project(spins, q: int) -> np.ndarray:
    """Spin-type counts of a configuration (the magnetization times N)."""
    spins = np.asarray(spins)
    return np.bincount(spins, minlength=q)


def hamiltonian(spins, params: ModelParams) -> float:
    """Energy -(1/2N) sum_{u,v} 1{spin_u = spin_v} (double sum, u=v included)."""
    counts = project(spins, params.q)
    n = len(np.asarray(spins))
    return -float(np.sum(counts.astype(float) ** 2)) / (2.0 * n)


def hamiltonian_of_counts(counts, n_sites: int) -> float:
    """Same energy computed from counts alone."""
    c = np.asarray(counts, dtype=float)
    return -float(np.sum(c**2)) / (2.0 * n_sites)


def phi(t, beta: float):
    """Scalar potential t - log(t)/beta; decreasing on (0, 1/beta]."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("phi requires t > 0")
    out = t - np.log(t) / beta
    return float(out) if out.ndim == 0 else out


def phi_prime(t, beta: float):
    t = np.asarray(t, dtype=float)
    out = 1.0 - 1.0 / (beta * t)
    return float(out) if out.ndim == 0 else out


def free_energy_value(x, beta: float) -> float:
    """F_beta at a single simplex point; boundary allowed via 0 log 0 = 0."""
    x = np.asarray(x, dtype=float)
    mask = x > 0.0
    entropy = float(np.sum(x[mask] * np.log(x[mask])))
    return -0.5 * float(np.sum(x * x)) + entropy / beta


def free_energy_values(xs, beta: float) -> np.ndarray:
    """Vectorized F_beta over rows of xs (m x q array of simplex points)."""
    xs = np.asarray(xs, dtype=float)
    xlogx = np.zeros_like(xs)
    mask = xs > 0.0
    xlogx[mask] = xs[mask] * np.log(xs[mask])
    return -0.5 * np.sum(xs * xs, axis=-1) + np.sum(xlogx, axis=-1) / beta


def free_energy_grad(x, beta: float) -> np.ndarray:
    """Gradient of F_beta in the first-(q-1)-coordinates chart."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise BoundaryPoint("gradient undefined on the simplex boundary")
    return phi(x[-1], beta) - phi(x[:-1], beta)


def free_energy_hessian(x, beta: float) -> np.ndarray:
    """Hessian of F_beta in the chart: -phi'(x_q) 11^T - diag(phi'(x_k))."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise BoundaryPoint("Hessian undefined on the simplex boundary")
    qm1 = len(x) - 1
    hess = np.full((qm1, qm1), -phi_prime(x[-1], beta))
    hess[np.diag_indices(qm1)] -= phi_prime(x[:qm1], beta)
    return hess


def free_energy(x, beta: float):
    """Return (F, grad F, hess F) at an interior simplex point.

    Raises BoundaryPoint when any coordinate vanishes; use
    free_energy_value for the (total) value alone.
    """
    x = check_simplex(x)
    return (free_energy_value(x, beta),
            free_energy_grad(x, beta),
            free_energy_hessian(x, beta))


def gibbs_log_weight(counts, params: ModelParams) -> float:
    """Log of the unnormalized stationary mass of a grid point.

    Exact multinomial via log-gamma plus the Boltzmann factor
    -beta*N*H(counts/N); no Stirling truncation.
    """
    counts = np.asarray(counts, dtype=float)
    n = params.n_sites
    log_multinomial = gammaln(n + 1.0) - float(np.sum(gammaln(counts + 1.0)))
    return log_multinomial + params.beta * float(np.sum(counts**2)) / (2.0 * n)


def gibbs_log_weights(all_counts, n_sites: int, beta: float) -> np.ndarray:
    """Vectorized gibbs_log_weight over rows of an (m x q) counts array."""
    c = np.asarray(all_counts, dtype=float)
    log_multinomial = gammaln(n_sites + 1.0) - np.sum(gammaln(c + 1.0), axis=-1)
    return log_multinomial + beta * np.sum(c**2, axis=-1) / (2.0 * n_sites)


def _flip_energy_gaps(spins, v: int, params: ModelParams) -> np.ndarray:
    """H_N(sigma^{v,k}) - H_N(sigma) for all q targets k, in O(q)."""
    counts = project(spins, params.q)
    a = spins[v]
    n = len(spins)
    # moving one spin a -> k changes sum(counts^2) by 2*(counts_k - counts_a + 1)
    gaps = -(counts - counts[a] + 1.0) / n
    gaps[a] = 0.0
    return gaps


def site_rate(spins, v: int, k: int, params: ModelParams) -> float:
    """Jump rate c_{v,k}(sigma) of flipping site v to spin k."""
    spins = np.asarray(spins)
    gaps = _flip_energy_gaps(spins, v, params)
    beta = params.beta
    kind = params.rate_kind
    if kind is RateKind.SQRT:
        return float(np.exp(-0.5 * beta * gaps[k]))
    if kind is RateKind.HEAT_BATH:
        weights = np.exp(-beta * gaps)
        return float(weights[k] / weights.sum())
    if kind is RateKind.METROPOLIS:
        return float(np.exp(-beta * max(gaps[k], 0.0)))
    raise ValueError(f"unhandled rate kind {kind}")


def pair_weight(x, k: int, ell: int, beta: float, kind: RateKind) -> float:
    """Limit cycle weight w^{k,l}(x) entering the saddle matrix A(x).

    sqrt(x_k x_l) for the square-root rates; the heat-bath and Metropolis
    dynamics multiply it by e^{beta(x_k+x_l)/2} / sum_m e^{beta x_m} and
    e^{-beta |x_k - x_l| / 2} respectively.
    """
    x = np.asarray(x, dtype=float)
    base = math.sqrt(x[k] * x[ell])
    if kind is RateKind.SQRT:
        return base
    if kind is RateKind.HEAT_BATH:
        return base * math.exp(0.5 * beta * (x[k] + x[ell])) / float(
            np.sum(np.exp(beta * x)))
    if kind is RateKind.METROPOLIS:
        return base * math.exp(-0.5 * beta * abs(x[k] - x[ell]))
    raise ValueError(f"unhandled rate kind {kind}")


def chart_basis_vectors(q: int) -> np.ndarray:
    """The q unit vectors e_1..e_q expressed in the (q-1)-chart (e_q = 0)."""
    vecs = np.zeros((q, q - 1))
    vecs[: q - 1] = np.eye(q - 1)
    return vecs


def saddle_matrix(x, beta: float, kind: RateKind = RateKind.SQRT) -> np.ndarray:
    """A(x) = sum_{k<l} w^{k,l}(x) (e_l - e_k)(e_l - e_k)^T in the chart."""
    x = np.asarray(x, dtype=float)
    q = len(x)
    vecs = chart_basis_vectors(q)
    out = np.zeros((q - 1, q - 1))
    for k in range(q):
        for ell in range(k + 1, q):
            d = vecs[ell] - vecs[k]
            out += pair_weight(x, k, ell, beta, kind) * np.outer(d, d)
    return out


def log_ratio_potential(x, beta: float) -> float:
    """G_beta(x) = log(x_1 ... x_q) / (2 beta), for interior x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise BoundaryPoint("G_beta undefined on the simplex boundary")
    return float(np.sum(np.log(x))) / (2.0 * beta)
