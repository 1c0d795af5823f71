"""Free-energy landscape of the mean-field Potts model.

Critical points of F_beta in the simplex interior are the equiproportional
vector e = (1/q, ..., 1/q) together with permutations of vectors that take
only two values,

    (t, ..., t, (1 - (q-i) t) / i, ..., (1 - (q-i) t) / i),

with q-i entries equal to t, where t solves g_i(t) = beta on the branch
function g_i(t) = i / (1 - q t) * log((1 - (q-i) t) / (i t)) (continuously
extended by g_i(1/q) = q).  Each g_i is unimodal with minimum m_i; its
minimal value beta_{s,i} is the spinodal temperature of branch i, above
which the two roots u_i < m_i < v_i exist.

This module solves the branches, computes the critical temperatures
(beta_1 = beta_{s,1}; beta_2 closed form; beta_3 = q for q in {3,4} and the
saddle-reordering temperature for q >= 5), classifies the critical points,
selects the relevant saddle height H_beta and well depth D_beta, and
evaluates the harmonic prefactors (omega, omega', nu, nu') that drive the
reduced chain between wells.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import (DefinitenessError, DegenerateTemperature, DomainError,
                     EigenStructureError, UnsupportedRegime)
from .model import (RateKind, free_energy_grad, free_energy_hessian,
                    free_energy_value, log_ratio_potential, saddle_matrix)

SPINODAL_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def g(i: int, t: float, q: int) -> float:
    """Branch function g_i(t) on (0, 1/(q-i)), equal to q at t = 1/q."""
    if not 1 <= i <= q // 2:
        raise DomainError(f"branch index i={i} outside 1..{q // 2}")
    if not 0.0 < t < 1.0 / (q - i):
        raise DomainError(f"t={t} outside (0, 1/(q-i))")
    s = t - 1.0 / q
    if s == 0.0:
        return float(q)
    if abs(s) < 1e-4 / q:
        # cancellation-safe form: both log arguments are 1 + O(s)
        num = math.log1p(-q * (q - i) * s / i) - math.log1p(q * s)
        return -i * num / (q * s)
    return i / (1.0 - q * t) * math.log((1.0 - (q - i) * t) / (i * t))


def _golden_section_min(f, lo: float, hi: float, xtol: float = 1e-12):
    """Minimize a unimodal f on [lo, hi]; returns (argmin, min)."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > xtol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (0.5 * (a + b), f(0.5 * (a + b)))


def _bisect(f, a: float, b: float, xtol: float = 1e-15) -> float:
    """Root of f by bisection; f(a) and f(b) must have opposite signs."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise ValueError("bisection bracket does not change sign")
    while b - a > xtol * max(1.0, abs(a)):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


@dataclass(frozen=True)
class BranchSolution:
    """Roots of g_i(t) = beta: u < m_i < v, with spinodal value beta_s."""

    i: int
    m: float
    beta_s: float
    u: float
    v: float
    degenerate: bool = False


def branch_minimum(i: int, q: int):
    """(m_i, beta_{s,i}): argmin and min of g_i over (0, 1/q)."""
    lo, hi = 1e-9, 1.0 / q - 1e-9
    return _golden_section_min(lambda t: g(i, t, q), lo, hi)


def solve_branch(i: int, q: int, beta: float):
    """Solve g_i(t) = beta; None when beta is below the spinodal."""
    m, beta_s = branch_minimum(i, q)
    if beta < beta_s - 1e-12:
        return None
    if abs(beta - beta_s) <= 1e-12:
        return BranchSolution(i=i, m=m, beta_s=beta_s, u=m, v=m, degenerate=True)

    def h(t):
        return g(i, t, q) - beta

    lo = m / 2.0
    while h(lo) <= 0.0:
        lo /= 2.0
    u = _bisect(h, lo, m)

    edge = 1.0 / (q - i)
    gap = (edge - m) / 2.0
    while h(edge - gap) <= 0.0:
        gap /= 2.0
        if gap < 1e-15:
            raise ValueError("failed to bracket the upper root")
    v = _bisect(h, m, edge - gap)
    return BranchSolution(i=i, m=m, beta_s=beta_s, u=u, v=v)


def branch_point(i: int, q: int, t: float, positions) -> np.ndarray:
    """Two-value critical vector: value (1-(q-i)t)/i at `positions`, t elsewhere."""
    x = np.full(q, t)
    x[list(positions)] = (1.0 - (q - i) * t) / i
    return x


def minimum_point(q: int, u1: float, k: int) -> np.ndarray:
    """Ordered local minimum u_k (1-based k): coordinate k-1 holds 1-(q-1)u1."""
    return branch_point(1, q, u1, [k - 1])


def saddle_point_v(q: int, v1: float, k: int) -> np.ndarray:
    """Saddle v_k (1-based k): coordinate k-1 holds 1-(q-1)v1."""
    return branch_point(1, q, v1, [k - 1])


def saddle_point_u12(q: int, u2: float, k: int = 1, ell: int = 2) -> np.ndarray:
    """Saddle u_{k,l} (1-based): coordinates k-1, l-1 hold (1-(q-2)u2)/2."""
    return branch_point(2, q, u2, [k - 1, ell - 1])


@dataclass(frozen=True)
class CriticalTemperatures:
    """beta1 (spinodal), beta2 (F(u_k) = F(e)), beta3 (saddle reordering)."""

    q: int
    beta1: float
    beta2: float | None
    beta3: float | None
    beta_s: tuple
    beta3_residual: float | None = None

    def as_dict(self):
        return {"q": self.q, "beta1": self.beta1, "beta2": self.beta2,
                "beta3": self.beta3, "beta_s": list(self.beta_s),
                "beta3_residual": self.beta3_residual}


def beta2_closed_form(q: int) -> float:
    """2 (q-1) / (q-2) * log(q-1), defined for q >= 3."""
    if q < 3:
        raise DomainError("beta2 is defined for q >= 3")
    return 2.0 * (q - 1.0) / (q - 2.0) * math.log(q - 1.0)


def _saddle_height_gap(q: int, beta: float) -> float:
    """F_beta(u_{1,2}) - F_beta(v_1); sign change locates beta_m."""
    b1 = solve_branch(1, q, beta)
    b2 = solve_branch(2, q, beta)
    v1 = saddle_point_v(q, b1.v, 1)
    u12 = saddle_point_u12(q, b2.u)
    return free_energy_value(u12, beta) - free_energy_value(v1, beta)


def critical_temperatures(q: int) -> CriticalTemperatures:
    """All critical temperatures of the q-state model."""
    if q < 2:
        raise DomainError("q must be >= 2")
    if q == 2:
        return CriticalTemperatures(q=2, beta1=2.0, beta2=None, beta3=None,
                                    beta_s=(2.0,))
    beta_s = tuple(branch_minimum(i, q)[1] for i in range(1, q // 2 + 1))
    beta2 = beta2_closed_form(q)
    if q in (3, 4):
        return CriticalTemperatures(q=q, beta1=beta_s[0], beta2=beta2,
                                    beta3=float(q), beta_s=beta_s)
    lo, hi = beta_s[1] + 1e-6, q - 1e-6
    if not (_saddle_height_gap(q, lo) > 0 > _saddle_height_gap(q, hi)):
        raise ValueError("saddle-reordering bracket has unexpected signs")
    beta_m = _bisect(lambda b: _saddle_height_gap(q, b), lo, hi, xtol=1e-13)
    return CriticalTemperatures(q=q, beta1=beta_s[0], beta2=beta2, beta3=beta_m,
                                beta_s=beta_s,
                                beta3_residual=abs(_saddle_height_gap(q, beta_m)))


@dataclass(frozen=True)
class CriticalPoint:
    coords: tuple
    kind: str            # 'c1' | 'c2' | 'c3' | 'c4'
    branch: int | None   # i for branch points, None for e
    t_label: str | None  # 'u' or 'v'
    positions: tuple     # 0-based coordinates holding the minority value

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.coords)


@dataclass(frozen=True)
class CriticalPointSet:
    """Classified critical points: c1 = {e}, c2 = minima, c3 = v-saddles."""

    q: int
    beta: float
    c1: tuple
    c2: tuple
    c3: tuple
    c4: tuple

    def all_points(self):
        return list(self.c1) + list(self.c2) + list(self.c3) + list(self.c4)

    def __len__(self):
        return len(self.c1) + len(self.c2) + len(self.c3) + len(self.c4)


def enumerate_critical_points(q: int, beta: float,
                              grad_tol: float = 1e-9) -> CriticalPointSet:
    """All critical points of F_beta, classified, with gradient residual check."""
    c1, c2, c3, c4 = [], [], [], []
    e = np.full(q, 1.0 / q)
    c1.append(CriticalPoint(tuple(e), "c1", None, None, ()))
    for i in range(1, q // 2 + 1):
        sol = solve_branch(i, q, beta)
        if sol is None:
            continue
        if abs(beta - sol.beta_s) < SPINODAL_TOL:
            raise DegenerateTemperature(
                f"beta={beta} is within {SPINODAL_TOL} of the branch-{i} "
                f"spinodal {sol.beta_s}")
        for t, label in ((sol.u, "u"), (sol.v, "v")):
            other = (1.0 - (q - i) * t) / i
            if abs(other - t) < 1e-10:
                continue  # shape collapses to e (v_i = 1/q at beta = q)
            for pos in combinations(range(q), i):
                point = CriticalPoint(tuple(branch_point(i, q, t, pos)),
                                      "c4" if i > 1 else
                                      ("c2" if label == "u" else "c3"),
                                      i, label, pos)
                if i == 1 and label == "u":
                    c2.append(point)
                elif i == 1:
                    c3.append(point)
                else:
                    c4.append(point)
    pts = CriticalPointSet(q=q, beta=beta, c1=tuple(c1), c2=tuple(c2),
                           c3=tuple(c3), c4=tuple(c4))
    worst = max(np.max(np.abs(free_energy_grad(p.x, beta)))
                for p in pts.all_points())
    if worst > grad_tol:
        raise ValueError(f"critical point residual {worst:.3e} > {grad_tol}")
    return pts


@dataclass(frozen=True)
class Prefactors:
    """Harmonic constants of the reduced dynamics.

    omega/mu are evaluated at the v_1 saddle (at the midpoint e for q = 2),
    omega'/mu' at the u_{1,2} saddle, nu at e and nu' at u_1.  Entries are
    None when the corresponding critical point does not exist or is not a
    minimum at this (q, beta).
    """

    omega: float
    omega_prime: float | None
    nu: float | None
    nu_prime: float
    mu: float
    mu_prime: float | None

    def as_dict(self):
        return {"omega": self.omega, "omega_prime": self.omega_prime,
                "nu": self.nu, "nu_prime": self.nu_prime,
                "mu": self.mu, "mu_prime": self.mu_prime}


def _unique_negative_eigenvalue(hess: np.ndarray, amat: np.ndarray) -> float:
    """-mu for the product hess @ amat, via the symmetric similarity."""
    vals, vecs = np.linalg.eigh(amat)
    if np.any(vals <= 0):
        raise EigenStructureError("pair-weight matrix is not positive definite")
    root = (vecs * np.sqrt(vals)) @ vecs.T
    spec = np.linalg.eigvalsh(root @ hess @ root)
    negatives = spec[spec < 0]
    if len(negatives) != 1:
        raise EigenStructureError(
            f"expected exactly one negative eigenvalue, found {len(negatives)}")
    return float(negatives[0])


def _omega_at(x: np.ndarray, beta: float, kind: RateKind):
    """(omega, mu) of a saddle point x with one unstable direction."""
    hess = free_energy_hessian(x, beta)
    det = np.linalg.det(hess)
    if det >= 0:
        raise DefinitenessError("saddle Hessian determinant is not negative")
    mu = -_unique_negative_eigenvalue(hess, saddle_matrix(x, beta, kind))
    omega = mu * math.exp(-beta * log_ratio_potential(x, beta)) / math.sqrt(-det)
    return omega, mu


def _nu_at(x: np.ndarray, beta: float) -> float:
    """nu-type constant of a local minimum x."""
    det = np.linalg.det(free_energy_hessian(x, beta))
    if det <= 0:
        raise DefinitenessError("minimum Hessian determinant is not positive")
    return math.exp(-beta * log_ratio_potential(x, beta)) / (beta * math.sqrt(det))


def metastable_prefactors(q: int, beta: float,
                          rate_kind: RateKind = RateKind.SQRT) -> Prefactors:
    """Compute (omega, omega', nu, nu', mu, mu') for beta above beta_1."""
    sol1 = solve_branch(1, q, beta)
    if sol1 is None or sol1.degenerate:
        raise UnsupportedRegime("prefactors require beta > beta_1")
    e = np.full(q, 1.0 / q)
    u1 = minimum_point(q, sol1.u, 1)
    nu_prime = _nu_at(u1, beta)

    if q == 2:
        # the lowest saddle between the two wells is the midpoint e
        omega, mu = _omega_at(e, beta, rate_kind)
        return Prefactors(omega=omega, omega_prime=None, nu=None,
                          nu_prime=nu_prime, mu=mu, mu_prime=None)

    v1 = saddle_point_v(q, sol1.v, 1)
    if abs(sol1.v - 1.0 / q) < 1e-10:
        raise DegenerateTemperature("v_1 coincides with e (beta = q)")
    omega, mu = _omega_at(v1, beta, rate_kind)
    nu = _nu_at(e, beta) if beta < q else None

    omega_prime = mu_prime = None
    if q >= 4:
        sol2 = solve_branch(2, q, beta)
        if sol2 is not None and not sol2.degenerate:
            u12 = saddle_point_u12(q, sol2.u)
            omega_prime, mu_prime = _omega_at(u12, beta, rate_kind)
    return Prefactors(omega=omega, omega_prime=omega_prime, nu=nu,
                      nu_prime=nu_prime, mu=mu, mu_prime=mu_prime)


@dataclass(frozen=True)
class LandscapeReport:
    """Saddle heights, depths, valley index set and prefactors at (q, beta)."""

    q: int
    beta: float
    rate_kind: RateKind
    temps: CriticalTemperatures
    points: CriticalPointSet
    regime: str
    H_beta: float
    D_beta: float
    Dhat_beta: float | None
    S_beta: tuple
    eta: float
    prefactors: Prefactors
    F_e: float
    F_u1: float
    F_v1: float | None
    F_u12: float | None

    def to_dict(self):
        return {
            "q": self.q,
            "beta": self.beta,
            "rate_kind": self.rate_kind.value,
            "temps": self.temps.as_dict(),
            "regime": self.regime,
            "H_beta": self.H_beta,
            "D_beta": self.D_beta,
            "Dhat_beta": self.Dhat_beta,
            "S_beta": list(self.S_beta),
            "eta": self.eta,
            "prefactors": self.prefactors.as_dict(),
            "free_energy": {"e": self.F_e, "u1": self.F_u1,
                            "v1": self.F_v1, "u12": self.F_u12},
            "points": [{"coords": list(p.coords), "kind": p.kind,
                        "branch": p.branch, "t_label": p.t_label,
                        "positions": list(p.positions)}
                       for p in self.points.all_points()],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _regime_label(q: int, beta: float, temps: CriticalTemperatures) -> str:
    if q == 2:
        return "q2-two-wells"
    if q in (3, 4):
        return "q34-below-q" if beta < q else "q34-above-q"
    if beta < temps.beta3:
        return "q5-below-beta3"
    if abs(beta - temps.beta3) < SPINODAL_TOL:
        return "q5-at-beta3"
    return "q5-beta3-to-q" if beta < q else "q5-above-q"


def well_structure(q: int, beta: float, eta_override: float | None = None,
                   rate_kind: RateKind = RateKind.SQRT) -> LandscapeReport:
    """Saddle height H_beta, depths, valley set S_beta and default margin eta."""
    temps = critical_temperatures(q)
    if beta <= temps.beta1 + 1e-12:
        raise UnsupportedRegime(
            f"beta={beta} is at or below beta_1={temps.beta1}")
    if q in (3, 4) and abs(beta - q) < 1e-12:
        raise UnsupportedRegime(f"beta = q = {q} is a degenerate case")

    points = enumerate_critical_points(q, beta)
    sol1 = solve_branch(1, q, beta)
    e = np.full(q, 1.0 / q)
    F_e = free_energy_value(e, beta)
    F_u1 = free_energy_value(minimum_point(q, sol1.u, 1), beta)
    at_e = abs(sol1.v - 1.0 / q) < 1e-10
    F_v1 = None if at_e else free_energy_value(saddle_point_v(q, sol1.v, 1), beta)
    F_u12 = None
    if q >= 4:
        sol2 = solve_branch(2, q, beta)
        if sol2 is not None and not sol2.degenerate:
            F_u12 = free_energy_value(saddle_point_u12(q, sol2.u), beta)

    if q == 2:
        H = F_e
    elif q == 3:
        H = F_v1
    elif q == 4:
        H = F_v1 if beta < q else F_u12
    else:
        H = F_v1 if beta < temps.beta3 else F_u12
    D = H - F_u1
    Dhat = (F_v1 - F_e) if (beta < q and F_v1 is not None) else None

    if q == 2:
        s_beta = (1, 2)
    elif beta <= temps.beta2 + SPINODAL_TOL:
        s_beta = tuple(range(0, q + 1))
    else:
        s_beta = tuple(range(1, q + 1))

    values = sorted({round(free_energy_value(p.x, beta), 14)
                     for p in points.all_points()})
    gaps = [b - a for a, b in zip(values, values[1:])]
    candidates = [D] + ([min(gaps)] if gaps else [])
    if beta < q and F_v1 is not None:
        candidates.append(F_v1 - F_e)
    eta_default = 0.25 * min(candidates)
    eta = eta_default if eta_override is None else eta_override
    if eta_override is not None:
        if not eta < D:
            raise ValueError("eta must be smaller than the well depth D_beta")
        if beta < q and F_v1 is not None and not eta < F_v1 - F_e:
            raise ValueError("eta must be smaller than F(v_1) - F(e)")
        for level in (F_v1, F_u12):
            if level is None:
                continue
            strictly_below = [v for v in values if v < level - 1e-12]
            if strictly_below and strictly_below[-1] > level - 2 * eta:
                raise ValueError("a critical value lies in the 2*eta band "
                                 "below a saddle level")

    prefactors = metastable_prefactors(q, beta, rate_kind)
    return LandscapeReport(q=q, beta=beta, rate_kind=rate_kind, temps=temps,
                           points=points, regime=_regime_label(q, beta, temps),
                           H_beta=H, D_beta=D, Dhat_beta=Dhat, S_beta=s_beta,
                           eta=eta, prefactors=prefactors, F_e=F_e, F_u1=F_u1,
                           F_v1=F_v1, F_u12=F_u12)
