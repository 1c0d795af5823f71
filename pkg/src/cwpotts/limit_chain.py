"""Reduced Markov chain on well indices and its mixing time.

Once the dynamics is watched on the time-scale theta_N = 2 pi N e^{N D_beta},
transitions between the metastable wells follow a small Markov chain on the
index set S_beta, with jump rates built from the harmonic prefactors:

- q = 2: the two wells swap at rate omega/nu' (omega evaluated at the
  midpoint saddle e), i.e. (beta/2) sqrt(|F''(e)| F''(u_1)) e^{-beta(G(e)-G(u_1))}.
- below beta_2 the ordered wells drain into the entropic well 0 (rate
  omega/nu'), and exactly at beta_2 the reverse rate omega/nu is active too;
- above beta_2 the chain is a complete graph on the q ordered wells, with
  rate omega/(q nu') while crossings pass through the entropic well and
  omega'/nu' once the direct saddles u_{k,l} take over.

Total variation curves are exact (the chain has at most q+1 states); the
delta-mixing time uses the worst start and strict monotonicity in t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateTemperature, UnsupportedRegime
from .landscape import LandscapeReport, well_structure
from .model import RateKind

_BETA_EQ_TOL = 1e-9


@dataclass(frozen=True)
class LimitChain:
    """Explicit reduced chain: states, rate table, stationary law."""

    q: int
    beta: float
    states: tuple
    rates: np.ndarray        # (m, m), zero diagonal, theta_N time units
    stationary: np.ndarray   # (m,)

    @property
    def generator(self) -> np.ndarray:
        gen = self.rates.copy()
        gen[np.diag_indices_from(gen)] = -gen.sum(axis=1)
        return gen

    def state_index(self, state: int) -> int:
        return self.states.index(state)


def build_limit_chain(q: int, beta: float,
                      report: LandscapeReport | None = None,
                      rate_kind: RateKind = RateKind.SQRT) -> LimitChain:
    """Fill the rate table for (q, beta) from the harmonic prefactors."""
    if report is None:
        report = well_structure(q, beta, rate_kind=rate_kind)
    pf = report.prefactors
    states = report.S_beta
    m = len(states)
    rates = np.zeros((m, m))

    if q == 2:
        r = pf.omega / pf.nu_prime
        rates[0, 1] = rates[1, 0] = r
        stationary = np.array([0.5, 0.5])
        return LimitChain(q=q, beta=beta, states=states, rates=rates,
                          stationary=stationary)

    temps = report.temps
    at_beta2 = abs(beta - temps.beta2) < _BETA_EQ_TOL
    if beta < temps.beta2 and not at_beta2:
        # states (0, 1, ..., q); every ordered well drains into well 0
        r_in = pf.omega / pf.nu_prime
        for k in range(1, m):
            rates[k, 0] = r_in
        stationary = np.zeros(m)
        stationary[0] = 1.0
    elif at_beta2:
        r_in = pf.omega / pf.nu_prime
        r_out = pf.omega / pf.nu
        for k in range(1, m):
            rates[k, 0] = r_in
            rates[0, k] = r_out
        stationary = np.full(m, pf.nu_prime)
        stationary[0] = pf.nu
        stationary /= pf.nu + q * pf.nu_prime
    else:
        # states (1, ..., q); complete graph with a single common rate
        if q in (3, 4):
            if beta < q:
                r = pf.omega / (q * pf.nu_prime)
            elif q == 3:
                r = pf.omega / pf.nu_prime
            else:
                r = pf.omega_prime / pf.nu_prime
        else:
            at_beta3 = abs(beta - temps.beta3) < _BETA_EQ_TOL
            if at_beta3:
                if temps.beta3_residual is None or temps.beta3_residual > 1e-10:
                    raise DegenerateTemperature(
                        "beta_3 solve residual exceeds 1e-10; beta = beta_3 "
                        "is numerically degenerate here")
                r = (pf.omega / q + pf.omega_prime) / pf.nu_prime
            elif beta < temps.beta3:
                r = pf.omega / (q * pf.nu_prime)
            else:
                r = pf.omega_prime / pf.nu_prime
        rates[:] = r
        rates[np.diag_indices(m)] = 0.0
        stationary = np.full(m, 1.0 / m)

    chain = LimitChain(q=q, beta=beta, states=states, rates=rates,
                       stationary=stationary)
    residual = np.max(np.abs(stationary @ chain.generator))
    if residual > 1e-12 * max(1.0, float(rates.max())):
        raise ValueError(f"stationary law residual {residual:.3e}")
    return chain


def _transition_matrix_eig(chain: LimitChain, t: float) -> np.ndarray:
    gen = chain.generator
    vals, vecs = np.linalg.eig(gen)
    expd = np.exp(np.clip(vals.real * t, -745.0, 50.0))
    mat = (vecs * expd) @ np.linalg.inv(vecs)
    return mat.real


def tv_curve(chain: LimitChain, start: int, t: float) -> float:
    """d_TV between the time-t law from `start` and the stationary law.

    Evaluated through an eigen-decomposition and cross-checked against the
    scaling-and-squaring matrix exponential; the two must agree to 1e-10.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    i = chain.state_index(start)
    row_eig = _transition_matrix_eig(chain, t)[i]
    row_expm = scipy.linalg.expm(chain.generator * t)[i]
    tv_eig = 0.5 * float(np.abs(row_eig - chain.stationary).sum())
    tv_expm = 0.5 * float(np.abs(row_expm - chain.stationary).sum())
    if abs(tv_eig - tv_expm) > 1e-10:
        raise ValueError("matrix-exponential evaluators disagree beyond 1e-10")
    return tv_eig


def worst_start_tv(chain: LimitChain, t: float) -> float:
    return max(tv_curve(chain, s, t) for s in chain.states)


def mixing_time(chain: LimitChain, delta: float,
                rel_tol: float = 1e-10) -> float:
    """inf{t : worst-start TV <= delta}, by bracketing and bisection."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if worst_start_tv(chain, 0.0) <= delta:
        return 0.0
    max_rate = float(chain.rates.max())
    hi = 1.0 / max_rate
    while worst_start_tv(chain, hi) > delta:
        hi *= 2.0
        if hi > 1e18 / max_rate:
            raise ValueError("failed to bracket the mixing time")
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if worst_start_tv(chain, mid) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def tv_samples(chain: LimitChain, times) -> list:
    """Rows (t, start, tv) for CSV export of the exact TV curves."""
    rows = []
    for t in times:
        for s in chain.states:
            rows.append((float(t), s, tv_curve(chain, s, float(t))))
    return rows
