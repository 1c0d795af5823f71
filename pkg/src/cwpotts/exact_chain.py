"""The proportions chain on the discrete simplex as an explicit generator.

A configuration dynamics on the complete graph projects to a Markov chain on
the grid Xi_N of count vectors (n_1, ..., n_q), sum n_k = N.  Moving one
spin from type k to type l is the edge x -> x - e_k/N + e_l/N with rate

    r_N = x_k exp(-beta/2 (x_k - x_l - 1/N))          (square-root rates)

and the analogous heat-bath / Metropolis expressions.  The chain is
reversible for the exact multinomial Gibbs law, so its generator can be
symmetrized by conjugation with sqrt(pi) and diagonalized once; transient
laws, total variation curves and worst-start mixing times then cost one
matrix product per time point, no matter how large t is.  A uniformization
evaluator (Poisson-weighted powers) provides an independent cross-check at
moderate t.

The module also materializes the metastable geometry on the grid (wells,
valleys, attractors), communication heights, almost-descending paths to the
valleys, and the cyclic decomposition r = w * a into two-state cycles on
the exact potential field.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse
from scipy.special import gammaln, logsumexp

from .errors import (CapacityError, EmptyValley, PathStuck,
                     SpectrumUnavailable)
from .landscape import LandscapeReport, minimum_point, solve_branch
from .model import RateKind, free_energy_values, gibbs_log_weights

DEFAULT_MAX_STATES = 200_000
SPECTRAL_STATE_LIMIT = 4000
UNIFORMIZATION_EVENT_LIMIT = 2_000_000


def state_count(n_sites: int, q: int) -> int:
    return comb(n_sites + q - 1, q - 1)


def enumerate_states(n_sites: int, q: int,
                     max_states: int = DEFAULT_MAX_STATES) -> np.ndarray:
    """All q-part compositions of n_sites in ascending lexicographic order."""
    if n_sites < 1 or q < 2:
        raise ValueError("need n_sites >= 1 and q >= 2")
    total = state_count(n_sites, q)
    if total > max_states:
        raise CapacityError(f"{total} states exceed the maximum {max_states}")
    out = np.zeros((total, q), dtype=np.int64)
    row = 0

    def fill(prefix, remaining, k):
        nonlocal row
        if k == q - 1:
            out[row, :q - 1] = prefix
            out[row, q - 1] = remaining
            row += 1
            return
        for c in range(remaining + 1):
            fill(prefix + [c], remaining - c, k + 1)

    fill([], n_sites, 0)
    return out


@dataclass
class FiniteChain:
    """Explicit reversible chain on Xi_N: states, sparse rates, stationary law."""

    q: int
    n_sites: int
    beta: float
    rate_kind: RateKind
    states: np.ndarray            # (n, q) integer counts
    index: dict                   # counts tuple -> state index
    edge_src: np.ndarray          # directed edges, aligned arrays
    edge_dst: np.ndarray
    edge_move: np.ndarray         # (E, 2): spin moved from column 0 to column 1
    edge_rate: np.ndarray
    edge_reverse: np.ndarray      # position of the reverse directed edge
    log_weights: np.ndarray       # log of unnormalized stationary masses
    stationary: np.ndarray
    _spectrum: tuple | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def rates(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(
            (self.edge_rate, (self.edge_src, self.edge_dst)),
            shape=(self.n_states, self.n_states))

    @property
    def out_rates(self) -> np.ndarray:
        return np.bincount(self.edge_src, weights=self.edge_rate,
                           minlength=self.n_states)

    def generator_dense(self) -> np.ndarray:
        gen = self.rates.toarray()
        gen[np.diag_indices_from(gen)] -= self.out_rates
        return gen

    def state_of(self, counts) -> int:
        return self.index[tuple(int(c) for c in counts)]

    def proportions(self) -> np.ndarray:
        return self.states / self.n_sites

    def free_energies(self) -> np.ndarray:
        return free_energy_values(self.proportions(), self.beta)

    def neighbors(self, i: int):
        mask = self.edge_src == i
        return self.edge_dst[mask], self.edge_rate[mask]

    def spectrum(self):
        """(eigenvalues, orthonormal basis, sqrt(pi)) of the symmetrized generator."""
        if self._spectrum is None:
            n = self.n_states
            if n > SPECTRAL_STATE_LIMIT:
                raise SpectrumUnavailable(
                    f"{n} states exceed the spectral limit {SPECTRAL_STATE_LIMIT}")
            sqrt_pi = np.sqrt(self.stationary)
            sym = self.generator_dense()
            sym *= sqrt_pi[:, None]
            sym /= sqrt_pi[None, :]
            sym = 0.5 * (sym + sym.T)
            vals, vecs = np.linalg.eigh(sym)
            if not np.all(np.isfinite(vals)):
                raise SpectrumUnavailable("eigen-decomposition did not converge")
            # the chain is irreducible: pin the unique zero eigenvalue exactly
            vals[-1] = 0.0
            self._spectrum = (vals, vecs, sqrt_pi)
        return self._spectrum


def _rate_vectors(x: np.ndarray, k: int, ell: int, beta: float, n_sites: int,
                  kind: RateKind) -> np.ndarray:
    """Vectorized move rates k -> l for all states at once (x = counts/N)."""
    inv_n = 1.0 / n_sites
    gap = x[:, k] - x[:, ell] - inv_n
    if kind is RateKind.SQRT:
        return x[:, k] * np.exp(-0.5 * beta * gap)
    if kind is RateKind.METROPOLIS:
        return x[:, k] * np.exp(-beta * np.maximum(gap, 0.0))
    # heat-bath: the k -> k entry of the normalizer is the unflipped state
    ex = np.exp(-beta * (x[:, [k]] - x - inv_n))
    denom = 1.0 + ex.sum(axis=1) - ex[:, k]
    return x[:, k] * np.exp(-beta * gap) / denom


def build_chain(n_sites: int, q: int, beta: float,
                rate_kind: RateKind = RateKind.SQRT,
                max_states: int = DEFAULT_MAX_STATES) -> FiniteChain:
    """Materialize the proportions chain with exact stationary law."""
    states = enumerate_states(n_sites, q, max_states=max_states)
    index = {tuple(row): i for i, row in enumerate(states.tolist())}
    x = states / n_sites

    src_all, dst_all, move_all, rate_all = [], [], [], []
    for k in range(q):
        mask = states[:, k] > 0
        idx_src = np.nonzero(mask)[0]
        if len(idx_src) == 0:
            continue
        for ell in range(q):
            if ell == k:
                continue
            shifted = states[idx_src].copy()
            shifted[:, k] -= 1
            shifted[:, ell] += 1
            idx_dst = np.fromiter(
                (index[tuple(row)] for row in shifted.tolist()),
                dtype=np.int64, count=len(idx_src))
            rates = _rate_vectors(x, k, ell, beta, n_sites, rate_kind)[idx_src]
            src_all.append(idx_src)
            dst_all.append(idx_dst)
            move_all.append(np.broadcast_to([k, ell], (len(idx_src), 2)))
            rate_all.append(rates)

    edge_src = np.concatenate(src_all)
    edge_dst = np.concatenate(dst_all)
    edge_move = np.concatenate(move_all).astype(np.int64)
    edge_rate = np.concatenate(rate_all)

    order = {(int(s), int(d)): p
             for p, (s, d) in enumerate(zip(edge_src, edge_dst))}
    edge_reverse = np.fromiter(
        (order[(int(d), int(s))] for s, d in zip(edge_src, edge_dst)),
        dtype=np.int64, count=len(edge_src))

    log_weights = gibbs_log_weights(states, n_sites, beta)
    stationary = np.exp(log_weights - logsumexp(log_weights))
    stationary /= stationary.sum()
    return FiniteChain(q=q, n_sites=n_sites, beta=beta, rate_kind=rate_kind,
                       states=states, index=index, edge_src=edge_src,
                       edge_dst=edge_dst, edge_move=edge_move,
                       edge_rate=edge_rate, edge_reverse=edge_reverse,
                       log_weights=log_weights, stationary=stationary)


def reversibility_residual(chain: FiniteChain) -> float:
    """Worst relative detailed-balance violation over all stored edges."""
    flow = chain.stationary[chain.edge_src] * chain.edge_rate
    rev = flow[chain.edge_reverse]
    return float(np.max(np.abs(flow - rev) / np.maximum(flow, rev)))


def transient_distribution(chain: FiniteChain, start: int, t: float) -> np.ndarray:
    """Exact law at time t of the chain started at state index `start`."""
    vals, vecs, sqrt_pi = chain.spectrum()
    weights = vecs[start] * np.exp(np.minimum(vals * t, 0.0))
    p = (vecs @ weights) * sqrt_pi / sqrt_pi[start]
    return p


def transient_tv(chain: FiniteChain, start: int, t: float,
                 method: str = "spectral") -> float:
    """d_TV between the time-t law from `start` and the stationary law."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if method == "spectral":
        p = transient_distribution(chain, start, t)
    elif method == "uniformization":
        p = _uniformization_distribution(chain, start, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * float(np.abs(p - chain.stationary).sum())


def _uniformization_distribution(chain: FiniteChain, start: int, t: float,
                                 tail: float = 1e-12) -> np.ndarray:
    """Poisson-weighted powers of the uniformized kernel; truncation < tail."""
    lam = float(chain.out_rates.max())
    if lam * t > UNIFORMIZATION_EVENT_LIMIT:
        raise ValueError("t exceeds the configured uniformization bound")
    kernel = (chain.rates / lam).tolil()
    kernel.setdiag(1.0 - chain.out_rates / lam)
    kernel = kernel.tocsr().T.tocsr()   # act on column vectors
    mean = lam * t
    k_max = int(mean + 12.0 * math.sqrt(mean + 1.0) + 30.0)
    ks = np.arange(k_max + 1)
    log_pmf = -mean + ks * (math.log(mean) if mean > 0 else 0.0) - gammaln(ks + 1.0)
    if mean == 0.0:
        log_pmf = np.where(ks == 0, 0.0, -np.inf)
    pmf = np.exp(log_pmf)
    if 1.0 - pmf.sum() > tail:
        raise ValueError("Poisson truncation too aggressive")
    v = np.zeros(chain.n_states)
    v[start] = 1.0
    acc = pmf[0] * v
    for k in range(1, k_max + 1):
        v = kernel @ v
        if pmf[k] > 0.0:
            acc += pmf[k] * v
    return acc


def worst_start_tv(chain: FiniteChain, t: float, starts=None) -> float:
    """Max over starts of the exact TV distance at time t."""
    vals, vecs, sqrt_pi = chain.spectrum()
    expd = np.exp(np.minimum(vals * t, 0.0))
    if starts is None:
        prop = (vecs * expd) @ vecs.T
        prop *= sqrt_pi[None, :]
        prop /= sqrt_pi[:, None]
        return 0.5 * float(np.abs(prop - chain.stationary[None, :]).sum(axis=1).max())
    return max(transient_tv(chain, s, t) for s in starts)


def default_start_candidates(chain: FiniteChain,
                             sets: "MetastableSets | None" = None) -> list:
    """Audited worst-start candidates: valley minima and simplex vertices."""
    cands = set()
    for k in range(chain.q):
        vertex = np.zeros(chain.q, dtype=np.int64)
        vertex[k] = chain.n_sites
        cands.add(chain.state_of(vertex))
    if sets is not None:
        fvals = chain.free_energies()
        for members in sets.valleys.values():
            if len(members):
                cands.add(int(members[np.argmin(fvals[members])]))
    return sorted(cands)


def mixing_time_exact(chain: FiniteChain, delta: float,
                      rel_tol: float = 1e-8, starts=None,
                      full_sweep_limit: int = 2000) -> float:
    """Worst-start delta-mixing time by bisection on the exact TV curve."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if starts is None and chain.n_states > full_sweep_limit:
        starts = default_start_candidates(chain)

    def dist(t):
        return worst_start_tv(chain, t, starts=starts)

    if dist(0.0) <= delta:
        return 0.0
    vals, _, sqrt_pi = chain.spectrum()
    gap = -vals[-2]
    hi = (math.log(1.0 / (2.0 * delta)) + math.log(1.0 / sqrt_pi.min())) / gap
    hi = max(hi, 1e-12)
    while dist(hi) > delta:
        hi *= 2.0
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if dist(mid) > delta:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass
class MetastableSets:
    """Discrete wells, valleys and attractors keyed by well index.

    Key 0 is the entropic well around e (present for q >= 3, beta < q);
    keys 1..q are the ordered wells whose minimum u_k favours coordinate
    k-1.  Entries are arrays of state indices.
    """

    wells: dict
    valleys: dict
    attractors: dict
    eta: float
    epsilon: float

    def valley_union(self) -> np.ndarray:
        return np.unique(np.concatenate([v for v in self.valleys.values()]))


def _components_containing(chain: FiniteChain, level_mask: np.ndarray,
                           seeds: dict, strict: bool = True) -> dict:
    """Connected component of {mask} containing each seed state, by BFS.

    With strict=True, two seeds falling into one component raise EmptyValley
    (the margin eta is too large for this N).
    """
    n = chain.n_states
    comp = np.full(n, -1, dtype=np.int64)
    adjacency = chain.rates.tocsr()
    current = 0
    for i in range(n):
        if not level_mask[i] or comp[i] >= 0:
            continue
        stack = [i]
        comp[i] = current
        while stack:
            u = stack.pop()
            row = adjacency.indices[adjacency.indptr[u]:adjacency.indptr[u + 1]]
            for v in row:
                if level_mask[v] and comp[v] < 0:
                    comp[v] = current
                    stack.append(v)
        current += 1
    out = {}
    for key, seed in seeds.items():
        if not level_mask[seed]:
            raise EmptyValley(
                f"designated centre of well {key} lies above the threshold "
                "(increase N or decrease eta)")
        out[key] = np.nonzero(comp == comp[seed])[0]
    labels = {key: comp[seed] for key, seed in seeds.items()}
    if strict and len(set(labels.values())) != len(labels):
        raise EmptyValley("two valley centres fell into one sublevel "
                          "component (eta too large for this N)")
    return out


def metastable_sets(chain: FiniteChain, report: LandscapeReport,
                    epsilon: float | None = None) -> MetastableSets:
    """Valleys F_N^k and attractors A_N^k on the grid, per the report's eta."""
    q, beta, eta = chain.q, chain.beta, report.eta
    if epsilon is None:
        epsilon = 0.5 * min(eta, (report.D_beta - eta) / 5.0)
    if not 0.0 < epsilon < eta:
        raise ValueError("epsilon must lie in (0, eta)")
    if not report.F_u1 + 5.0 * epsilon < report.H_beta - eta:
        raise ValueError("epsilon too large: need F(u_1) + 5 eps < H - eta")

    fvals = chain.free_energies()
    prop = chain.proportions()
    sol_u1 = minimum_point(q, solve_branch(1, q, beta).u, 1)

    seeds, well_thresholds, valley_thresholds = {}, {}, {}
    for k in range(1, q + 1):
        centre = np.roll(sol_u1, k - 1)
        seeds[k] = int(np.argmin(np.sum((prop - centre) ** 2, axis=1)))
        well_thresholds[k] = report.H_beta
        valley_thresholds[k] = report.H_beta - eta
    has_well0 = q >= 3 and beta < q and report.F_v1 is not None
    if has_well0:
        e = np.full(q, 1.0 / q)
        seeds[0] = int(np.argmin(np.sum((prop - e) ** 2, axis=1)))
        well_thresholds[0] = report.F_v1
        valley_thresholds[0] = report.F_v1 - eta

    def sublevel_components(thresholds, strict):
        out = {}
        for level in sorted(set(thresholds.values())):
            keys = [k for k, th in thresholds.items() if th == level]
            got = _components_containing(chain, fvals < level,
                                         {k: seeds[k] for k in keys},
                                         strict=strict)
            out.update(got)
        return out

    # at coarse N a single grid edge can hop a thin ridge, merging the
    # full-height wells; only the eta-trimmed valleys must stay disjoint
    wells = sublevel_components(well_thresholds, strict=False)
    valleys = sublevel_components(valley_thresholds, strict=True)
    # attractors use the sublevel F < F(min) + eps inside each well
    attractors = {}
    for k, seed in seeds.items():
        level = (report.F_u1 if k >= 1 else report.F_e) + epsilon
        got = _components_containing(chain, fvals < level, {k: seed})
        attractors[k] = got[k]

    for k in valleys:
        if not np.all(np.isin(attractors[k], valleys[k])):
            raise EmptyValley(f"attractor {k} escapes its valley")
    return MetastableSets(wells=wells, valleys=valleys, attractors=attractors,
                          eta=eta, epsilon=epsilon)


def discrete_comm_height(chain: FiniteChain, i: int, j: int) -> float:
    """Minimax over paths of the maximum free energy along the path."""
    fvals = chain.free_energies()
    n = chain.n_states
    best = np.full(n, np.inf)
    best[i] = fvals[i]
    adjacency = chain.rates.tocsr()
    heap = [(best[i], i)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        if u == j:
            return d
        done[u] = True
        row = adjacency.indices[adjacency.indptr[u]:adjacency.indptr[u + 1]]
        for v in row:
            nd = max(d, fvals[v])
            if nd < best[v]:
                best[v] = nd
                heapq.heappush(heap, (nd, v))
    return float(best[j])


def _move_state(chain: FiniteChain, i: int, k: int, ell: int) -> int | None:
    counts = chain.states[i]
    if counts[k] <= 0:
        return None
    counts = counts.copy()
    counts[k] -= 1
    counts[ell] += 1
    return chain.index.get(tuple(counts.tolist()))


def _ray_moves(chain: FiniteChain, z: int, pairs, repeats: int, cap: float,
               fvals: np.ndarray, path: list) -> int:
    """Apply `repeats` rounds of unit moves (k -> l per pair), capped in energy."""
    for _ in range(repeats):
        for k, ell in pairs:
            nxt = _move_state(chain, z, k, ell)
            if nxt is None:
                raise PathStuck("ray move left the grid", state=z)
            if fvals[nxt] > cap:
                raise PathStuck("ray move exceeded the energy cap", state=z)
            path.append(nxt)
            z = nxt
    return z


def descending_path(chain: FiniteChain, start: int, delta: float,
                    report: LandscapeReport,
                    sets: MetastableSets | None = None) -> list:
    """Path from `start` to the valleys with energy at most F(start) + delta.

    Greedy strict descent wherever a lower neighbor exists; near critical
    points without one, crosses along the hand-built directions: the ray
    from e toward u_1 (beta >= q), a mass swap between two equal coordinates
    above 1/beta at the v_k saddles (beta > q) and at the extra critical
    points of branches i >= 2, or straight toward u_k below q.
    """
    if sets is None:
        sets = metastable_sets(chain, report)
    target = np.zeros(chain.n_states, dtype=bool)
    target[sets.valley_union()] = True
    fvals = chain.free_energies()
    cap = fvals[start] + delta
    adjacency = chain.rates.tocsr()
    q, beta, n = chain.q, chain.beta, chain.n_sites
    crit = report.points.all_points()

    path = [start]
    z = start
    for _ in range(4 * chain.n_states):
        if target[z]:
            return path
        row = adjacency.indices[adjacency.indptr[z]:adjacency.indptr[z + 1]]
        lower = row[fvals[row] < fvals[z]]
        if len(lower):
            z = int(lower[np.argmin(fvals[lower])])
            path.append(z)
            continue
        # stuck at a discrete local minimum outside all valleys: cross the
        # nearest critical neighborhood along its descending direction
        xz = chain.states[z] / n
        dists = [np.max(np.abs(xz - p.x)) for p in crit]
        cpoint = crit[int(np.argmin(dists))]
        sol1 = solve_branch(1, q, beta)
        if cpoint.kind == "c1":
            if beta < q:
                raise PathStuck("stuck near e below beta = q", state=z)
            repeats = int(n * (1.0 / q - sol1.u))
            pairs = [(m, 0) for m in range(1, q)]
            z = _ray_moves(chain, z, pairs, repeats, cap, fvals, path)
        elif cpoint.kind == "c3" and beta <= q:
            k = cpoint.positions[0]
            repeats = int(n * (sol1.v - sol1.u))
            pairs = [(m, k) for m in range(q) if m != k]
            z = _ray_moves(chain, z, pairs, repeats, cap, fvals, path)
        elif cpoint.kind in ("c3", "c4"):
            x = cpoint.x
            big = np.nonzero(x > 1.0 / beta + 1e-12)[0]
            candidates = [(a, b) for ai, a in enumerate(big) for b in big[ai + 1:]
                          if abs(x[a] - x[b]) < 1e-9]
            if not candidates:
                raise PathStuck("no equal pair above 1/beta at critical point",
                                state=z)
            a, b = candidates[0]
            gamma = x[a] - 1.0 / beta
            z = _ray_moves(chain, z, [(a, b)], max(int(n * gamma), 1),
                           cap, fvals, path)
        else:
            raise PathStuck("no admissible step", state=z)
    raise PathStuck("path exceeded the step budget", state=z)


@dataclass(frozen=True)
class CyclicDecomposition:
    """Per-edge split r = w * a of the generator into two-state cycles.

    a(x, y) = sqrt(pi(y)/pi(x)) is the cycle walk on the exact potential
    field; w is the weight of the cycle anchored at the endpoint that moves
    mass from the smaller spin index to the larger one.
    """

    a: dict
    w: dict


def _cycle_weight(chain: FiniteChain, anchor: int, k: int, ell: int) -> float:
    """Weight of the two-state cycle at `anchor` for the move k -> l (k < l)."""
    n = chain.n_sites
    beta = chain.beta
    x = chain.states[anchor] / n
    base = math.sqrt(x[k] * (x[ell] + 1.0 / n))
    if chain.rate_kind is RateKind.SQRT:
        return base
    if chain.rate_kind is RateKind.METROPOLIS:
        return base * math.exp(-0.5 * beta * abs(x[k] - x[ell] - 1.0 / n))
    # heat-bath: the normalizer is evaluated with the moving spin removed
    shifted = x.copy()
    shifted[k] -= 1.0 / n
    denom = float(np.sum(np.exp(beta * shifted)))
    return base * math.exp(0.5 * beta * (x[k] + x[ell] - 1.0 / n)) / denom


def cyclic_decomposition(chain: FiniteChain) -> CyclicDecomposition:
    """Split every edge rate into cycle rate a and cycle weight w."""
    a_map, w_map = {}, {}
    lw = chain.log_weights
    for pos in range(len(chain.edge_src)):
        i = int(chain.edge_src[pos])
        j = int(chain.edge_dst[pos])
        k, ell = (int(v) for v in chain.edge_move[pos])
        a_map[(i, j)] = math.exp(0.5 * (lw[j] - lw[i]))
        if k < ell:
            anchor, pair = i, (k, ell)
        else:
            anchor, pair = j, (ell, k)
        w_map[(i, j)] = _cycle_weight(chain, anchor, *pair)
    return CyclicDecomposition(a=a_map, w=w_map)
