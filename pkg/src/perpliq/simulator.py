"""Correlated Euler-Maruyama simulation of (S, P, Q, X) under any Strategy.

Per-path randomness comes from counter-based substreams keyed by
(seed, path_index), so ensembles are reproducible independently of
execution order, block size, and worker count: every per-path scalar lands
in a preallocated slot indexed by the path, and statistics are computed
from those arrays.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import MarketState, ModelParams, NonFinite, PayoffSpec, Strategy


@dataclass(frozen=True)
class SimConfig:
    """Ensemble shape: step count, path count, base seed, initial state.

    record_stride thins the stored time series (every stride-th step plus
    the terminal one); integrals and performance always use every step.
    """

    n_steps: int
    n_paths: int
    seed: int
    initial: MarketState
    record_stride: int = 1
    antithetic: bool = False
    n_workers: int = 1
    block_size: int = 1024

    def __post_init__(self):
        if self.n_steps < 1 or self.n_paths < 1 or self.record_stride < 1:
            raise ValueError("n_steps, n_paths and record_stride must be >= 1")
        if self.n_workers < 1 or self.block_size < 1:
            raise ValueError("n_workers and block_size must be >= 1")
        if self.antithetic and self.n_paths % 2 != 0:
            raise ValueError("antithetic pairing needs an even n_paths")


@dataclass(frozen=True)
class PathRecord:
    """Thinned single-path series plus its realized performance."""

    t: np.ndarray
    s: np.ndarray
    p: np.ndarray
    q: np.ndarray
    x: np.ndarray
    nu: np.ndarray
    performance: float


@dataclass
class PathEnsemble:
    """Recorded ensemble: matrices are (n_paths, n_recorded)."""

    t_rec: np.ndarray
    S: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    X: np.ndarray
    NU: np.ndarray
    performance: np.ndarray
    int_q2: np.ndarray
    int_A2: np.ndarray
    params: ModelParams
    spec: PayoffSpec
    config: SimConfig

    @property
    def n_paths(self) -> int:
        return self.performance.size

    @property
    def mean_performance(self) -> float:
        return float(self.performance.mean())

    @property
    def se_performance(self) -> float:
        n = self.performance.size
        if n < 2:
            return float("nan")
        return float(self.performance.std(ddof=1) / math.sqrt(n))

    def path(self, i: int) -> PathRecord:
        return PathRecord(
            t=self.t_rec.copy(),
            s=self.S[i].copy(),
            p=self.P[i].copy(),
            q=self.Q[i].copy(),
            x=self.X[i].copy(),
            nu=self.NU[i].copy(),
            performance=float(self.performance[i]),
        )

    @property
    def records(self) -> List[PathRecord]:
        return [self.path(i) for i in range(self.n_paths)]


def _path_increments(
    seed: int, path_index: int, n_steps: int, rho: float, dt: float, antithetic: bool
) -> Tuple[np.ndarray, np.ndarray]:
    """Correlated standard Brownian increments for one path.

    With antithetic pairing, paths 2j and 2j+1 share stream j with opposite
    signs; otherwise path i owns stream i.
    """
    if antithetic:
        stream, sign = path_index // 2, 1.0 if path_index % 2 == 0 else -1.0
    else:
        stream, sign = path_index, 1.0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    z = rng.standard_normal((2, n_steps))
    root_dt = math.sqrt(dt)
    dw_s = sign * root_dt * z[0]
    dw_p = sign * root_dt * (rho * z[0] + math.sqrt(1.0 - rho * rho) * z[1])
    return dw_s, dw_p


def _recorded_steps(n_steps: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def run_paths(
    strategy: Strategy,
    params: ModelParams,
    spec: PayoffSpec,
    initial: MarketState,
    dW_s: np.ndarray,
    dW_p: np.ndarray,
    dt: float,
    record_stride: int = 1,
    path_offset: int = 0,
):
    """Euler-Maruyama sweep over a batch of paths with given standard
    correlated Brownian increments, shape (n_paths, n_steps).

    Left-endpoint rule throughout: the rate, the impact and funding cash
    flows, and the running inventory penalty all use the state at the start
    of each step. Returns (t_rec, S, P, Q, X, NU, performance, int_q2,
    int_A2); the A-integral uses A = (b*beta + 2*phi)*q + beta*(p - s).
    """
    n_paths, n_steps = dW_s.shape
    rec = _recorded_steps(n_steps, record_stride)
    n_rec = rec.size
    rec_pos = {int(step): j for j, step in enumerate(rec)}
    t_rec = initial.t + rec * dt

    S = np.empty((n_paths, n_rec))
    P = np.empty((n_paths, n_rec))
    Q = np.empty((n_paths, n_rec))
    X = np.empty((n_paths, n_rec))
    NU = np.empty((n_paths, n_rec))

    k, b, beta, alpha, phi = params.k, params.b, params.beta, params.alpha, params.phi
    sigma, eta = params.sigma, params.eta
    a_coeff = b * beta + 2.0 * phi

    s = np.full(n_paths, initial.s, dtype=float)
    p = np.full(n_paths, initial.p, dtype=float)
    q = np.full(n_paths, initial.q, dtype=float)
    x = np.full(n_paths, initial.x, dtype=float)
    int_q2 = np.zeros(n_paths)
    int_A2 = np.zeros(n_paths)

    for i in range(n_steps + 1):
        t = initial.t + i * dt
        nu = np.asarray(strategy.rate_arrays(t, q, p, s), dtype=float)
        if nu.shape != q.shape:
            nu = np.broadcast_to(nu, q.shape).astype(float)
        if not np.isfinite(nu).all():
            bad = np.flatnonzero(~np.isfinite(nu)) + path_offset
            raise NonFinite(
                f"non-finite trade rate at t={t:.6g} for path indices {bad[:8].tolist()}"
            )
        j = rec_pos.get(i)
        if j is not None:
            S[:, j], P[:, j], Q[:, j], X[:, j], NU[:, j] = s, p, q, x, nu
        if i == n_steps:
            break
        x = x - (p + k * nu) * nu * dt - beta * q * (p - spec.value(s)) * dt
        int_q2 += q * q * dt
        A = a_coeff * q + beta * (p - s)
        int_A2 += A * A * dt
        p = p + b * nu * dt + eta * dW_p[:, i]
        s = s + sigma * dW_s[:, i]
        q = q + nu * dt

    if not (np.isfinite(x).all() and np.isfinite(p).all() and np.isfinite(q).all()):
        raise NonFinite("non-finite state at the terminal time")
    performance = x + q * (p - alpha * q) - phi * int_q2
    return t_rec, S, P, Q, X, NU, performance, int_q2, int_A2


def run_ensemble(
    strategy: Strategy, params: ModelParams, spec: PayoffSpec, cfg: SimConfig
) -> PathEnsemble:
    """Simulate cfg.n_paths independent paths under the strategy.

    Paths are processed in blocks; each block regenerates its paths'
    substreams from (seed, path_index), so results do not depend on block
    size or on how blocks are spread over workers.
    """
    dt = (params.T - cfg.initial.t) / cfg.n_steps
    rec = _recorded_steps(cfg.n_steps, cfg.record_stride)
    n_rec = rec.size
    t_rec = cfg.initial.t + rec * dt

    S = np.empty((cfg.n_paths, n_rec))
    P = np.empty((cfg.n_paths, n_rec))
    Q = np.empty((cfg.n_paths, n_rec))
    X = np.empty((cfg.n_paths, n_rec))
    NU = np.empty((cfg.n_paths, n_rec))
    performance = np.empty(cfg.n_paths)
    int_q2 = np.empty(cfg.n_paths)
    int_A2 = np.empty(cfg.n_paths)

    blocks = [
        (a, min(a + cfg.block_size, cfg.n_paths))
        for a in range(0, cfg.n_paths, cfg.block_size)
    ]

    def do_block(bounds: Tuple[int, int]) -> None:
        a, bnd = bounds
        m = bnd - a
        dW_s = np.empty((m, cfg.n_steps))
        dW_p = np.empty((m, cfg.n_steps))
        for i in range(m):
            dW_s[i], dW_p[i] = _path_increments(
                cfg.seed, a + i, cfg.n_steps, params.rho, dt, cfg.antithetic
            )
        out = run_paths(
            strategy, params, spec, cfg.initial, dW_s, dW_p, dt,
            record_stride=cfg.record_stride, path_offset=a,
        )
        _, Sb, Pb, Qb, Xb, NUb, perf_b, iq2_b, ia2_b = out
        S[a:bnd], P[a:bnd], Q[a:bnd], X[a:bnd], NU[a:bnd] = Sb, Pb, Qb, Xb, NUb
        performance[a:bnd], int_q2[a:bnd], int_A2[a:bnd] = perf_b, iq2_b, ia2_b

    if cfg.n_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            list(pool.map(do_block, blocks))
    else:
        for bounds in blocks:
            do_block(bounds)

    return PathEnsemble(
        t_rec=t_rec, S=S, P=P, Q=Q, X=X, NU=NU,
        performance=performance, int_q2=int_q2, int_A2=int_A2,
        params=params, spec=spec, config=cfg,
    )


def simulate_path(
    strategy: Strategy,
    params: ModelParams,
    spec: PayoffSpec,
    cfg: SimConfig,
    path_index: int,
) -> PathRecord:
    """One path of the ensemble, identical to its slot in run_ensemble."""
    if not 0 <= path_index < cfg.n_paths:
        raise ValueError("path_index outside [0, n_paths)")
    dt = (params.T - cfg.initial.t) / cfg.n_steps
    dW_s, dW_p = _path_increments(
        cfg.seed, path_index, cfg.n_steps, params.rho, dt, cfg.antithetic
    )
    t_rec, S, P, Q, X, NU, perf, _, _ = run_paths(
        strategy, params, spec, cfg.initial, dW_s[None, :], dW_p[None, :], dt,
        record_stride=cfg.record_stride, path_offset=path_index,
    )
    return PathRecord(
        t=t_rec, s=S[0], p=P[0], q=Q[0], x=X[0], nu=NU[0], performance=float(perf[0])
    )


def histogram(values: np.ndarray, n_bins: int = 61) -> Tuple[np.ndarray, np.ndarray]:
    """Counts on n_bins uniform bins spanning mean +- 4 sample standard
    deviations (a 2-unit span when the sample is degenerate)."""
    m = float(values.mean())
    sd = float(values.std())
    if not (math.isfinite(m) and math.isfinite(sd)):
        raise NonFinite(
            "sample moments overflowed; the discretization is too coarse "
            "for these parameters (increase n_steps)"
        )
    half = 4.0 * sd if sd > 0.0 else 1.0
    edges = np.linspace(m - half, m + half, n_bins + 1)
    counts, _ = np.histogram(values, edges)
    return edges, counts


@dataclass(frozen=True)
class ASliceStats:
    t: float
    mean: float
    var: float
    se_mean: float
    se_var: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray


@dataclass(frozen=True)
class AStats:
    integral_mean: float
    integral_se: float
    slices: List[ASliceStats]


def a_process_stats(
    ensemble: PathEnsemble,
    params: ModelParams,
    times: Optional[Sequence[float]] = None,
    n_bins: int = 61,
) -> AStats:
    """Mean and SE of the pathwise integral of A^2 (accumulated on the full
    step grid during simulation) plus cross-sectional statistics of
    A = (b*beta + 2*phi) Q + beta (P - S) at the requested times (nearest
    recorded slice)."""
    n = ensemble.n_paths
    integral_mean = float(ensemble.int_A2.mean())
    integral_se = float(ensemble.int_A2.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    slices: List[ASliceStats] = []
    if times:
        coeff = params.b * params.beta + 2.0 * params.phi
        for t_req in times:
            j = int(np.argmin(np.abs(ensemble.t_rec - t_req)))
            A = coeff * ensemble.Q[:, j] + params.beta * (
                ensemble.P[:, j] - ensemble.S[:, j]
            )
            mean = float(A.mean())
            var = float(A.var(ddof=1)) if n > 1 else 0.0
            se_mean = float(A.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
            # distribution-free SE of the sample variance via the 4th moment
            m4 = float(((A - mean) ** 4).mean())
            se_var = math.sqrt(max(m4 - var**2, 0.0) / n) if n > 1 else float("nan")
            edges, counts = histogram(A, n_bins)
            slices.append(
                ASliceStats(
                    t=float(ensemble.t_rec[j]), mean=mean, var=var,
                    se_mean=se_mean, se_var=se_var,
                    hist_edges=edges, hist_counts=counts,
                )
            )
    return AStats(integral_mean=integral_mean, integral_se=integral_se, slices=slices)


@dataclass(frozen=True)
class InventoryStats:
    t: np.ndarray
    mean: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    hists: List[Tuple[np.ndarray, np.ndarray]]


def inventory_stats(ensemble: PathEnsemble, n_bins: int = 61) -> InventoryStats:
    """Mean, 5th and 95th percentiles, and histograms of inventory at every
    recorded time."""
    Q = ensemble.Q
    return InventoryStats(
        t=ensemble.t_rec.copy(),
        mean=Q.mean(axis=0),
        q05=np.percentile(Q, 5.0, axis=0),
        q95=np.percentile(Q, 95.0, axis=0),
        hists=[histogram(Q[:, j], n_bins) for j in range(Q.shape[1])],
    )
