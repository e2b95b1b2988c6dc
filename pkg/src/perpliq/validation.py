"""Acceptance validation suite.

Eleven numbered checks covering: closed-form/ODE cross-validation, Riccati
residuals, Monte Carlo versus analytic value, the small-k limit of the
A process, the analytic A moments, small-beta second-order optimality,
short-horizon consistency, strategy ordering, o(T) control agreement,
degenerate/baseline identities, and the RK4 convergence order.

Each check is self-contained (its parameter set and tolerances are fixed
here) and returns a CheckResult; cmd_validate and the acceptance tests both
run them through run_criteria.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import closed_form
from .asymptotic import NuBarStrategy, NuHatStrategy, NuTildeStrategy, nu_bar, nu_hat
from .closed_form import (
    AlmgrenChrissStrategy,
    ClosedFormStrategy,
    a_mean,
    a_variance,
    almgren_chriss_rate,
    fg,
    nu_star,
)
from .model import Identity, Logistic, MarketState, ModelParams, Quadratic
from .ode import power_graded_grid, solve_h_system, value_identity
from .simulator import SimConfig, a_process_stats, run_ensemble

DEFAULT_SEED = 1234


def _core_params(**over) -> ModelParams:
    base = dict(T=1.0, k=0.1, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
                sigma=1.0, eta=1.0, rho=0.3)
    base.update(over)
    return ModelParams(**base)


def _a_process_params(**over) -> ModelParams:
    base = dict(T=5.0, k=2e-3, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
                sigma=1.0, eta=1.0, rho=0.3)
    base.update(over)
    return ModelParams(**base)


def _short_horizon_params(**over) -> ModelParams:
    base = dict(T=0.5, k=0.1, b=0.1, alpha=0.1, phi=0.5, beta=5.0,
                sigma=1.0, eta=1.0, rho=0.3)
    base.update(over)
    return ModelParams(**base)


def _section4_payoffs() -> Dict[str, object]:
    return {
        "logistic": Logistic(L=1.0, kappa=10.0, S0=100.0, DeltaS=-0.1),
        "quadratic": Quadratic(L=5.0, S0=100.0, DeltaS=0.2, DeltaPsi=-2.0),
    }


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    value_ok: bool
    runtime: float
    runtime_limit: float
    detail: str

    @property
    def passed(self) -> bool:
        return self.value_ok and self.runtime <= self.runtime_limit

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (
            f"[{tag}] criterion {self.criterion}: {self.name} "
            f"({self.runtime:.2f}s / limit {self.runtime_limit:.0f}s) {self.detail}"
        )


def riccati_residuals(
    params: ModelParams,
    n_grid: int = 1000,
    delta: float = 1e-7,
    xi_fn: Optional[Callable] = None,
    pi_fn: Optional[Callable] = None,
) -> Tuple[float, float]:
    """Max relative residual of the xi and pi backward ODEs under central
    finite differencing of the supplied implementations.

    delta balances the O(delta^2 * xi''') truncation error, which blows up
    near maturity where xi approaches b - 2*alpha steeply, against roundoff
    O(eps * |xi| / delta); 1e-7 keeps both below 1e-8 relative.
    """
    xi_fn = xi_fn or closed_form.xi
    pi_fn = pi_fn or closed_form.pi
    t = np.linspace(delta, params.T - delta, n_grid)
    x0, p0 = xi_fn(t, params), pi_fn(t, params)
    dxi = (xi_fn(t + delta, params) - xi_fn(t - delta, params)) / (2.0 * delta)
    dpi = (pi_fn(t + delta, params) - pi_fn(t - delta, params)) / (2.0 * delta)
    rhs_xi = 2.0 * (params.b * params.beta + params.phi) - x0 * x0 / (2.0 * params.k)
    rhs_pi = 2.0 * params.phi - x0 * p0 / (2.0 * params.k)
    rel_xi = np.max(np.abs(dxi - rhs_xi) / np.maximum(1.0, np.abs(rhs_xi)))
    rel_pi = np.max(np.abs(dpi - rhs_pi) / np.maximum(1.0, np.abs(rhs_pi)))
    return float(rel_xi), float(rel_pi)


def _crit_1(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    params = _core_params()
    H = solve_h_system(params, n_steps=2000)
    f_num = 2.0 * H.h1 + params.b * (1.0 + H.h3)
    g_num = H.h3 + 2.0 * params.b * H.h2
    f_cf, g_cf = fg(H.t_grid, params)
    err = max(float(np.max(np.abs(f_num - f_cf))), float(np.max(np.abs(g_num - g_cf))))
    return CheckResult(
        1, "closed-form vs backward-ODE f,g cross-validation",
        err <= 1e-5, time.perf_counter() - t0, 1.0,
        f"max |reconstructed - closed form| = {err:.3e} (tol 1e-5)",
    )


def _crit_2(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    rel_xi, rel_pi = riccati_residuals(_core_params())
    err = max(rel_xi, rel_pi)
    return CheckResult(
        2, "Riccati residuals of xi and pi",
        err <= 1e-6, time.perf_counter() - t0, 1.0,
        f"max relative residual = {err:.3e} (tol 1e-6)",
    )


def _crit_3(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    params = _core_params()
    initial = MarketState(0.0, 0.0, 10.0, 100.0, 100.0)
    cfg = SimConfig(n_steps=1000, n_paths=10_000, seed=seed + 3, initial=initial,
                    record_stride=1000)
    ens = run_ensemble(ClosedFormStrategy(params), params, Identity(), cfg)
    value = value_identity(initial, solve_h_system(params))
    diff = abs(ens.mean_performance - value)
    band = 3.0 * ens.se_performance
    return CheckResult(
        3, "Monte Carlo mean performance vs analytic value (identity payoff)",
        diff <= band, time.perf_counter() - t0, 60.0,
        f"|MC - value| = {diff:.4f} vs 3 SE = {band:.4f} "
        f"(MC {ens.mean_performance:.4f}, value {value:.4f})",
    )


def _crit_4(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    initial = MarketState(0.0, 0.0, 10.0, 100.0, 100.0)
    means = []
    for k in (2e-1, 2e-3, 2e-5):
        params = _a_process_params(k=k)
        cfg = SimConfig(n_steps=1000, n_paths=2000, seed=seed + 4, initial=initial,
                        record_stride=1000)
        ens = run_ensemble(ClosedFormStrategy(params), params, Identity(), cfg)
        stats = a_process_stats(ens, params)
        means.append(stats.integral_mean)
    ok = means[0] >= 2.0 * means[1] and means[1] >= 2.0 * means[2]
    return CheckResult(
        4, "E[int A^2 dt] decreases at least 2x per decade-squared of k",
        ok, time.perf_counter() - t0, 120.0,
        "estimates " + ", ".join(f"{m:.3f}" for m in means)
        + " for k in {2e-1, 2e-3, 2e-5}",
    )


def _crit_5(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    params = _a_process_params()
    initial = MarketState(0.0, 0.0, 10.0, 100.0, 100.0)
    # the Euler bias in Var(A) at t = 3T/4 must sit well inside the 3-SE band;
    # 8000 steps leaves it under 40% of the band across seeds
    n_steps = 8000
    cfg = SimConfig(n_steps=n_steps, n_paths=10_000, seed=seed + 5, initial=initial,
                    record_stride=n_steps // 4)
    ens = run_ensemble(ClosedFormStrategy(params), params, Identity(), cfg)
    slices = (params.T / 4.0, params.T / 2.0, 3.0 * params.T / 4.0)
    stats = a_process_stats(ens, params, times=slices)
    q0, z0 = initial.q, initial.p - initial.s
    A0 = (params.b * params.beta + 2.0 * params.phi) * q0 + params.beta * z0
    f0, g0 = fg(0.0, params)
    Y0 = (f0 * q0 + g0 * z0) / math.sqrt(params.k)
    parts = []
    ok = True
    for sl in stats.slices:
        m_th = float(a_mean(sl.t, params, A0, Y0))
        v_th = a_variance(sl.t, params)
        ok_m = abs(sl.mean - m_th) <= 3.0 * sl.se_mean
        ok_v = abs(sl.var - v_th) <= 3.0 * sl.se_var
        ok = ok and ok_m and ok_v
        parts.append(
            f"t={sl.t:g}: dmean={abs(sl.mean - m_th):.4f}/{3*sl.se_mean:.4f} "
            f"dvar={abs(sl.var - v_th):.4f}/{3*sl.se_var:.4f}"
        )
    return CheckResult(
        5, "MC mean and variance of A vs analytic moment formulas",
        ok, time.perf_counter() - t0, 60.0, "; ".join(parts),
    )


def _crit_6(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    initial = MarketState(0.0, 0.0, 10.0, 100.0, 100.0)
    betas = (0.4, 0.2, 0.1)
    gaps, ses = [], []
    for beta in betas:
        params = _core_params(beta=beta)
        cfg = SimConfig(n_steps=1000, n_paths=10_000, seed=seed + 6, initial=initial,
                        record_stride=1000)
        ens_star = run_ensemble(ClosedFormStrategy(params), params, Identity(), cfg)
        ens_hat = run_ensemble(NuHatStrategy(params, Identity()), params, Identity(), cfg)
        d = ens_star.performance - ens_hat.performance
        gaps.append(float(d.mean()) / beta**2)
        ses.append(float(d.std(ddof=1)) / math.sqrt(d.size) / beta**2)
    mono = all(
        gaps[i + 1] <= gaps[i] + 3.0 * math.hypot(ses[i], ses[i + 1])
        for i in range(len(gaps) - 1)
    )
    near_zero = abs(gaps[-1]) <= 3.0 * ses[-1]
    detail = ", ".join(
        f"beta={b}: {g:.2e}+-{s:.2e}" for b, g, s in zip(betas, gaps, ses)
    )
    return CheckResult(
        6, "(H_star - H_hat)/beta^2 nonincreasing toward 0 (paired paths)",
        mono and near_zero, time.perf_counter() - t0, 120.0, detail,
    )


def _crit_7(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    horizons = (0.5, 0.2, 0.1, 0.05)
    target = -0.1 * 10.0**2  # -alpha * q0^2
    ok = True
    lines = []
    for pname, spec in _section4_payoffs().items():
        for sname in ("nu_bar", "nu_tilde", "ac"):
            gaps, allowances = [], []
            for T in horizons:
                params = _short_horizon_params(T=T)
                strat = {
                    "nu_bar": NuBarStrategy(params, spec),
                    "nu_tilde": NuTildeStrategy(params, spec),
                    "ac": AlmgrenChrissStrategy(params),
                }[sname]
                initial = MarketState(0.0, 0.0, 10.0, 100.0, 100.0)
                cfg = SimConfig(n_steps=500, n_paths=4000, seed=seed + 7,
                                initial=initial, record_stride=500)
                ens = run_ensemble(strat, params, spec, cfg)
                excess = ens.performance - (initial.x + initial.q * initial.p)
                gaps.append(abs(float(excess.mean()) - target))
                allowances.append(3.0 * float(excess.std(ddof=1)) / math.sqrt(excess.size))
            mono = all(
                gaps[i + 1] <= gaps[i] + allowances[i] + allowances[i + 1]
                for i in range(len(gaps) - 1)
            )
            shrunk = gaps[-1] <= 0.5 * gaps[0] + allowances[-1]
            ok = ok and mono and shrunk
            lines.append(
                f"{pname}/{sname}: |excess-({target})| = "
                + " -> ".join(f"{g:.2f}" for g in gaps)
            )
    return CheckResult(
        7, "short-horizon excess performance converges toward -alpha*q0^2",
        ok, time.perf_counter() - t0, 120.0, "; ".join(lines),
    )


def _crit_8(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    params = _short_horizon_params(T=0.5)
    initial = MarketState(0.0, 0.0, 10.0, 100.0, 100.0)
    ok = True
    parts = []
    for pname, spec in _section4_payoffs().items():
        cfg = SimConfig(n_steps=500, n_paths=8000, seed=seed + 8, initial=initial,
                        record_stride=500)
        ens_bar = run_ensemble(NuBarStrategy(params, spec), params, spec, cfg)
        ens_tilde = run_ensemble(NuTildeStrategy(params, spec), params, spec, cfg)
        d = ens_bar.performance - ens_tilde.performance
        gap = float(d.mean())
        se = float(d.std(ddof=1)) / math.sqrt(d.size)
        ok = ok and gap > 2.0 * se
        parts.append(f"{pname}: gap = {gap:.4f} = {gap / se:.1f} paired SE")
    return CheckResult(
        8, "nu_bar outperforms nu_tilde by more than 2 paired SE at the largest T",
        ok, time.perf_counter() - t0, 120.0, "; ".join(parts),
    )


def _crit_9(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    spec = _section4_payoffs()["logistic"]
    sups = []
    for T in (0.4, 0.2, 0.1, 0.05):
        params = _short_horizon_params(T=T)
        ts = np.linspace(0.0, T, 21)
        qs = np.linspace(-10.0, 10.0, 11)
        ps = np.linspace(95.0, 105.0, 11)
        ss = np.linspace(95.0, 105.0, 11)
        bar_s = NuBarStrategy(params, spec)
        tilde_s = NuTildeStrategy(params, spec)
        Qg, Pg, Sg = (a.ravel() for a in np.meshgrid(qs, ps, ss, indexing="ij"))
        worst = 0.0
        for t in ts:
            diff = np.max(np.abs(
                np.asarray(bar_s.rate_arrays(t, Qg, Pg, Sg))
                - np.asarray(tilde_s.rate_arrays(t, Qg, Pg, Sg))
            ))
            worst = max(worst, float(diff))
        sups.append(worst / T)
    ok = all(sups[i + 1] < sups[i] for i in range(len(sups) - 1))
    return CheckResult(
        9, "sup |nu_bar - nu_tilde|/T decreases as T shrinks",
        ok, time.perf_counter() - t0, 10.0,
        "sup/T = " + " -> ".join(f"{v:.4f}" for v in sups)
        + " for T in {0.4, 0.2, 0.1, 0.05}",
    )


def _crit_10(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    params = _core_params(beta=0.0)
    rng = np.random.default_rng(seed + 10)
    worst_hat = 0.0
    ident = Identity()
    for _ in range(1000):
        st = MarketState(
            t=float(rng.uniform(0.0, params.T)), x=0.0,
            q=float(rng.uniform(-10.0, 10.0)),
            p=float(rng.uniform(95.0, 105.0)),
            s=float(rng.uniform(95.0, 105.0)),
        )
        ac = almgren_chriss_rate(st, params)
        hat = nu_hat(st, params, ident)
        worst_hat = max(worst_hat, abs(hat - ac) / max(1.0, abs(ac)))
    params_f = _core_params()
    worst_bar = 0.0
    for _ in range(1000):
        st = MarketState(
            t=float(rng.uniform(0.0, params_f.T)), x=0.0,
            q=float(rng.uniform(-10.0, 10.0)),
            p=float(rng.uniform(95.0, 105.0)),
            s=float(rng.uniform(95.0, 105.0)),
        )
        star = nu_star(st, params_f)
        bar = nu_bar(st, params_f, ident)
        worst_bar = max(worst_bar, abs(bar - star) / max(1.0, abs(star)))
    err = max(worst_hat, worst_bar)
    return CheckResult(
        10, "nu_hat(beta=0) = baseline rate and nu_bar(identity) = nu_star",
        err <= 1e-12, time.perf_counter() - t0, 1.0,
        f"max scaled deviations: hat-vs-baseline {worst_hat:.2e}, "
        f"bar-vs-star {worst_bar:.2e} (tol 1e-12)",
    )


def _crit_11(seed: int) -> CheckResult:
    t0 = time.perf_counter()
    params = _core_params()
    ref = solve_h_system(params, n_steps=10_000)
    ref_mat = np.column_stack([ref.h0, ref.h1, ref.h2, ref.h3])
    errs = {}
    for n in (500, 1000):
        sol = solve_h_system(params, n_steps=n)
        stride = 10_000 // n
        mat = np.column_stack([sol.h0, sol.h1, sol.h2, sol.h3])
        errs[n] = float(np.max(np.abs(mat - ref_mat[::stride])))
    ratio = errs[500] / errs[1000]
    return CheckResult(
        11, "RK4 error ratio (500 vs 1000 steps against 10000-step reference)",
        12.0 <= ratio <= 20.0, time.perf_counter() - t0, 5.0,
        f"errors {errs[500]:.3e} / {errs[1000]:.3e}, ratio {ratio:.2f} (need [12, 20])",
    )


CRITERIA: Dict[int, Callable[[int], CheckResult]] = {
    1: _crit_1, 2: _crit_2, 3: _crit_3, 4: _crit_4, 5: _crit_5, 6: _crit_6,
    7: _crit_7, 8: _crit_8, 9: _crit_9, 10: _crit_10, 11: _crit_11,
}


def run_criteria(
    ids: Optional[Sequence[int]] = None, seed: int = DEFAULT_SEED
) -> List[CheckResult]:
    """Run the selected acceptance checks (all by default), in order."""
    if ids is None:
        ids = sorted(CRITERIA)
    results = []
    for i in ids:
        if i not in CRITERIA:
            raise ValueError(f"unknown criterion id {i}; valid: {sorted(CRITERIA)}")
        results.append(CRITERIA[i](seed))
    return results
