"""Command-line harness: solve, simulate, figure, compare, validate.

Configuration is a single JSON document with up to four blocks (params,
payoff, sim, experiment); unknown keys are rejected at every level. Outputs
are plot-ready CSV files with a provenance header plus a manifest JSON, and
contain no timestamps, so re-running a command with the same config
reproduces byte-identical data files.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .asymptotic import NuBarStrategy, NuHatStrategy, NuTildeStrategy
from .closed_form import AlmgrenChrissStrategy, ClosedFormStrategy, ac_inventory_path, fg, pi, xi
from .model import (
    Identity,
    Logistic,
    MarketState,
    ModelParams,
    ParamError,
    PayoffSpec,
    Quadratic,
    Strategy,
    validate_params,
)
from .ode import solve_h_system
from .simulator import PathEnsemble, SimConfig, a_process_stats, inventory_stats, run_ensemble
from .validation import DEFAULT_SEED, run_criteria

DEFAULT_CLI_SEED = 7

# caption parameter sets; a config's params block overrides field by field
_CORE_PARAMS = dict(T=1.0, k=0.1, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
                    sigma=1.0, eta=1.0, rho=0.3)
_A_PARAMS = dict(T=5.0, k=2e-3, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
                 sigma=1.0, eta=1.0, rho=0.3)
_SHORT_PARAMS = dict(T=0.5, k=0.1, b=0.1, alpha=0.1, phi=0.5, beta=5.0,
                     sigma=1.0, eta=1.0, rho=0.3)
_DEFAULT_INITIAL = dict(t=0.0, x=0.0, q=10.0, p=100.0, s=100.0)

_TOP_KEYS = {"params", "payoff", "sim", "experiment"}
_SIM_KEYS = {"n_steps", "n_paths", "seed", "record_stride", "antithetic",
             "n_workers", "block_size", "initial"}
_INITIAL_KEYS = {"t", "x", "q", "p", "s"}
_EXPERIMENT_KEYS = {"strategy", "strategies", "out_dir", "p0_values",
                    "k_values", "t_values", "slice_times", "s_range",
                    "n_points", "n_sample_paths", "criteria"}
_PAYOFF_FIELDS = {
    "identity": set(),
    "logistic": {"L", "kappa", "S0", "DeltaS"},
    "quadratic": {"L", "S0", "DeltaS", "DeltaPsi"},
}
_PARAM_FIELDS = {f.name for f in dataclasses.fields(ModelParams)}


class ConfigError(ValueError):
    """Malformed or contradictory configuration input."""


def _as_float(name: str, v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {v!r}") from None


def _as_int(name: str, v) -> int:
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {v!r}") from None
    if not f.is_integer():
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(f)


def _as_floats(name: str, values) -> List[float]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{name} must be a non-empty array")
    return [_as_float(f"{name}[{i}]", v) for i, v in enumerate(values)]


def _check_keys(block: str, mapping: Mapping, allowed: set) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {block}: {unknown}")


def _load_config(path: Optional[Path]) -> Dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys("config", raw, _TOP_KEYS)
    for block in _TOP_KEYS & set(raw):
        if not isinstance(raw[block], dict):
            raise ConfigError(f"config block '{block}' must be a JSON object")
    return raw


def _params_from(config: Dict, defaults: Dict) -> ModelParams:
    block = config.get("params", {})
    _check_keys("params", block, _PARAM_FIELDS)
    merged = dict(defaults)
    merged.update(block)
    return validate_params(merged)


def _payoff_from(config: Dict) -> PayoffSpec:
    block = dict(config.get("payoff", {"kind": "identity"}))
    kind = block.pop("kind", "identity")
    if kind not in _PAYOFF_FIELDS:
        raise ConfigError(
            f"unknown payoff kind {kind!r}; choose from "
            f"{sorted(_PAYOFF_FIELDS)} (callable payoffs are built in code)"
        )
    _check_keys("payoff", block, _PAYOFF_FIELDS[kind])
    fields = {k: _as_float(f"payoff.{k}", v) for k, v in block.items()}
    if kind == "identity":
        return Identity()
    if kind == "logistic":
        return Logistic(**fields)
    return Quadratic(**fields)


def _sim_from(config: Dict, ns: argparse.Namespace, defaults: Dict) -> SimConfig:
    block = config.get("sim", {})
    _check_keys("sim", block, _SIM_KEYS)
    merged = dict(defaults)
    merged.update(block)
    initial = dict(_DEFAULT_INITIAL)
    init_block = merged.pop("initial", {})
    _check_keys("sim.initial", init_block, _INITIAL_KEYS)
    initial.update(init_block)
    if ns.seed is not None:
        merged["seed"] = ns.seed
    if ns.paths is not None:
        merged["n_paths"] = ns.paths
    if ns.steps is not None:
        merged["n_steps"] = ns.steps
    for key in ("n_steps", "n_paths", "seed", "record_stride", "n_workers",
                "block_size"):
        if key in merged:
            merged[key] = _as_int(f"sim.{key}", merged[key])
    if not isinstance(merged.get("antithetic", False), bool):
        raise ConfigError("sim.antithetic must be a boolean")
    try:
        return SimConfig(
            initial=MarketState(
                **{k: _as_float(f"sim.initial.{k}", v) for k, v in initial.items()}
            ),
            **merged,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _strategy(name: str, params: ModelParams, spec: PayoffSpec) -> Strategy:
    builders = {
        "nu_star": lambda: ClosedFormStrategy(params),
        "ac": lambda: AlmgrenChrissStrategy(params),
        "nu_hat": lambda: NuHatStrategy(params, spec),
        "nu_tilde": lambda: NuTildeStrategy(params, spec),
        "nu_bar": lambda: NuBarStrategy(params, spec),
    }
    if name not in builders:
        raise ConfigError(f"unknown strategy {name!r}; choose from {sorted(builders)}")
    return builders[name]()


def _hash(payload: Mapping) -> str:
    canon = json.dumps({k: repr(v) for k, v in payload.items()}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _provenance(
    payload: Mapping,
    seed: Optional[int] = None,
    n_steps: Optional[int] = None,
    n_paths: Optional[int] = None,
) -> List[str]:
    lines = [f"# perpliq {__version__}", f"# params {_hash(payload)}"]
    if seed is not None:
        lines.append(f"# seed {seed}")
    counts = [f"steps {n_steps}" if n_steps is not None else "",
              f"paths {n_paths}" if n_paths is not None else ""]
    counts = [c for c in counts if c]
    if counts:
        lines.append("# " + " ".join(counts))
    return lines


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, prov: List[str], columns: Sequence[str],
               rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in prov:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir: Path, command: str, files: List[str], meta: Dict) -> Path:
    doc = {"command": command, "files": sorted(files), **meta}
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _out_dir(ns: argparse.Namespace, config: Dict) -> Path:
    exp = config.get("experiment", {})
    _check_keys("experiment", exp, _EXPERIMENT_KEYS)
    out = ns.out_dir or exp.get("out_dir") or "out"
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _a_matrix(ens: PathEnsemble, params: ModelParams, spec: PayoffSpec) -> np.ndarray:
    coeff = params.b * params.beta + 2.0 * params.phi
    return coeff * ens.Q + params.beta * (ens.P - spec.value(ens.S))


# ---------------------------------------------------------------- commands


def cmd_solve(ns: argparse.Namespace) -> int:
    config = _load_config(ns.config)
    out = _out_dir(ns, config)
    params = _params_from(config, _CORE_PARAMS)
    n_steps = ns.steps if ns.steps is not None else 2000
    sol = solve_h_system(params, n_steps=n_steps)
    pdict = dataclasses.asdict(params)
    prov = _provenance(pdict, n_steps=n_steps)

    h_path = out / "h_coefficients.csv"
    _write_csv(h_path, prov, ["t", "h0", "h1", "h2", "h3"],
               zip(sol.t_grid, sol.h0, sol.h1, sol.h2, sol.h3))
    xi_g = xi(sol.t_grid, params)
    pi_g = pi(sol.t_grid, params)
    f_g, g_g = fg(sol.t_grid, params)
    r_path = out / "rates_grid.csv"
    _write_csv(r_path, prov, ["t", "xi", "pi", "f", "g"],
               zip(sol.t_grid, xi_g, pi_g, f_g, g_g))

    B = params.b - 2.0 * params.alpha
    print(f"terminal h(T) = ({sol.h0[-1]:g}, {sol.h1[-1]:g}, {sol.h2[-1]:g}, "
          f"{sol.h3[-1]:g}); expected (0, {-params.alpha:g}, 0, 0)")
    print(f"terminal xi(T) = {xi_g[-1]:g}, pi(T) = {pi_g[-1]:g}; "
          f"expected b - 2 alpha = {B:g}")
    _write_manifest(out, "solve", [h_path.name, r_path.name],
                    {"params_hash": _hash(pdict), "n_steps": n_steps})
    return 0


def cmd_simulate(ns: argparse.Namespace) -> int:
    config = _load_config(ns.config)
    out = _out_dir(ns, config)
    params = _params_from(config, _CORE_PARAMS)
    spec = _payoff_from(config)
    cfg = _sim_from(config, ns, dict(n_steps=1000, n_paths=10_000,
                                     seed=DEFAULT_CLI_SEED, record_stride=10))
    exp = config.get("experiment", {})
    name = exp.get("strategy", "nu_star")
    ens = run_ensemble(_strategy(name, params, spec), params, spec, cfg)

    inv = inventory_stats(ens)
    A = _a_matrix(ens, params, spec)
    pdict = dataclasses.asdict(params)
    prov = _provenance(pdict, seed=cfg.seed, n_steps=cfg.n_steps, n_paths=cfg.n_paths)
    files = []
    e_path = out / "ensemble.csv"
    _write_csv(e_path, prov, ["t", "mean_q", "q05", "q95", "mean_A", "var_A"],
               zip(inv.t, inv.mean, inv.q05, inv.q95,
                   A.mean(axis=0), A.var(axis=0, ddof=1)))
    files.append(e_path.name)
    if ns.per_path:
        p_path = out / "paths.csv"
        rows = (
            (i, ens.t_rec[j], ens.S[i, j], ens.P[i, j], ens.Q[i, j],
             ens.X[i, j], ens.NU[i, j])
            for i in range(ens.n_paths) for j in range(ens.t_rec.size)
        )
        _write_csv(p_path, prov, ["path", "t", "s", "p", "q", "x", "nu"], rows)
        files.append(p_path.name)
    print(f"strategy {name}: mean performance {ens.mean_performance:.6f} "
          f"+- {ens.se_performance:.6f} SE ({ens.n_paths} paths)")
    _write_manifest(out, "simulate", files, {
        "params_hash": _hash(pdict), "seed": cfg.seed, "strategy": name,
        "n_steps": cfg.n_steps, "n_paths": cfg.n_paths,
        "mean_performance": ens.mean_performance,
        "se_performance": ens.se_performance,
    })
    return 0


def _figure_1(ns, config, out) -> Tuple[List[str], Dict]:
    params = _params_from(config, _CORE_PARAMS)
    spec = _payoff_from(config)
    exp = config.get("experiment", {})
    p0_values = _as_floats("experiment.p0_values",
                           exp.get("p0_values", [101.0, 100.0, 99.0]))
    name = exp.get("strategy", "nu_star")
    base = _sim_from(config, ns, dict(n_steps=1000, n_paths=10_000,
                                      seed=DEFAULT_CLI_SEED, record_stride=10))
    pdict = dataclasses.asdict(params)
    files = []
    for p0 in p0_values:
        init = dataclasses.replace(base.initial, p=p0)
        cfg = dataclasses.replace(base, initial=init)
        ens = run_ensemble(_strategy(name, params, spec), params, spec, cfg)
        inv = inventory_stats(ens)
        _, ac_q = ac_inventory_path(params, init.q, inv.t.size)
        prov = _provenance(pdict, seed=cfg.seed, n_steps=cfg.n_steps,
                           n_paths=cfg.n_paths)
        path = out / f"fig1_p{p0:g}.csv"
        _write_csv(path, prov, ["t", "mean_q", "q05", "q95", "ac_q"],
                   zip(inv.t, inv.mean, inv.q05, inv.q95, ac_q))
        files.append(path.name)
        d_path = out / f"fig1_p{p0:g}_density.csv"
        rows = (
            (inv.t[j], edges[i], edges[i + 1], counts[i])
            for j, (edges, counts) in enumerate(inv.hists)
            for i in range(counts.size)
        )
        _write_csv(d_path, prov, ["t", "bin_left", "bin_right", "count"], rows)
        files.append(d_path.name)
    return files, {"params_hash": _hash(pdict), "seed": base.seed,
                   "p0_values": p0_values, "strategy": name}


def _figure_2_3(ns, config, out, fig_id: int) -> Tuple[List[str], Dict]:
    params0 = _params_from(config, _A_PARAMS)
    spec = _payoff_from(config)
    exp = config.get("experiment", {})
    k_values = _as_floats("experiment.k_values",
                          exp.get("k_values", [2e-1, 2e-3, 2e-5]))
    if fig_id == 2:
        n_sample = _as_int("experiment.n_sample_paths", exp.get("n_sample_paths", 5))
        defaults = dict(n_steps=1000, n_paths=n_sample, seed=DEFAULT_CLI_SEED,
                        record_stride=5)
    else:
        defaults = dict(n_steps=1000, n_paths=10_000, seed=DEFAULT_CLI_SEED,
                        record_stride=10)
    cfg = _sim_from(config, ns, defaults)
    slice_times = _as_floats("experiment.slice_times", exp.get(
        "slice_times", [params0.T / 4, params0.T / 2, 3 * params0.T / 4]))
    files = []
    for k in k_values:
        params = dataclasses.replace(params0, k=k)
        ens = run_ensemble(ClosedFormStrategy(params), params, spec, cfg)
        pdict = dataclasses.asdict(params)
        prov = _provenance(pdict, seed=cfg.seed, n_steps=cfg.n_steps,
                           n_paths=cfg.n_paths)
        if fig_id == 2:
            A = _a_matrix(ens, params, spec)
            path = out / f"fig2_k{k:g}.csv"
            cols = ["t"] + [f"A_{i + 1}" for i in range(ens.n_paths)]
            _write_csv(path, prov, cols, zip(ens.t_rec, *A))
        else:
            stats = a_process_stats(ens, params, times=slice_times)
            path = out / f"fig3_k{k:g}.csv"
            rows = (
                (sl.t, sl.hist_edges[i], sl.hist_edges[i + 1], sl.hist_counts[i])
                for sl in stats.slices for i in range(sl.hist_counts.size)
            )
            _write_csv(path, prov, ["t", "bin_left", "bin_right", "count"], rows)
        files.append(path.name)
    meta = {"seed": cfg.seed, "k_values": k_values}
    if fig_id == 3:
        meta["slice_times"] = slice_times
    return files, meta


def _figure_4(ns, config, out) -> Tuple[List[str], Dict]:
    exp = config.get("experiment", {})
    s_range = _as_floats("experiment.s_range", exp.get("s_range", [98.0, 102.0]))
    if len(s_range) != 2 or s_range[0] >= s_range[1]:
        raise ConfigError("experiment.s_range must be [lo, hi] with lo < hi")
    lo, hi = s_range
    n_points = _as_int("experiment.n_points", exp.get("n_points", 201))
    s = np.linspace(lo, hi, n_points)
    specs = {
        "logistic": Logistic(L=1.0, kappa=10.0, S0=100.0, DeltaS=-0.1),
        "quadratic": Quadratic(L=5.0, S0=100.0, DeltaS=0.2, DeltaPsi=-2.0),
    }
    files = []
    for name, spec in specs.items():
        sdict = dataclasses.asdict(spec)
        path = out / f"fig4_{name}.csv"
        _write_csv(path, _provenance(sdict), ["s", "psi"], zip(s, spec.value(s)))
        files.append(path.name)
    return files, {"s_range": [lo, hi], "n_points": n_points}


def _sweep_performance(
    t_values: Sequence[float],
    strategies: Sequence[str],
    params0: ModelParams,
    spec: PayoffSpec,
    cfg: SimConfig,
) -> Dict[str, List[Tuple[float, float, np.ndarray]]]:
    """Mean excess performance (+SE, +per-path values) per strategy per T.

    The same seed is reused across strategies and horizons, so columns are
    common-random-number paired.
    """
    table: Dict[str, List[Tuple[float, float, np.ndarray]]] = {s: [] for s in strategies}
    for T in t_values:
        params = dataclasses.replace(params0, T=T)
        for name in strategies:
            ens = run_ensemble(_strategy(name, params, spec), params, spec, cfg)
            excess = ens.performance - (cfg.initial.x + cfg.initial.q * cfg.initial.p)
            se = float(excess.std(ddof=1) / np.sqrt(excess.size))
            table[name].append((float(excess.mean()), se, excess))
    return table


def _figure_5(ns, config, out) -> Tuple[List[str], Dict]:
    params0 = _params_from(config, _SHORT_PARAMS)
    exp = config.get("experiment", {})
    t_values = _as_floats("experiment.t_values",
                          exp.get("t_values", [0.5, 0.2, 0.1, 0.05]))
    strategies = exp.get("strategies", ["nu_bar", "nu_tilde", "ac"])
    if not isinstance(strategies, (list, tuple)) or not strategies:
        raise ConfigError("experiment.strategies must be a non-empty array")
    strategies = [str(s) for s in strategies]
    cfg = _sim_from(config, ns, dict(n_steps=500, n_paths=4000,
                                     seed=DEFAULT_CLI_SEED, record_stride=500))
    specs = {
        "logistic": Logistic(L=1.0, kappa=10.0, S0=100.0, DeltaS=-0.1),
        "quadratic": Quadratic(L=5.0, S0=100.0, DeltaS=0.2, DeltaPsi=-2.0),
    }
    pdict = dataclasses.asdict(params0)
    files = []
    for pname, spec in specs.items():
        table = _sweep_performance(t_values, strategies, params0, spec, cfg)
        cols = ["T"]
        for s in strategies:
            cols += [f"{s}_mean_excess", f"{s}_se"]
        rows = []
        for i, T in enumerate(t_values):
            row = [T]
            for s in strategies:
                row += [table[s][i][0], table[s][i][1]]
            rows.append(row)
        path = out / f"fig5_{pname}.csv"
        _write_csv(path, _provenance(pdict, seed=cfg.seed, n_steps=cfg.n_steps,
                                     n_paths=cfg.n_paths), cols, rows)
        files.append(path.name)
    return files, {"seed": cfg.seed, "t_values": t_values,
                   "strategies": strategies}


def cmd_figure(ns: argparse.Namespace) -> int:
    config = _load_config(ns.config)
    out = _out_dir(ns, config)
    builders = {1: _figure_1, 2: _figure_2_3, 3: _figure_2_3,
                4: _figure_4, 5: _figure_5}
    if ns.id in (2, 3):
        files, meta = builders[ns.id](ns, config, out, ns.id)
    else:
        files, meta = builders[ns.id](ns, config, out)
    _write_manifest(out, f"fig{ns.id}", files, meta)
    for f in files:
        print(out / f)
    return 0


def cmd_compare(ns: argparse.Namespace) -> int:
    config = _load_config(ns.config)
    out = _out_dir(ns, config)
    params0 = _params_from(config, _SHORT_PARAMS)
    spec = _payoff_from(config) if "payoff" in config else Logistic(
        L=1.0, kappa=10.0, S0=100.0, DeltaS=-0.1)
    exp = config.get("experiment", {})
    t_values = _as_floats("experiment.t_values",
                          exp.get("t_values", [0.5, 0.2, 0.1, 0.05]))
    strategies = exp.get("strategies", ["nu_bar", "nu_tilde", "ac"])
    if not isinstance(strategies, (list, tuple)) or not strategies:
        raise ConfigError("experiment.strategies must be a non-empty array")
    strategies = [str(s) for s in strategies]
    cfg = _sim_from(config, ns, dict(n_steps=500, n_paths=4000,
                                     seed=DEFAULT_CLI_SEED, record_stride=500))
    table = _sweep_performance(t_values, strategies, params0, spec, cfg)

    flag = "nu_bar" in strategies and "nu_tilde" in strategies
    cols = ["T"]
    for s in strategies:
        cols += [f"{s}_mean_excess", f"{s}_se"]
    if flag:
        cols += ["bar_minus_tilde", "paired_se", "bar_ge_tilde"]
    rows = []
    for i, T in enumerate(t_values):
        row = [T]
        for s in strategies:
            row += [table[s][i][0], table[s][i][1]]
        if flag:
            d = table["nu_bar"][i][2] - table["nu_tilde"][i][2]
            dm = float(d.mean())
            row += [dm, float(d.std(ddof=1) / np.sqrt(d.size)), dm >= 0.0]
        rows.append(row)
    pdict = dataclasses.asdict(params0)
    path = out / "compare.csv"
    _write_csv(path, _provenance(pdict, seed=cfg.seed, n_steps=cfg.n_steps,
                                 n_paths=cfg.n_paths), cols, rows)
    print(",".join(cols))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    _write_manifest(out, "compare", [path.name], {
        "params_hash": _hash(pdict), "seed": cfg.seed,
        "t_values": t_values, "strategies": strategies,
    })
    return 0


def cmd_validate(ns: argparse.Namespace) -> int:
    config = _load_config(ns.config)
    out = _out_dir(ns, config)
    exp = config.get("experiment", {})
    ids: Optional[List[int]] = None
    if ns.criteria is not None:
        try:
            ids = sorted({int(tok) for tok in ns.criteria.split(",") if tok.strip()})
        except ValueError as exc:
            raise ConfigError(f"--criteria must be comma-separated integers: {exc}")
    elif "criteria" in exp:
        ids = [_as_int("experiment.criteria", v) for v in exp["criteria"]]
    seed = ns.seed if ns.seed is not None else DEFAULT_SEED
    try:
        results = run_criteria(ids, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for r in results:
        print(r.line())
    report = {
        "seed": seed,
        "all_passed": all(r.passed for r in results),
        "criteria": [
            {
                "id": r.criterion, "name": r.name, "passed": r.passed,
                "value_ok": r.value_ok, "runtime_s": round(r.runtime, 3),
                "runtime_limit_s": r.runtime_limit, "detail": r.detail,
            }
            for r in results
        ],
    }
    (out / "validate_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n")
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if report["all_passed"] else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perpliq",
        description="Optimal-liquidation toolkit for perpetual contracts: "
                    "closed-form and asymptotic strategies, Monte Carlo "
                    "experiments, and an acceptance-validation suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out-dir", type=Path, help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="override config seed")
        sp.add_argument("--paths", type=int, help="override config n_paths")
        sp.add_argument("--steps", type=int, help="override config n_steps")

    sp = sub.add_parser("solve", help="solve the value ODEs; write h and rate grids")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="run one ensemble; write summary CSV")
    common(sp)
    sp.add_argument("--per-path", action="store_true",
                    help="also write every recorded path (large)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("figure", help="reproduce a preset experiment (1-5)")
    sp.add_argument("id", type=int, choices=range(1, 6),
                    help="preset experiment id")
    common(sp)
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("compare", help="tabulate strategy performance over a T sweep")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("validate", help="run the acceptance checks")
    common(sp)
    sp.add_argument("--criteria", type=str,
                    help="comma-separated subset of criterion ids, e.g. 1,2,10")
    sp.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ConfigError, ParamError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
