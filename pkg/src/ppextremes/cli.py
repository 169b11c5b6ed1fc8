"""Command-line front end.

Each subcommand is driven by a single declarative YAML config (shipped
presets cover the simulation scenarios and the river-flow study); flags
override config values. Outputs are CSV tables plus SVG figures rendered
from those CSVs, and the resolved config is copied into the output
directory so every run is reproducible from config + seed.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import plots
from .analysis import (
    Estimator,
    mse_report_to_csv,
    mse_study,
    pc_posterior_mass,
    propriety_oracle_jeffreys,
    return_level_curve,
    run_inference,
    summarize,
    summary_to_csv,
    summary_to_json,
)
from .core import OriginalParams, rescale_blocks
from .diagnostics import build_report, report_to_csv
from .ingest import DeclusterConfig, decluster, load_csv
from .model import ConfigError, Parameterization, read_exceedances, write_exceedances
from .priors import PcPriorConfig, PriorSpec
from .sampler import ChainSet, SamplerConfig, chainset_to_csv
from .simulate import GeneratorSpec, generate

OUTPUT_DIR_ENV = "PPEXTREMES_OUTDIR"

_NUM = (int, float)

_MODEL_SCHEMA = {
    "parameterization": str,
    "m_override": (str, int, float),
    "fix_xi": _NUM,
    "label": str,
    "prior": str,
}

_PRIOR_SCHEMA = {"kind": str, "lambda": _NUM, "laplace_approx": bool, "label": str, "fix_xi": _NUM}

SCHEMA = {
    "seed": int,
    "output_dir": str,
    "generator": {"m": _NUM, "u": _NUM, "mu": _NUM, "sigma": _NUM, "xi": _NUM, "seed": int},
    "data": {
        "exceedances_csv": str,
        "u": _NUM,
        "m": _NUM,
        "daily_csv": str,
        "threshold": _NUM,
        "gap_days": int,
        "season": [int],
        "date_column": int,
        "value_column": int,
    },
    "model": _MODEL_SCHEMA,
    "prior": _PRIOR_SCHEMA,
    "sampler": {"chains": int, "draws": int, "burnin": int, "target_accept": _NUM, "jitter": _NUM},
    "diagnostics": {"max_lag": int, "rhat_threshold": _NUM, "ess_points": int, "split": bool},
    "periods": {"start": _NUM, "stop": _NUM, "count": int},
    "annual_m": _NUM,
    "compare": {"parameterizations": [_MODEL_SCHEMA]},
    "priors_sweep": [_PRIOR_SCHEMA],
    "mse": {
        "xi0_grid": [_NUM],
        "n_rep": int,
        "r_target": _NUM,
        "base": {"m": _NUM, "u": _NUM, "sigma": _NUM, "seed": int},
        "estimators": [
            {
                "name": str,
                "kind": str,
                "parameterization": str,
                "m_override": (str, int, float),
                "prior": str,
                "lambda": _NUM,
            }
        ],
    },
    "propriety": {"x_minus_u": [_NUM], "pc_lambda": _NUM, "cutoffs": [_NUM]},
}


def validate_config(cfg: dict, schema: dict = SCHEMA, path: str = "") -> None:
    """Reject unknown keys and wrongly-typed values anywhere in the tree."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"config section {path or '<root>'} must be a mapping")
    for key, value in cfg.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {here}")
        spec = schema[key]
        if isinstance(spec, dict):
            validate_config(value, spec, here)
        elif isinstance(spec, list):
            if not isinstance(value, list):
                raise ConfigError(f"{here} must be a list")
            for i, item in enumerate(value):
                if isinstance(spec[0], dict):
                    validate_config(item, spec[0], f"{here}[{i}]")
                elif not isinstance(item, spec[0]):
                    raise ConfigError(f"{here}[{i}] must be {spec[0]}")
        else:
            types = spec if isinstance(spec, tuple) else (spec,)
            if isinstance(value, bool) and bool not in types:
                raise ConfigError(f"{here} has wrong type (bool)")
            if not isinstance(value, types):
                raise ConfigError(f"{here} must be of type {types}")


def load_config(args) -> dict:
    if args.preset and args.config:
        raise ConfigError("give either --preset or --config, not both")
    if args.preset:
        ref = importlib.resources.files("ppextremes") / "presets" / f"{args.preset}.yaml"
        if not ref.is_file():
            available = sorted(
                p.name[:-5]
                for p in (importlib.resources.files("ppextremes") / "presets").iterdir()
                if p.name.endswith(".yaml")
            )
            raise ConfigError(f"unknown preset {args.preset!r}; available: {available}")
        cfg = yaml.safe_load(ref.read_text(encoding="utf-8"))
    elif args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    else:
        raise ConfigError("a --config file or --preset is required")
    cfg = cfg or {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        node = cfg
        keys = dotted.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = yaml.safe_load(raw)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["output_dir"] = args.out
    validate_config(cfg)
    return cfg


def resolve_outdir(cfg: dict, command: str) -> Path:
    out = cfg.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or "ppextremes_out"
    outdir = Path(out) / command if cfg.get("output_dir") is None and not os.environ.get(OUTPUT_DIR_ENV) else Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _copy_config(cfg: dict, outdir: Path) -> Path:
    path = outdir / "config_used.yaml"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
    return path


def _resolve_data(cfg: dict):
    """Produce ExceedanceData from the generator block or a data file."""
    if "data" in cfg:
        d = cfg["data"]
        if "exceedances_csv" in d:
            return read_exceedances(d["exceedances_csv"], u=d.get("u"), m=d.get("m"))
        if "daily_csv" in d:
            series = load_csv(
                d["daily_csv"],
                date_column=d.get("date_column", 0),
                value_column=d.get("value_column", 1),
            )
            dcfg = DeclusterConfig(
                threshold_u=d["threshold"],
                gap_days=d.get("gap_days", 3),
                season=tuple(d["season"]) if "season" in d else None,
            )
            return decluster(series, dcfg, m=d.get("m")).data
        raise ConfigError("data block needs exceedances_csv or daily_csv")
    if "generator" in cfg:
        g = dict(cfg["generator"])
        g.setdefault("seed", cfg.get("seed", 0))
        return generate(GeneratorSpec(**g)).data
    raise ConfigError("config needs a 'data' or 'generator' block")


def _parameterization(block: dict) -> Parameterization:
    return Parameterization(
        kind=block.get("parameterization", "pp_orthogonal"),
        m_override=block.get("m_override"),
        fix_xi=block.get("fix_xi"),
    )


def _prior(block: dict, param: Parameterization) -> PriorSpec:
    kind = block.get("kind", "auto")
    if kind == "auto":
        kind = _auto_prior_kind(param)
    if kind == "pc_composite":
        pc = PcPriorConfig(lam=float(block.get("lambda", 1.0)), use_laplace_approx=bool(block.get("laplace_approx", False)))
        return PriorSpec(kind=kind, pc=pc)
    return PriorSpec(kind=kind)


def _auto_prior_kind(param: Parameterization) -> str:
    return {
        "pp_orthogonal": "jeffreys_orthogonal",
        "pp_original": "jeffreys_original",
        "gpd_orthogonal": "flat",
        "gpd_original": "flat",
    }[param.kind]


def _sampler_config(cfg: dict) -> SamplerConfig:
    s = cfg.get("sampler", {})
    return SamplerConfig(
        n_chains=s.get("chains", 4),
        n_draws=s.get("draws", 1000),
        n_burnin=s.get("burnin", 1000),
        target_accept=s.get("target_accept", 0.234),
        seed=cfg.get("seed", 0),
        jitter=s.get("jitter", 0.1),
    )


def _annualize(chains: ChainSet, annual_m: float, m_ref: float) -> ChainSet:
    if annual_m == m_ref:
        return chains
    out = chains.draws.copy()
    labels = chains.labels
    i_mu, i_s, i_xi = labels.index("mu"), labels.index("sigma"), labels.index("xi")
    flat = out.reshape(-1, out.shape[-1])
    for row in flat:
        p = rescale_blocks(OriginalParams(mu=row[i_mu], sigma=row[i_s], xi=row[i_xi]), m_ref, annual_m)
        row[i_mu], row[i_s] = p.mu, p.sigma
    return ChainSet(
        draws=out,
        raw_draws=chains.raw_draws,
        labels=labels,
        raw_labels=chains.raw_labels,
        acceptance_rates=chains.acceptance_rates,
        seeds=chains.seeds,
        proposal_scales=chains.proposal_scales,
        n_flagged=chains.n_flagged,
        flagged=chains.flagged,
        info=chains.info,
    )


# Subcommands ------------------------------------------------------------------

def cmd_simulate(cfg: dict, outdir: Path) -> list[Path]:
    if "generator" not in cfg:
        raise ConfigError("simulate needs a 'generator' block")
    g = dict(cfg["generator"])
    g.setdefault("seed", cfg.get("seed", 0))
    result = generate(GeneratorSpec(**g))
    if result.data.n_u == 0:
        raise RuntimeError("generation produced no exceedances")
    csv_path, meta_path = write_exceedances(result.data, outdir / "exceedances.csv")
    report = outdir / "generation_report.json"
    with open(report, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "intensity": result.intensity,
                "n_u": result.data.n_u,
                "n_regenerated": result.n_regenerated,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return [csv_path, meta_path, report]


def cmd_fit(cfg: dict, outdir: Path) -> list[Path]:
    data = _resolve_data(cfg)
    param = _parameterization(cfg.get("model", {}))
    prior = _prior(cfg.get("prior", {}), param)
    scfg = _sampler_config(cfg)
    chains, target = run_inference(data, param, prior, scfg)
    dcfg = cfg.get("diagnostics", {})
    report = build_report(
        chains,
        max_lag=dcfg.get("max_lag", 50),
        n_ess_points=dcfg.get("ess_points", 20),
        threshold=dcfg.get("rhat_threshold", 1.03),
        split=dcfg.get("split", True),
    )
    paths = list(chainset_to_csv(chains, outdir / "chains.csv"))
    paths += report_to_csv(report, outdir)
    summary = summarize(chains, split=dcfg.get("split", True))
    summary_to_csv(summary, outdir / "summary.csv")
    summary_to_json(summary, outdir / "summary.json")
    paths += [outdir / "summary.csv", outdir / "summary.json"]
    paths.append(plots.plot_acf(outdir / "acf.csv", outdir / "acf.svg"))
    paths.append(plots.plot_ess(outdir / "ess.csv", outdir / "ess.svg"))
    paths.append(plots.plot_rhat(outdir / "rhat.csv", outdir / "rhat.svg", threshold=report.threshold))
    return paths


def _compare_label(block: dict) -> str:
    if "label" in block:
        return block["label"]
    kind = block.get("parameterization", "pp_orthogonal")
    if kind == "pp_original":
        override = block.get("m_override")
        if override in (None, "keep"):
            return "original"
        if override == "nu_count":
            return "m_nu"
        if override == "sharkey_interval":
            return "m_interval"
        return f"m_{override}"
    return {"pp_orthogonal": "orthogonal", "gpd_orthogonal": "gpd_orthogonal", "gpd_original": "gpd_original"}[kind]


def cmd_compare(cfg: dict, outdir: Path) -> list[Path]:
    if "compare" not in cfg or "parameterizations" not in cfg["compare"]:
        raise ConfigError("compare needs compare.parameterizations")
    data = _resolve_data(cfg)
    scfg = _sampler_config(cfg)
    dcfg = cfg.get("diagnostics", {})
    threshold = dcfg.get("rhat_threshold", 1.03)
    rows_acf: list[str] = []
    rows_ess: list[str] = []
    rows_rhat: list[str] = []
    rows_summary: list[str] = []
    failures: list[str] = []
    for block in cfg["compare"]["parameterizations"]:
        label = _compare_label(block)
        try:
            param = _parameterization(block)
            prior = _prior({"kind": block.get("prior", "auto")}, param)
            chains, _ = run_inference(data, param, prior, scfg)
            report = build_report(
                chains,
                max_lag=dcfg.get("max_lag", 50),
                n_ess_points=dcfg.get("ess_points", 20),
                threshold=threshold,
                split=dcfg.get("split", True),
            )
        except Exception as exc:  # single runs may fail; the report notes it
            failures.append(f"{label}: {exc}")
            rows_summary.append(f"{label},failed,nan,nan\n")
            continue
        for k, lab in enumerate(report.labels):
            for lag, rho in enumerate(report.acf[k]):
                rows_acf.append(f"{label},{lab},{lag},{float(rho)!r}\n")
            for ln, e in report.ess_trajectory[k]:
                rows_ess.append(f"{label},{lab},{int(ln)},{float(e)!r}\n")
            xs, vals = report.rhat_curves[k]
            for x, v in zip(xs, vals):
                rows_rhat.append(f"{label},{lab},{float(x)!r},{float(v)!r}\n")
        total_ess = float(np.sum(report.ess_final))
        worst_rhat = float(np.max(report.rhat_inf))
        rows_summary.append(f"{label},ok,{total_ess!r},{worst_rhat!r}\n")

    paths = []
    headers = {
        "compare_acf.csv": ("parameterization,coord,lag,rho\n", rows_acf),
        "compare_ess.csv": ("parameterization,coord,draws,ess\n", rows_ess),
        "compare_rhat.csv": ("parameterization,coord,x,rhat\n", rows_rhat),
        "compare_summary.csv": ("parameterization,status,total_ess,worst_rhat_inf\n", rows_summary),
    }
    for name, (header, rows) in headers.items():
        p = outdir / name
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(header)
            fh.writelines(rows)
        paths.append(p)
    if failures:
        p = outdir / "compare_failures.txt"
        p.write_text("\n".join(failures) + "\n", encoding="utf-8")
        paths.append(p)
    if rows_acf:
        paths.append(plots.plot_acf(outdir / "compare_acf.csv", outdir / "compare_acf.svg"))
        paths.append(plots.plot_ess(outdir / "compare_ess.csv", outdir / "compare_ess.svg"))
        paths.append(
            plots.plot_rhat(outdir / "compare_rhat.csv", outdir / "compare_rhat.svg", threshold=threshold)
        )
    return paths


def cmd_return_levels(cfg: dict, outdir: Path) -> list[Path]:
    data = _resolve_data(cfg)
    pcfg = cfg.get("periods", {})
    periods = np.geomspace(pcfg.get("start", 2.0), pcfg.get("stop", 1e4), pcfg.get("count", 50))
    sweep = cfg.get("priors_sweep")
    if not sweep:
        sweep = [dict(cfg.get("prior", {"kind": "auto"}))]
    scfg = _sampler_config(cfg)
    annual_m = float(cfg.get("annual_m", data.m))
    rl_path = outdir / "return_levels.csv"
    with open(rl_path, "w", encoding="utf-8") as fh:
        fh.write("label,T,mean,lo,hi,relative_width\n")
        for block in sweep:
            base_model = dict(cfg.get("model", {}))
            if "fix_xi" in block:
                base_model["fix_xi"] = block["fix_xi"]
            param = _parameterization(base_model)
            prior = _prior(block, param)
            label = block.get("label") or (prior.kind if param.fix_xi is None else f"{prior.kind}_fixed_xi")
            chains, target = run_inference(data, param, prior, scfg)
            chains = _annualize(chains, annual_m, target.m_reference)
            curve = return_level_curve(chains, periods)
            for i, T in enumerate(curve.periods):
                fh.write(
                    f"{label},{float(T)!r},{float(curve.mean[i])!r},{float(curve.lo[i])!r},{float(curve.hi[i])!r},"
                    f"{float(curve.relative_width[i])!r}\n"
                )
    paths = [rl_path]
    paths.append(plots.plot_return_levels(rl_path, outdir / "return_levels.svg"))
    paths.append(plots.plot_relative_widths(rl_path, outdir / "relative_width.svg"))
    return paths


def cmd_mse(cfg: dict, outdir: Path) -> list[Path]:
    if "mse" not in cfg:
        raise ConfigError("mse needs an 'mse' block")
    mcfg = cfg["mse"]
    base_block = mcfg.get("base", {})
    base = GeneratorSpec(
        m=base_block.get("m", 1.0),
        u=base_block.get("u", 10.0),
        mu=0.0,  # replaced per grid point by the target-intensity formula
        sigma=base_block.get("sigma", 15.0),
        xi=0.0,
        seed=base_block.get("seed", cfg.get("seed", 0)),
    )
    estimators = []
    for block in mcfg.get("estimators", []):
        kind = block["kind"]
        param = (
            Parameterization(block.get("parameterization", "pp_orthogonal"), m_override=block.get("m_override"))
            if kind != "oracle"
            else None
        )
        prior = None
        if kind == "posterior_mean":
            prior = _prior({"kind": block.get("prior", "auto"), "lambda": block.get("lambda", 1.0)}, param)
        estimators.append(Estimator(name=block["name"], kind=kind, parameterization=param, prior=prior))
    report = mse_study(
        xi0_grid=mcfg.get("xi0_grid", [0.3, 0.7]),
        n_rep=mcfg.get("n_rep", 50),
        estimators=estimators,
        base=base,
        sampler=_sampler_config(cfg),
        r_target=mcfg.get("r_target", 100.0),
    )
    csv_path = outdir / "mse.csv"
    mse_report_to_csv(report, csv_path)
    return [csv_path, plots.plot_mse(csv_path, outdir / "mse.svg")]


def cmd_check_propriety(cfg: dict, outdir: Path) -> list[Path]:
    block = cfg.get("propriety", {})
    deltas = block.get("x_minus_u", [0.5, 1.0, 5.0])
    csv_path = outdir / "propriety.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("x_minus_u,numeric,analytic,rel_error\n")
        for delta in deltas:
            numeric, analytic = propriety_oracle_jeffreys(float(delta))
            rel = abs(numeric - analytic) / analytic
            fh.write(f"{delta!r},{numeric!r},{analytic!r},{rel!r}\n")
    paths = [csv_path]
    if "pc_lambda" in block:
        pc_cfg = PcPriorConfig(lam=float(block["pc_lambda"]))
        cutoffs = block.get("cutoffs", [1e3, 1e4])
        pc_path = outdir / "pc_propriety.csv"
        with open(pc_path, "w", encoding="utf-8") as fh:
            fh.write("x_minus_u,cutoff,mass\n")
            for delta in deltas:
                for cut in cutoffs:
                    mass = pc_posterior_mass(float(delta), pc_cfg, scale_cutoff=float(cut))
                    fh.write(f"{delta!r},{cut!r},{mass!r}\n")
        paths.append(pc_path)
    paths.append(plots.plot_propriety(csv_path, outdir / "propriety.svg"))
    return paths


def cmd_decluster(cfg: dict, outdir: Path) -> list[Path]:
    if "data" not in cfg or "daily_csv" not in cfg["data"]:
        raise ConfigError("decluster needs data.daily_csv")
    d = cfg["data"]
    series = load_csv(
        d["daily_csv"], date_column=d.get("date_column", 0), value_column=d.get("value_column", 1)
    )
    dcfg = DeclusterConfig(
        threshold_u=d["threshold"],
        gap_days=d.get("gap_days", 3),
        season=tuple(d["season"]) if "season" in d else None,
    )
    result = decluster(series, dcfg, m=d.get("m"))
    csv_path, meta_path = write_exceedances(
        result.data, outdir / "exceedances.csv", dates=result.cluster_dates
    )
    report_path = outdir / "preprocessing_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(result.funnel, fh, indent=2)
        fh.write("\n")
    fig = plots.plot_exceedances(csv_path, outdir / "exceedances.svg", threshold=dcfg.threshold_u)
    return [csv_path, meta_path, report_path, fig]


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "return-levels": cmd_return_levels,
    "mse": cmd_mse,
    "check-propriety": cmd_check_propriety,
    "decluster": cmd_decluster,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppextremes",
        description="Bayesian Poisson-process inference for univariate extremes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--preset", help="name of a shipped preset config")
        p.add_argument("--out", help=f"output directory (default: ${OUTPUT_DIR_ENV} or ./ppextremes_out/<cmd>)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a dotted config key")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        outdir = resolve_outdir(cfg, args.command)
        _copy_config(cfg, outdir)
        written = _COMMANDS[args.command](cfg, outdir)
        missing = [str(p) for p in written if not Path(p).exists()]
        if missing:
            raise RuntimeError(f"outputs not written: {missing}")
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
