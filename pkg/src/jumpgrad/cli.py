"""Command-line entry points: run experiments, certify rates, presets.

Outputs per run: trajectories CSV, a rate certificate in plain text and
key = value form, a summary, and a rendered figure next to the CSVs.
The default output directory is $JUMPGRAD_OUT (falling back to
./jumpgrad_out); --out overrides it.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

import click
import numpy as np

from .config import ConfigError, ExperimentConfig, dump_config, effective_dict, load_config
from .distributed import (assemble_distributed_system, default_initial_state,
                          synchronized_initial_state)
from .ensemble import (EnsembleConfig, fit_decay_rate, plateau_level, run_ensemble,
                       write_trajectories_csv)
from .figures import render_ensemble_figure
from .presets import PRESET_NAMES, preset_configs
from .quadratic import min_eigenvalue, optimal_solution
from .stability import theorem_rates

__all__ = ["main", "run_experiment", "certify_config"]

ENV_OUT = "JUMPGRAD_OUT"


def _resolve_out(out: str | None) -> Path:
    path = Path(out or os.environ.get(ENV_OUT) or "jumpgrad_out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_overrides(cfg: ExperimentConfig, seed: int | None,
                     paths: int | None) -> ExperimentConfig:
    if seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=seed)
    if paths is not None:
        cfg = dataclasses.replace(cfg, n_paths=paths)
    return cfg


def _initial_state(system, cfg: ExperimentConfig) -> np.ndarray:
    if cfg.initial_state == "default":
        return default_initial_state(system, cfg.master_seed)
    x0 = np.asarray(cfg.initial_state["x0"], dtype=float)
    z0 = cfg.initial_state.get("z0", "synchronized")
    if z0 == "synchronized":
        return synchronized_initial_state(system, x0)
    lay = system.layout
    u0 = np.empty(lay.dim)
    u0[:lay.d] = x0
    for c, zc in enumerate(z0):
        u0[lay.z_slice(c)] = zc
    return u0


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(float(x)) for x in v) + "]"
    return str(v)


def _certificate_lines(cert, problem) -> tuple[str, str]:
    """(plain text, key = value) renderings of a rate certificate."""
    kv = cert.as_dict()
    kv_text = "".join(f"{k} = {_fmt(v)}\n" for k, v in kv.items())

    lines = ["rate certificate", "----------------"]
    if problem.n == 1:
        lines.append("no channels; nominal rate 2*lambda_min(Q) = "
                     f"{2.0 * cert.lambda_min_Q:.6g}")
    else:
        lines.append(f"sufficient event rate lambda_s = {cert.lambda_s:.6g} "
                     "(reference convention)")
        if cert.lambda_d is not None:
            lines.append(f"rate for decay target beta = {cert.beta_target:.6g}: "
                         f"lambda_d = {cert.lambda_d:.6g}")
        lines.append(f"exact-convention thresholds: lambda_s = {cert.lambda_s_exact:.6g}"
                     + (f", lambda_d = {cert.lambda_d_exact:.6g}"
                        if cert.lambda_d_exact is not None else ""))
        lines.append(f"norm-bound thresholds: lambda_s = {cert.lambda_s_normbound:.6g}"
                     + (f", lambda_d = {cert.lambda_d_normbound:.6g}"
                        if cert.lambda_d_normbound is not None else ""))
        lines.append(f"ingredients: a_max = {cert.a_max:.6g}, "
                     f"rho = {_fmt(kv['rho'])}, gamma_prime = {cert.gamma_prime:.6g}, "
                     f"K_bound = {cert.K_bound:.6g}")
        lines.append(f"lambda_min(Q) = {cert.lambda_min_Q:.6g} "
                     f"(nominal decay rate {2.0 * cert.lambda_min_Q:.6g})")
        lines.append("worst-case R (reported coupling):")
        lines.append(np.array2string(cert.R_const, precision=4, max_line_width=100))
    return "\n".join(lines) + "\n", kv_text


def certify_config(cfg: ExperimentConfig, out_dir: Path | None = None) -> tuple:
    """Compute the certificate for a configuration; no simulation."""
    cert = theorem_rates(cfg.problem, cfg.channels, rho=cfg.rho,
                         beta=cfg.beta_target, gamma=cfg.gamma)
    text, kv = _certificate_lines(cert, cfg.problem)
    if out_dir is not None:
        (out_dir / "certificate.txt").write_text(text)
        (out_dir / "certificate.kv").write_text(kv)
    return cert, text


def run_experiment(cfg: ExperimentConfig, out_dir, csv_stem: str = "trajectories",
                   include_sem: bool = False, include_paths: bool = False,
                   figure: bool = True) -> dict:
    """Simulate one configuration and write all report files.

    Returns the in-memory results (stats, certificate, fit, plateau,
    file paths) so callers and tests can inspect them directly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = cfg.problem
    cert, cert_text = certify_config(cfg, out_dir)
    y_star = optimal_solution(problem)
    lmin = min_eigenvalue(problem)

    system = assemble_distributed_system(problem, cfg.channels)
    x0 = _initial_state(system, cfg)
    stats = run_ensemble(system,
                         EnsembleConfig(n_paths=cfg.n_paths, path_config=cfg.solver,
                                        master_seed=cfg.master_seed),
                         x0=x0)
    v0 = stats.mean[0]
    reference = v0 * np.exp(-2.0 * lmin * (stats.grid - stats.grid[0]))

    csv_path = out_dir / f"{csv_stem}.csv"
    write_trajectories_csv(stats, csv_path, include_paths=include_paths,
                           include_sem=include_sem,
                           reference=("reference", reference))

    t0, T = cfg.solver.t0, cfg.solver.horizon
    window = (t0 + 0.1 * (T - t0), t0 + 0.8 * (T - t0))
    try:
        beta_hat = fit_decay_rate(stats, window)
    except ValueError:
        beta_hat = None
    plateau = plateau_level(stats, 0.2)

    summary = {
        "label": cfg.label,
        "lambda_min_Q": lmin,
        "y_star": y_star,
        "lambda_s": cert.lambda_s,
        "lambda_d": cert.lambda_d,
        "beta_target": cert.beta_target,
        "gamma_prime": cert.gamma_prime,
        "beta_hat": beta_hat,
        "fit_window": list(window),
        "plateau_tail20": plateau,
        "V_mean_initial": v0,
        "V_mean_final": stats.mean[-1],
        "jensen_first_moment": stats.jensen_lhs,
        "jensen_root_second_moment": stats.jensen_rhs,
        "n_paths": cfg.n_paths,
        "T": T,
        "h": cfg.solver.step,
        "master_seed": cfg.master_seed,
    }
    summary_text = "".join(f"{k} = {_fmt(v)}\n" for k, v in summary.items())
    (out_dir / "summary.txt").write_text(summary_text)

    fig_path = None
    if figure:
        fig_path = out_dir / f"{csv_stem}.png"
        render_ensemble_figure(
            [{"label": cfg.label, "grid": stats.grid, "mean": stats.mean,
              "low": stats.band_low, "high": stats.band_high}],
            fig_path, title=cfg.label,
            reference=("reference exp(-2 lambda_min t)", stats.grid, reference))

    return {"stats": stats, "certificate": cert, "certificate_text": cert_text,
            "summary": summary, "csv": csv_path, "figure": fig_path,
            "reference": reference}


def _run_preset(name: str, out_dir: Path, seed: int | None, paths: int | None,
                include_sem: bool, include_paths: bool) -> list[dict]:
    configs = [_apply_overrides(c, seed, paths) for c in preset_configs(name)]
    results = []
    curves = []
    summaries = []
    for cfg in configs:
        res = run_experiment(cfg, out_dir, csv_stem=f"trajectories_{cfg.label}",
                             include_sem=include_sem, include_paths=include_paths,
                             figure=False)
        results.append(res)
        stats = res["stats"]
        curves.append({"label": cfg.label, "grid": stats.grid, "mean": stats.mean,
                       "low": stats.band_low, "high": stats.band_high})
        summaries.append("".join(f"{k} = {_fmt(v)}\n"
                                 for k, v in res["summary"].items()))
    ref = results[0]["reference"]
    render_ensemble_figure(curves, out_dir / "trajectories.png", title=name,
                           reference=("reference exp(-2 lambda_min t)",
                                      results[0]["stats"].grid, ref))
    (out_dir / "summary.txt").write_text("\n".join(summaries))
    return results


@click.group()
def main():
    """Simulate and certify distributed gradient descent with Poisson
    jump communication."""


_out_opt = click.option("--out", default=None, metavar="DIR",
                        help=f"output directory (default ${ENV_OUT} or ./jumpgrad_out)")
_seed_opt = click.option("--seed", default=None, type=click.IntRange(0, 2**64 - 1),
                         help="override the ensemble master seed")
_paths_opt = click.option("--paths", default=None, type=click.IntRange(1),
                          help="override the number of sample paths")
_dump_opt = click.option("--dump-effective-config", is_flag=True,
                         help="print the resolved configuration as JSON and exit")
_sem_opt = click.option("--sem", "include_sem", is_flag=True,
                        help="add a standard-error column to the CSV")
_perpath_opt = click.option("--per-path", "include_paths", is_flag=True,
                            help="add one CSV column per sample path")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@_out_opt
@_seed_opt
@_paths_opt
@_dump_opt
@_sem_opt
@_perpath_opt
def run(config, out, seed, paths, dump_effective_config, include_sem, include_paths):
    """Simulate the configured system and write all reports."""
    try:
        cfg = _apply_overrides(load_config(config), seed, paths)
        if dump_effective_config:
            click.echo(dump_config(cfg))
            return
        out_dir = _resolve_out(out)
        res = run_experiment(cfg, out_dir, include_sem=include_sem,
                             include_paths=include_paths)
    except (ConfigError, ValueError, RuntimeError) as err:
        raise click.ClickException(str(err))
    click.echo(f"wrote {res['csv']}")
    click.echo(res["certificate_text"])


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@_out_opt
@_dump_opt
def certify(config, out, dump_effective_config):
    """Compute the rate certificate only (no simulation)."""
    try:
        cfg = load_config(config)
        if dump_effective_config:
            click.echo(dump_config(cfg))
            return
        out_dir = _resolve_out(out)
        _, text = certify_config(cfg, out_dir)
    except (ConfigError, ValueError) as err:
        raise click.ClickException(str(err))
    click.echo(text)


@main.command()
@click.argument("name", type=click.Choice(PRESET_NAMES))
@_out_opt
@_seed_opt
@_paths_opt
@_dump_opt
@_sem_opt
@_perpath_opt
def preset(name, out, seed, paths, dump_effective_config, include_sem, include_paths):
    """Run a bundled experiment preset."""
    try:
        if dump_effective_config:
            configs = [_apply_overrides(c, seed, paths) for c in preset_configs(name)]
            click.echo(json.dumps([effective_dict(c) for c in configs], indent=2))
            return
        out_dir = _resolve_out(out)
        results = _run_preset(name, out_dir, seed, paths, include_sem, include_paths)
    except (ConfigError, ValueError, RuntimeError) as err:
        raise click.ClickException(str(err))
    click.echo(f"wrote {len(results)} run(s) to {out_dir}")
    click.echo(results[0]["certificate_text"])


if __name__ == "__main__":
    main()
