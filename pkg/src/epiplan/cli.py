"""Command-line entry points: estimation, validation, experiment protocols,
synthetic data generation, and the HTTP service.

Every subcommand reads a JSON config (--config), honors --seed /
--replications overrides, and writes CSV tables plus a report.json under
--out-dir.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import click

from .bayes import PriorSpec, default_priors
from .core import (Dataset, GsirParams, RegionMeta, RegionState, SeedSpec,
                   derive_rng, load_dataset, save_dataset)
from .cost import TradeoffWeight, weight_grid
from .gsir import reproduction_numbers
from .harness import (ExperimentSpec, comparison_to_csv, fit_posterior,
                      leave_one_out_cv, policy_comparison, sensitivity_suite,
                      synth_generate, temporal_validation, write_report)
from .observe import DelaySpec, reconstruct_states
from .planners import GridRound, GridSchedule, default_grid_schedule


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _seed_spec(config: dict, override: int | None) -> SeedSpec:
    seed = override if override is not None else config.get("seed", 0)
    return SeedSpec(master_seed=int(seed))


def _priors(config: dict) -> PriorSpec:
    spec = config.get("priors")
    if spec is None:
        return default_priors()
    return PriorSpec(
        gamma_beta_params=(spec["gamma"]["a"], spec["gamma"]["b"]),
        beta_gamma_params=tuple((e["a"], e["b"]) for e in spec["betas"]))


def _delay(config: dict) -> DelaySpec:
    return DelaySpec(delay_days=int(config.get("delay_D", 9)))


def _weights(config: dict) -> list[TradeoffWeight]:
    if "weights" in config:
        return [TradeoffWeight(omega=w) for w in config["weights"]]
    return weight_grid()


def _truth(config: dict) -> GsirParams:
    spec = config.get("truth")
    if spec is None:
        raise click.UsageError("config must provide a 'truth' block "
                               "with gamma and betas")
    return GsirParams(gamma=spec["gamma"], betas=tuple(spec["betas"]))


def _grid_schedule(config: dict) -> GridSchedule:
    rounds = config.get("planner", {}).get("grid_rounds")
    if rounds is None:
        return default_grid_schedule()
    return GridSchedule(rounds=tuple(
        GridRound(windows=tuple(tuple(float(x) for x in w)
                                for w in rnd["windows"]),
                  relative=bool(rnd.get("relative", False)))
        for rnd in rounds))


def _dataset(config: dict) -> Dataset:
    data_dir = config.get("data_dir")
    if data_dir is None:
        raise click.UsageError("config must provide 'data_dir'")
    return load_dataset(data_dir,
                        horizon=config.get("horizon"),
                        decision_interval=config.get("decision_interval", 7))


def _out(out_dir: str | None) -> Path:
    out = Path(out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


config_opt = click.option("--config", "config_path", type=click.Path(),
                          default=None, help="JSON config file.")
seed_opt = click.option("--seed", type=int, default=None,
                        help="Master seed override.")
out_opt = click.option("--out-dir", type=click.Path(), default=None,
                       help="Output directory.")
reps_opt = click.option("--replications", type=int, default=None,
                        help="Replication count override.")


@click.group()
def main():
    """Model-based epidemic intervention planning."""


@main.command()
@config_opt
@seed_opt
@out_opt
def estimate(config_path, seed, out_dir):
    """Fit the transition-model posterior from a dataset directory."""
    config = _load_config(config_path)
    dataset = _dataset(config)
    series_len = len(dataset.regions[0][1])
    posterior = fit_posterior(dataset, until_day=series_len,
                              delay=_delay(config), priors=_priors(config))
    out = _out(out_dir)
    (out / "posterior.json").write_text(posterior.to_json())
    rng = derive_rng(_seed_spec(config, seed), (1,))
    r0 = reproduction_numbers(posterior, 10000, rng)
    params = posterior.mean_params()
    report = {
        "posterior": json.loads(posterior.to_json()),
        "mean_params": {"gamma": params.gamma, "betas": list(params.betas)},
        "reproduction_numbers": [{"mean": m, "sd": s} for m, s in r0],
    }
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True))
    click.echo(f"posterior mean gamma={params.gamma:.4f} "
               f"betas={tuple(round(b, 4) for b in params.betas)}")


@main.command()
@config_opt
@seed_opt
@out_opt
@reps_opt
def validate(config_path, seed, out_dir, replications):
    """Temporal validation: fit on a prefix, check prediction-band coverage."""
    config = _load_config(config_path)
    dataset = _dataset(config)
    reps = replications or config.get("replications", 1000)
    rng = derive_rng(_seed_spec(config, seed), (2,))
    report = temporal_validation(
        dataset,
        train_until=config.get("train_until", 12 + _delay(config).delay_days),
        predict_until=config.get("predict_until", dataset.horizon),
        replications=reps, rng=rng, delay=_delay(config),
        priors=_priors(config))
    out = _out(out_dir)
    lines = ["region_id,day,lower,mean,upper"]
    for rid, bands in sorted(report["regions"].items()):
        for day, lo, mean, hi in zip(bands["days"], bands["lower"],
                                     bands["mean"], bands["upper"]):
            lines.append(f"{rid},{day},{lo:.3f},{mean:.3f},{hi:.3f}")
    (out / "bands.csv").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True))
    for rid, bands in sorted(report["regions"].items()):
        click.echo(f"{rid}: coverage {bands['coverage']:.3f}")


def _experiment_spec(config: dict, seed_spec: SeedSpec,
                     replications: int | None) -> ExperimentSpec:
    truth = _truth(config)
    start = config.get("start_state")
    if start is not None:
        state = RegionState(**start)
        gdp = config.get("gdp_annual", 1.0)
    else:
        dataset = _dataset(config)
        meta, series = dataset.regions[0]
        states = reconstruct_states(series, meta, _delay(config))
        day = min(config.get("start_day", 12), len(states))
        state = states[day - 1]
        gdp = meta.gdp_annual
    return ExperimentSpec(
        name=config.get("name", "comparison"),
        truth=truth, start_state=state,
        gdp_annual=config.get("gdp_annual", gdp),
        start_day=config.get("start_day", 12),
        horizon=config.get("horizon", 120),
        decision_interval=config.get("decision_interval", 7),
        replications=replications or config.get("replications", 100),
        planner_rollouts=config.get("planner", {}).get("rollouts", 50),
        environment=config.get("environment", "gsir"),
        tolerance_cap=config.get("tolerance_cap", 2000.0),
        seed=seed_spec)


@main.command()
@config_opt
@seed_opt
@out_opt
@reps_opt
def compare(config_path, seed, out_dir, replications):
    """Policy comparison: proposed weight sweep vs. baseline families."""
    config = _load_config(config_path)
    spec = _experiment_spec(config, _seed_spec(config, seed), replications)
    report = policy_comparison(spec, _weights(config),
                               _grid_schedule(config))
    write_report(report, _out(out_dir))
    click.echo(f"wrote {len(report['rows'])} policy rows")


@main.command()
@config_opt
@seed_opt
@out_opt
@reps_opt
def cv(config_path, seed, out_dir, replications):
    """Leave-one-out cross-validation over regions."""
    config = _load_config(config_path)
    dataset = _dataset(config)
    rng = derive_rng(_seed_spec(config, seed), (5,))
    report = leave_one_out_cv(
        dataset,
        train_until=config.get("train_until",
                               len(dataset.regions[0][1])),
        predict_day=config.get("predict_day", dataset.horizon),
        rng=rng, delay=_delay(config), priors=_priors(config),
        start_day=config.get("start_day", 12),
        replications=replications or config.get("replications", 200))
    out = _out(out_dir)
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True))
    click.echo(f"mean error ratio {report['mean_error_ratio']:.4f}")


@main.command()
@config_opt
@seed_opt
@out_opt
@reps_opt
def sensitivity(config_path, seed, out_dir, replications):
    """Rerun the comparison under robustness variations."""
    config = _load_config(config_path)
    spec = _experiment_spec(config, _seed_spec(config, seed), replications)
    variations = config.get("variations",
                            [{"name": "base"},
                             {"name": "seir", "environment": "gseir"}])
    report = sensitivity_suite(spec, _weights(config),
                               _grid_schedule(config), variations)
    out = _out(out_dir)
    for name, sub in report.items():
        safe = name.replace("/", "_")
        (out / f"comparison_{safe}.csv").write_text(comparison_to_csv(sub))
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True))
    click.echo(f"ran {len(report)} variations")


@main.command()
@config_opt
@seed_opt
@out_opt
def synth(config_path, seed, out_dir):
    """Generate a synthetic surveillance dataset."""
    config = _load_config(config_path)
    truth = _truth(config)
    regions = [RegionMeta(**r) for r in config.get(
        "regions", [{"region_id": "r1", "population": 100000,
                     "gdp_annual": 1.0e6}])]
    horizon = config.get("horizon", 120)
    actions_spec = config.get("actions", {"constant": 1})
    if "constant" in actions_spec:
        level = int(actions_spec["constant"])
        script = lambda rid, day: level
    elif "cycle" in actions_spec:
        cycle = [int(a) for a in actions_spec["cycle"]]
        script = lambda rid, day: cycle[(day - 1) % len(cycle)]
    else:
        per_region = {rid: [int(a) for a in seq]
                      for rid, seq in actions_spec["per_region"].items()}
        script = per_region
    rng = derive_rng(_seed_spec(config, seed), (6,))
    dataset = synth_generate(
        truth, regions, horizon, script, _delay(config), rng,
        initial_infected=config.get("initial_infected", 20),
        decision_interval=config.get("decision_interval", 7),
        mode=config.get("mode", "fixed_delay"))
    out = _out(out_dir)
    save_dataset(dataset, out)
    click.echo(f"wrote {len(regions)} regions x {horizon} days to {out}")


@main.command()
@config_opt
@click.option("--state-dir", type=click.Path(), default="./service-state",
              help="Directory for session snapshots.")
@click.option("--port", type=int, default=None,
              help="Listen port (defaults to $PORT or 8000).")
@click.option("--host", default="127.0.0.1")
def serve(config_path, state_dir, port, host):
    """Run the decision service."""
    import uvicorn

    from .service import create_app
    del config_path  # the service is configured per session
    app = create_app(state_dir=state_dir)
    port = port if port is not None else int(os.environ.get("PORT", "8000"))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
