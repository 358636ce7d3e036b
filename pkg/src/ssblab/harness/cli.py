"""Command-line entry point: one subcommand per experiment kind.

Exit codes: 0 = all acceptance thresholds passed, 1 = any FAIL,
2 = configuration error.

Flags override config-file values only when given explicitly; each
subcommand has sensible defaults for running without a config file.
"""

from __future__ import annotations

import sys

import click

from .config import ExperimentConfig, ConfigError, load
from .runs import run

# defaults used when no config file is supplied
_DEFAULTS = {
    "db-check": dict(beta=1.0, d=1, L_list=[4, 6, 8]),
    "metastability-scan": dict(beta=float("inf"), d=1,
                               L_list=[4, 6, 8, 10, 12]),
    "kt-scan": dict(M_max=2, L_list=[4, 6, 8]),
    "goldstone-scan": dict(M_max=1, L_list=[4, 6, 8]),
    "lr-cone": dict(beta=2.0, t=1.0, v_tildes=[1, 2, 4, 8], L_list=[12]),
    "survival": dict(beta=2.0, delta_a=0.2, t_max=1e6,
                     L_list=[4, 6, 8, 10, 12]),
    "mc-survival": dict(beta=0.5, d=2, delta_m=0.5, trials=50,
                        L_list=[8, 16, 32, 64]),
}


def _execute(kind: str, config_path, out, seed, **overrides):
    try:
        if config_path:
            config = load(config_path)
            if config.kind != kind:
                raise ConfigError(
                    f"config is for kind {config.kind!r}, invoked as {kind!r}")
        else:
            config = ExperimentConfig(kind=kind, **_DEFAULTS[kind])
        if out:
            config.out = out
        if seed is not None:
            config.seed = seed
        for name, value in overrides.items():
            if value is not None:
                setattr(config, name, value)
        config.validate()
        record = run(config)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    click.echo(record.summary(), nl=False)
    sys.exit(0 if record.passed else 1)


def _common(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      help="YAML experiment config")(fn)
    fn = click.option("--out", type=click.Path(), help="output directory")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--threads", type=int, default=1,
                      help="reserved; computations are single-threaded")(fn)
    return fn


@click.group()
def main():
    """Dissipative symmetry-breaking toolbox."""


def _beta(value):
    if value is None:
        return None
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return float("inf")
    return float(value)


def _sizes(sizes):
    if sizes is None:
        return None
    return [int(s) for s in str(sizes).split(",") if s]


@main.command("db-check")
@_common
@click.option("--beta", default=None)
@click.option("--d", type=int, default=None)
@click.option("--sizes", default=None, help="comma-separated L values")
def db_check(config_path, out, seed, threads, beta, d, sizes):
    """Detailed-balance certification of the heat-bath generator."""
    _execute("db-check", config_path, out, seed, beta=_beta(beta), d=d,
             L_list=_sizes(sizes))


@main.command("metastability-scan")
@_common
@click.option("--beta", default=None)
@click.option("--sizes", default=None)
def metastability_scan(config_path, out, seed, threads, beta, sizes):
    """Tilted-state metastability and reversibility decay scan."""
    _execute("metastability-scan", config_path, out, seed, beta=_beta(beta),
             L_list=_sizes(sizes))


@main.command("kt-scan")
@_common
@click.option("--m-max", "m_max", type=int, default=None)
@click.option("--sizes", default=None)
def kt_scan(config_path, out, seed, threads, m_max, sizes):
    """Dressed-state construction, lemma inequalities, reversibility decay."""
    _execute("kt-scan", config_path, out, seed, M_max=m_max,
             L_list=_sizes(sizes))


@main.command("goldstone-scan")
@_common
@click.option("--m-max", "m_max", type=int, default=None)
@click.option("--sizes", default=None)
def goldstone_scan(config_path, out, seed, threads, m_max, sizes):
    """Twisted-state defect decay and order-parameter winding."""
    _execute("goldstone-scan", config_path, out, seed, M_max=m_max,
             L_list=_sizes(sizes))


@main.command("lr-cone")
@_common
@click.option("--beta", default=None)
@click.option("--t", type=float, default=None)
@click.option("--v-tildes", "v_tildes", default=None)
@click.option("--sizes", default=None)
def lr_cone(config_path, out, seed, threads, beta, t, v_tildes, sizes):
    """Causal-cone truncation defect versus cone speed."""
    vt = [float(v) for v in v_tildes.split(",")] if v_tildes else None
    _execute("lr-cone", config_path, out, seed, beta=_beta(beta), t=t,
             v_tildes=vt, L_list=_sizes(sizes))


@main.command("survival")
@_common
@click.option("--beta", default=None)
@click.option("--delta-a", "delta_a", type=float, default=None)
@click.option("--t-max", "t_max", type=float, default=None)
@click.option("--sizes", default=None)
def survival(config_path, out, seed, threads, beta, delta_a, t_max, sizes):
    """Exact survival-time scan for tilted states."""
    _execute("survival", config_path, out, seed, beta=_beta(beta),
             delta_a=delta_a, t_max=t_max, L_list=_sizes(sizes))


@main.command("mc-survival")
@_common
@click.option("--beta", default=None)
@click.option("--d", type=int, default=None)
@click.option("--delta-m", "delta_m", type=float, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--sweep-cap", "sweep_cap", type=int, default=None)
@click.option("--sizes", default=None)
def mc_survival(config_path, out, seed, threads, beta, d, delta_m, trials,
                sweep_cap, sizes):
    """Monte Carlo survival-time scaling on large tori."""
    _execute("mc-survival", config_path, out, seed, beta=_beta(beta), d=d,
             delta_m=delta_m, trials=trials, sweep_cap=sweep_cap,
             L_list=_sizes(sizes))


if __name__ == "__main__":
    main()
