"""Command-line front end.

Single binary with subcommands mirroring the library surface:

  solve    run the full detection pipeline (oracle or file -> solver ->
           distiller -> reports)
  pbc      the analytic k-setting inequality toolkit
  witness  thermal collective-variance witness curves from exact
           diagonalization
  oracle   generate datasets from the built-in quantum oracles
  bound    recompute the classical bound of a stored inequality

Exit codes for ``solve``: 0 = a local-variable model was found, 10 = the
descent saturated and the distilled inequality is violated by the data,
20 = inconclusive (budget exhausted, or saturated without a certified
violation), >= 64 = usage or I/O error.  The environment variable
``BELLFORGE_THREADS`` caps the worker count of the sampling kernels.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time

import click
import numpy as np

from . import __version__, dataio, distill, oracle, pbc
from .detector import BellNonlocalityDetector
from .scenario import ScenarioError
from .solver import ConvergedLocal, Inconclusive, SaturatedNonlocal

EXIT_LOCAL = 0
EXIT_VIOLATED = 10
EXIT_INCONCLUSIVE = 20
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_IO = 66


def _apply_thread_cap():
    cap = os.environ.get("BELLFORGE_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise click.UsageError(f"BELLFORGE_THREADS={cap!r} is not an integer")
    os.environ.setdefault("OMP_NUM_THREADS", str(n))
    try:
        import numba
        numba.set_num_threads(n)
    except Exception:
        pass


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise click.UsageError(f"config {path} must be a JSON object")
    return obj


def _merged(config, **flags):
    """Config-file values with explicitly passed flags taking precedence."""
    out = dict(config)
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out


def _tagged(value, source):
    return None if value is None else {"value": value, "source": source}


@click.group()
@click.version_option(version=__version__, prog_name="bellforge")
def cli():
    """Detect many-body Bell nonlocality by solving inverse Ising problems."""
    _apply_thread_cap()


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _oracle_dataset(cfg):
    name = cfg.get("oracle")
    theta = cfg.get("theta")
    if name == "bell_pair":
        return oracle.bell_pair_data(math.pi / 4 if theta is None else theta)
    if name in ("tfim", "qhaf"):
        n = cfg.get("n_sites")
        if n is None:
            raise click.UsageError(f"oracle {name!r} needs --n-sites")
        lattice = cfg.get("lattice", "square" if name == "tfim" else "chain")
        system = oracle.SpinSystem(n_sites=int(n), lattice=lattice, model=name,
                                   gamma=cfg.get("gamma"))
        temperature = cfg.get("temperature")
        spec = (oracle.QuantumStateSpec("ground") if temperature is None
                else oracle.QuantumStateSpec("thermal", float(temperature)))
        handle = oracle.ed_solve(system, spec)
        if name == "tfim":
            axes = oracle.tfim_axes(math.pi / 8 if theta is None else theta)
        else:
            k = int(cfg.get("k", 4))
            axes = oracle.coplanar_axes(k, math.pi / k if theta is None
                                        else theta)
        return oracle.two_point_dataset(handle, axes,
                                        max_distance=cfg.get("max_distance"))
    raise click.UsageError(
        f"unknown oracle {name!r} (choose bell_pair, tfim or qhaf)")


def run_pipeline(cfg: dict):
    """Execute ingest -> solve -> distill -> report; returns (report, code)."""
    data_path = cfg.get("data")
    if (data_path is None) == (cfg.get("oracle") is None):
        raise click.UsageError("exactly one data source: --data or --oracle")
    dataset = (dataio.load_dataset(data_path) if data_path
               else _oracle_dataset(cfg))

    detector = BellNonlocalityDetector(
        step_size=float(cfg.get("step", 1e-2)),
        max_iters=int(cfg.get("max_iters", 5000)),
        eta=float(cfg.get("eta", 0.05)),
        engine=cfg.get("engine", "exact"),
        seed=int(cfg.get("seed", 0)),
        bound_method=cfg.get("bound_method", "exhaustive"))
    t0 = time.perf_counter()
    detector.fit(dataset)
    wall = time.perf_counter() - t0

    outcome = detector.outcome_
    ineq = detector.inequality_
    if isinstance(outcome, ConvergedLocal):
        variant, code = "ConvergedLocal", EXIT_LOCAL
    elif isinstance(outcome, SaturatedNonlocal):
        variant = "SaturatedNonlocal"
        code = EXIT_VIOLATED if (ineq is not None and ineq.violated
                                 and ineq.bound_certified) else EXIT_INCONCLUSIVE
    else:
        variant, code = "Inconclusive", EXIT_INCONCLUSIVE

    trace = outcome.trace
    report = {
        "outcome": variant,
        "exit_code": code,
        "trace_summary": {
            "iterations": len(trace),
            "final_grad_norm_sq": _tagged(
                float(trace.grad_norm_sq[-1]) if len(trace) else None, "solver"),
            "wall_time_s": _tagged(wall, "solver"),
        },
        "environment": {"seed": int(cfg.get("seed", 0)),
                        "engine": cfg.get("engine", "exact"),
                        "version": __version__},
        "data_source": data_path if data_path else f"oracle:{cfg.get('oracle')}",
    }
    if isinstance(outcome, ConvergedLocal):
        report["max_residual"] = _tagged(
            float(np.max(np.abs(outcome.residuals))), "solver")
    if ineq is not None:
        report["inequality"] = dataio.inequality_report(
            ineq, frustrated=detector.frustrated_)
        report["classical_bound"] = _tagged(ineq.classical_bound, "bound-method")
        report["quantum_value"] = _tagged(ineq.quantum_value, "dataset")
        report["verdict"] = "violated" if ineq.violated else "not_violated"

    out_dir = cfg.get("out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        dataio.save_dataset(dataset, os.path.join(out_dir, "dataset.json"))
        dataio.save_report(
            {"iterations": list(map(int, trace.iterations)),
             "grad_norm_sq": list(map(float, trace.grad_norm_sq)),
             "coupling_norm": list(map(float, trace.coupling_norms))},
            os.path.join(out_dir, "trace.json"))
        if ineq is not None:
            dataio.save_report(report["inequality"],
                               os.path.join(out_dir, "inequality.json"))
        dataio.save_report(report, os.path.join(out_dir, "run_report.json"))
    return report, code


@cli.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config; flags override its keys.")
@click.option("--data", type=click.Path(), default=None,
              help="Dataset file (exclusive with --oracle).")
@click.option("--oracle", "oracle_name",
              type=click.Choice(["bell_pair", "tfim", "qhaf"]), default=None)
@click.option("--theta", type=float, default=None)
@click.option("--k", type=int, default=None)
@click.option("--n-sites", type=int, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--engine", type=click.Choice(["exact", "mc"]), default=None)
@click.option("--bound-method",
              type=click.Choice(["exhaustive", "symmetric", "anneal"]),
              default=None)
@click.option("--max-iters", type=int, default=None)
@click.option("--step", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Output directory for report files.")
def solve(config_path, data, oracle_name, theta, k, n_sites, gamma,
          temperature, engine, bound_method, max_iters, step, seed, out):
    """Fit a local-variable model; distill a Bell inequality on saturation."""
    cfg = _merged(_load_config(config_path), data=data, oracle=oracle_name,
                  theta=theta, k=k, n_sites=n_sites, gamma=gamma,
                  temperature=temperature, engine=engine,
                  bound_method=bound_method, max_iters=max_iters, step=step,
                  seed=seed, out=out)
    report, code = run_pipeline(cfg)
    click.echo(json.dumps(report, indent=1))
    return code


# ---------------------------------------------------------------------------
# pbc
# ---------------------------------------------------------------------------

@cli.command("pbc")
@click.option("--n-sites", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--theta", type=float, default=None)
@click.option("--bruteforce", is_flag=True,
              help="Verify the classical bound exhaustively (N*k <= 24).")
@click.option("--out", type=click.Path(), default=None)
def pbc_cmd(n_sites, k, theta, bruteforce, out):
    """Closed forms of the k-setting inequality for N sites."""
    spec = pbc.PbcSpec(n_sites=n_sites, n_settings=k, theta=theta)
    fn = pbc.angle_functions(k, spec.theta)
    report = {
        "n_sites": n_sites, "k": k, "theta": spec.theta,
        "classical_bound": 2.0 * n_sites * (k - 1),
        "max_quantum_violation": pbc.max_quantum_violation(n_sites, k),
        "witness_beta": pbc.witness_beta(k),
        "entanglement_bound": pbc.ENTANGLEMENT_BOUND,
        "F": fn.f, "F_x": fn.f_x, "F_y": fn.f_y, "F_xy": fn.f_xy, "G": fn.g,
        "mprime_spectrum": list(pbc.mprime_spectrum(k)),
    }
    if bruteforce:
        report["bruteforce_minimum"] = pbc.pbc_bruteforce_bound(spec)
    if out:
        dataio.save_report(report, out)
    click.echo(json.dumps(report, indent=1))
    return 0


# ---------------------------------------------------------------------------
# witness
# ---------------------------------------------------------------------------

def emit_witness_curve(system: oracle.SpinSystem, temperatures, k: int):
    """Rows (T, variance/site, beta_k, entanglement bound, verdict)."""
    beta = pbc.witness_beta(k)
    rows = []
    for t in temperatures:
        handle = oracle.ed_solve(system, oracle.QuantumStateSpec("thermal", t))
        var = oracle.collective_variance(handle)
        rows.append((t, var, beta, pbc.ENTANGLEMENT_BOUND,
                     pbc.witness_verdict(var, k)))
    return rows


@cli.command()
@click.option("--n-sites", type=int, required=True)
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--lattice", type=click.Choice(["chain", "square"]),
              default="chain", show_default=True)
@click.option("--t-grid", default="0.05:2.0:0.05", show_default=True,
              help="Temperature grid start:stop:step (inclusive).")
@click.option("--out", type=click.Path(), default=None)
def witness(n_sites, k, lattice, t_grid, out):
    """Thermal collective-variance witness curve for the Heisenberg model."""
    try:
        start, stop, step = (float(x) for x in t_grid.split(":"))
    except ValueError:
        raise click.UsageError("--t-grid must be start:stop:step")
    if step <= 0 or stop < start:
        raise click.UsageError("--t-grid must be increasing")
    temperatures = np.arange(start, stop + 0.5 * step, step)
    system = oracle.SpinSystem(n_sites=n_sites, lattice=lattice, model="qhaf")
    rows = emit_witness_curve(system, temperatures, k)
    table = dataio.witness_curve_table(rows)
    if out:
        dataio._atomic_write(out, table)
    click.echo(table, nl=False)
    return 0


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

@cli.command("oracle")
@click.option("--oracle", "oracle_name",
              type=click.Choice(["bell_pair", "tfim", "qhaf"]), required=True)
@click.option("--theta", type=float, default=None)
@click.option("--k", type=int, default=None)
@click.option("--n-sites", type=int, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--lattice", type=click.Choice(["chain", "square"]), default=None)
@click.option("--max-distance", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def oracle_cmd(oracle_name, theta, k, n_sites, gamma, temperature, lattice,
               max_distance, out):
    """Generate a dataset from one of the built-in quantum oracles."""
    cfg = _merged({}, oracle=oracle_name, theta=theta, k=k, n_sites=n_sites,
                  gamma=gamma, temperature=temperature, lattice=lattice,
                  max_distance=max_distance)
    dataset = _oracle_dataset(cfg)
    dataio.save_dataset(dataset, out)
    click.echo(f"wrote {len(dataset.entries)} correlators to {out}")
    return 0


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--data", type=click.Path(), required=True,
              help="Dataset-layout file whose values are coefficients.")
@click.option("--bound-method",
              type=click.Choice(["exhaustive", "symmetric", "anneal"]),
              default="exhaustive", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def bound(data, bound_method, seed, out):
    """Classical bound of a stored inequality (coefficients as values)."""
    stored = dataio.load_dataset(data)
    coeffs = stored.values
    bc, witness_cfg, certified = distill.classical_bound(
        stored.scenario, stored.features, coeffs, method=bound_method,
        seed=seed)
    report = {"classical_bound": bc, "certified": certified,
              "method": bound_method,
              "witness_configuration":
                  None if witness_cfg is None
                  else list(map(int, np.asarray(witness_cfg).ravel()))}
    if out:
        dataio.save_report(report, out)
    click.echo(json.dumps(report, indent=1))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None):
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        return int(rv) if isinstance(rv, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    except ScenarioError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
