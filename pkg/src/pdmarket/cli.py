"""Command line interface.

Subcommands: ``solve``, ``reduce``, ``check``, ``tat``, ``gen phi``,
``experiment``.  Instances and candidates travel as JSON documents; pass
``-`` to read from stdin or write to stdout.

Exit codes: 0 on success, 1 on malformed input, 2 when a check, a
tatonnement certification, or an experiment fails.  The environment
variable ``PDMARKET_TOL`` overrides the default checker tolerance.
"""

from __future__ import annotations

import functools
import os
import sys

import click
import numpy as np

from .checkers import (
    check_delta_eq,
    check_delta_pme,
    check_ime,
    check_lindahl,
    check_me,
    check_pme,
)
from .expansion import FisherInstance, reduce_instance
from .experiments import EXPERIMENT_TAGS, run_inefficiency_experiment
from .model import PdmInstance, Personalized, PerIssue, build_phi
from .serialize import (
    dumps,
    fisher_to_dict,
    instance_from_dict,
    loads,
    outcome_from_dict,
    pdm_to_dict,
    prices_from_dict,
    solve_result_to_dict,
)
from .solver import solve_fisher_eg, solve_pdm_nash
from .tatonnement import (
    TatonnementConfig,
    run_fisher_tatonnement,
    run_lifted_tatonnement,
)

_CHECK_KINDS = ("me", "ime", "pme", "delta-eq", "delta-pme", "lindahl")

# exit code 2 is reserved for failed verdicts; bad arguments are malformed
# input like any other and must exit 1
click.UsageError.exit_code = 1


def _guard(f):
    """Map malformed-input errors to exit code 1 with a message on stderr."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ValueError, KeyError, TypeError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _read_doc(path: str) -> dict:
    if path == "-":
        return loads(sys.stdin.read())
    with open(path) as fh:
        return loads(fh.read())


def _emit(text: str, out: str) -> None:
    if out == "-":
        click.echo(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")


def _default_tol() -> float:
    raw = os.environ.get("PDMARKET_TOL")
    if raw is None:
        return 1e-6
    try:
        tol = float(raw)
    except ValueError as exc:
        raise ValueError(f"PDMARKET_TOL must be a float, got {raw!r}") from exc
    if tol <= 0:
        raise ValueError(f"PDMARKET_TOL must be positive, got {tol}")
    return tol


@click.group()
@click.version_option(package_name="pdmarket", prog_name="pdmarket")
def main():
    """Public decision markets: solve, reduce, check, and iterate."""


@main.command()
@click.argument("instance")
@click.option("-o", "--out", default="-", help="Output path or - for stdout.")
@_guard
def solve(instance, out):
    """Maximize Nash welfare for a pdm/1 or fisher/1 instance."""
    obj = instance_from_dict(_read_doc(instance))
    if isinstance(obj, PdmInstance):
        result = solve_pdm_nash(obj)
    else:
        result = solve_fisher_eg(obj)
    _emit(dumps(solve_result_to_dict(result)), out)


@main.command()
@click.argument("instance")
@click.option("-o", "--out", default="-", help="Output path or - for stdout.")
@_guard
def reduce(instance, out):
    """Expand a pdm/1 instance into its pairwise fisher/1 market."""
    obj = instance_from_dict(_read_doc(instance))
    if not isinstance(obj, PdmInstance):
        raise ValueError("reduce expects a pdm/1 instance")
    _emit(dumps(fisher_to_dict(reduce_instance(obj))), out)


def _candidate_bundles(doc: dict) -> np.ndarray:
    for key in ("bundles", "allocation"):
        if key in doc:
            return np.asarray(doc[key], dtype=float)
    raise ValueError("candidate needs a 'bundles' or 'allocation' key")


def _candidate_prices(doc: dict):
    if "prices" not in doc:
        raise ValueError("candidate needs a 'prices' key")
    return prices_from_dict(doc["prices"])


@main.command()
@click.argument("kind", type=click.Choice(_CHECK_KINDS))
@click.option("-i", "--instance", "instance_path", required=True)
@click.option("-c", "--candidate", "candidate_path", required=True)
@click.option("--tol", type=float, default=None, help="Residual tolerance.")
@click.option("--delta", type=float, default=0.05, help="Clearing slack for delta checks.")
@click.option("-o", "--out", default="-", help="Output path or - for stdout.")
@_guard
def check(kind, instance_path, candidate_path, tol, delta, out):
    """Verify an equilibrium candidate; exits 2 when the check fails.

    The candidate document carries 'bundles' (or 'allocation') and
    'prices'; 'lindahl' instead takes 'outcome' and per-side 'prices',
    and the delta checks read 'delta' from the document unless --delta
    is given.
    """
    tol = _default_tol() if tol is None else tol
    instance = instance_from_dict(_read_doc(instance_path))
    cand = _read_doc(candidate_path)
    if "delta" in cand:
        delta = float(cand["delta"])

    is_pdm = isinstance(instance, PdmInstance)
    if kind in ("me", "delta-eq") and is_pdm:
        raise ValueError(f"check {kind} expects a fisher/1 instance")
    if kind in ("ime", "pme", "delta-pme", "lindahl") and not is_pdm:
        raise ValueError(f"check {kind} expects a pdm/1 instance")

    if kind == "lindahl":
        if "outcome" not in cand:
            raise ValueError("lindahl candidate needs an 'outcome' key")
        prices = _candidate_prices(cand)
        report = check_lindahl(
            instance, outcome_from_dict(cand["outcome"]), prices, tol=tol
        )
    else:
        y = _candidate_bundles(cand)
        prices = _candidate_prices(cand)
        if isinstance(prices, np.ndarray):
            raise ValueError(f"check {kind} expects 1- or 2-dimensional prices")
        if kind == "ime":
            if not isinstance(prices, PerIssue):
                prices = PerIssue(np.asarray(prices.values, dtype=float))
            report = check_ime(instance, y, prices, tol=tol)
        elif kind == "pme":
            if not isinstance(prices, Personalized):
                prices = Personalized(np.asarray(prices.values, dtype=float))
            report = check_pme(instance, y, prices, tol=tol)
        elif kind == "me":
            report = check_me(instance, y, prices, tol=tol)
        elif kind == "delta-eq":
            report = check_delta_eq(instance, y, prices, delta, tol=tol)
        else:
            report = check_delta_pme(instance, y, prices, delta, tol=tol)

    _emit(report.to_json(indent=2), out)
    if not report.verdict:
        sys.exit(2)


_CONFIG_FLAGS = (
    ("eta_scale", float),
    ("delta", float),
    ("max_steps", int),
    ("noise_std", float),
    ("bias", float),
    ("seed", int),
    ("record_every", int),
    ("check_every", int),
)


@main.command()
@click.argument("kind", type=click.Choice(("fisher", "lifted")))
@click.option("-i", "--instance", "instance_path", required=True)
@click.option("--config", "config_path", default=None, help="TatonnementConfig JSON.")
@click.option("--eta-scale", type=float, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--noise-std", type=float, default=None)
@click.option("--bias", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--record-every", type=int, default=None)
@click.option("--check-every", type=int, default=None)
@click.option("--trace", "trace_path", default=None, help="Write the price path CSV here.")
@click.option("-o", "--out", default="-", help="Summary JSON path or - for stdout.")
@_guard
def tat(kind, instance_path, config_path, trace_path, out, **flags):
    """Run price dynamics; exits 2 when certification never succeeds.

    'fisher' iterates a fisher/1 instance directly; 'lifted' reduces a
    pdm/1 instance, iterates the reduction, and certifies the lifted
    pairwise candidate.  Flags override the config file field by field.
    """
    doc = _read_doc(config_path) if config_path else {}
    for name, cast in _CONFIG_FLAGS:
        if flags.get(name) is not None:
            doc[name] = cast(flags[name])
    config = TatonnementConfig(**doc)

    instance = instance_from_dict(_read_doc(instance_path))
    if kind == "fisher":
        if not isinstance(instance, FisherInstance):
            raise ValueError("tat fisher expects a fisher/1 instance")
        trace = run_fisher_tatonnement(instance, config)
    else:
        if not isinstance(instance, PdmInstance):
            raise ValueError("tat lifted expects a pdm/1 instance")
        trace = run_lifted_tatonnement(instance, config)

    if trace_path:
        trace.to_csv(trace_path)
    _emit(dumps(trace.summary_dict()), out)
    if not trace.report.verdict:
        sys.exit(2)


@main.group()
def gen():
    """Instance generators."""


@gen.command("phi")
@click.option("--n", type=int, required=True, help="Agents (= issues).")
@click.option("--w", type=float, default=1.0, help="Own-issue weight.")
@click.option(
    "--class", "family", required=True,
    type=click.Choice(("linear", "leontief", "cobb_douglas", "ces")),
)
@click.option("--rho", type=float, default=None, help="CES exponent.")
@click.option("-o", "--out", default="-", help="Output path or - for stdout.")
@_guard
def gen_phi(n, w, family, rho, out):
    """The opposing-pairs family: agent i against everyone on issue i."""
    _emit(dumps(pdm_to_dict(build_phi(n, w, family, rho=rho))), out)


@main.command()
@click.argument("tag", type=click.Choice(EXPERIMENT_TAGS))
@click.option("--ns", default=None, help="Comma-separated agent counts.")
@click.option("--eps", type=float, default=0.01)
@click.option("--rhos", default=None, help="Comma-separated CES exponents.")
@click.option("--instances", type=int, default=None, help="Batch size.")
@click.option("--seed0", type=int, default=0, help="First seed of the batch.")
@click.option("--max-n", type=int, default=5)
@click.option("--max-m", type=int, default=4)
@click.option("--tol", type=float, default=None, help="Pass tolerance.")
@click.option("-o", "--out", default="-", help="Output path or - for stdout.")
@_guard
def experiment(tag, ns, eps, rhos, instances, seed0, max_n, max_m, tol, out):
    """Run a pricing-inefficiency experiment; exits 2 if any report fails."""
    reports = run_inefficiency_experiment(
        tag,
        ns=tuple(int(v) for v in ns.split(",")) if ns else None,
        eps=eps,
        rhos=tuple(float(v) for v in rhos.split(",")) if rhos else None,
        instances=instances,
        seed0=seed0,
        max_n=max_n,
        max_m=max_m,
        tol=tol,
    )
    _emit(dumps([r.to_dict() for r in reports]), out)
    if not all(r.passed for r in reports):
        sys.exit(2)


if __name__ == "__main__":
    main()
