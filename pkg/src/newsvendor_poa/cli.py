"""``newsvendor-poa`` command line: figure data as CSV plus validation suites.

Exit codes: 0 success, 1 property failure, 2 usage error.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from pathlib import Path

import click
import numpy as np

from .ar_simulator import (
    ArConfig,
    build_empirical_model,
    fit_log_density,
    generate_series,
    load_fit,
    save_fit,
    summarize_series,
    write_histogram_csv,
)
from .demand_models import HalfNormalDemand, PointMassDemand, UniformDemand
from .errors import NewsvendorError
from .generalized_model import PiecewiseLogModel, TanhModel, as_generalized
from .poa_bounds import (
    feasible_alpha_min,
    improved_upper_push,
    lower_bound_push,
    poa_report,
    threshold_alpha,
)
from .solver import ChainConfig, Scenario, expected_profit, solve, solve_centralized
from .validation import FAULTS, run_suite

SWEEP_COLUMNS = [
    "r", "Qc", "Qd", "w_ratio", "profit_c", "profit_d", "poa",
    "prev_upper", "improved_upper", "lower", "branch", "valid", "error",
]
CONFIG_CHOICES = [c.value for c in ChainConfig]


def fmt(x) -> str:
    """Fixed 12-significant-digit scientific notation."""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "1" if x else "0"
    return f"{float(x):.11e}"


def parse_model(text: str):
    """``uniform[:b]``, ``halfnormal[:scale]``, ``tanh``, ``piecewise[:knee,slope]``,
    ``pointmass[:q0]`` or ``empirical:<fit.json>``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    try:
        if name == "empirical":
            if not arg:
                raise click.BadParameter("empirical needs a fit file, e.g. empirical:fit.json")
            return build_empirical_model(load_fit(arg))
        nums = [float(v) for v in arg.split(",")] if arg else []
        if name == "uniform":
            return UniformDemand(*nums)
        if name == "halfnormal":
            return HalfNormalDemand(*nums)
        if name == "tanh" and not nums:
            return TanhModel()
        if name == "piecewise":
            return PiecewiseLogModel(*nums)
        if name == "pointmass":
            return PointMassDemand(*nums) if nums else PointMassDemand(1.0)
    except (ValueError, TypeError, OSError, KeyError) as exc:
        raise click.BadParameter(f"cannot build model from {text!r}: {exc}") from exc
    raise click.BadParameter(f"unknown model {text!r}")


class ModelType(click.ParamType):
    name = "model"

    def convert(self, value, param, ctx):
        if not isinstance(value, str):
            return value
        try:
            return parse_model(value)
        except click.BadParameter as exc:
            self.fail(exc.message, param, ctx)


def _write_rows(path: str | None, header: list[str], rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    if path in (None, "-"):
        click.echo(buffer.getvalue(), nl=False)
    else:
        Path(path).write_text(buffer.getvalue())


def sweep_rows(model, config: ChainConfig, r_values, method: str = "bisection"):
    """One row per r; failures keep their row with NaNs and an error code."""
    for r in r_values:
        r = float(r)
        try:
            rep = poa_report(model, r, config, method)
            res = rep.result
            yield [
                r, res.Q_c, res.Q_d, res.w_over_p, res.profit_c, res.profit_d, rep.poa,
                rep.prev_upper, rep.improved_upper, rep.lower, rep.branch, rep.valid, "",
            ]
        except NewsvendorError as exc:
            yield [r] + [math.nan] * 9 + ["", False, type(exc).__name__]


def _check_sweep(model, r_min: float, r_max: float, r_steps: int) -> None:
    x0 = as_generalized(model).marginal_at_zero
    if not (0.0 < r_min < r_max < x0):
        raise click.UsageError(f"need 0 < r-min < r-max < X(0) = {x0:g}")
    if r_steps < 2:
        raise click.UsageError("r-steps must be at least 2")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Newsvendor supply-chain equilibria and price-of-anarchy bounds."""


@main.command("sweep")
@click.option("--model", "model", type=ModelType(), default="uniform", show_default=True)
@click.option("--config", type=click.Choice(CONFIG_CHOICES), default="push_manufacturer", show_default=True)
@click.option("--r-min", type=float, default=0.05, show_default=True)
@click.option("--r-max", type=float, default=0.95, show_default=True)
@click.option("--r-steps", type=int, default=19, show_default=True)
@click.option("--method", type=click.Choice(["bisection", "fixed_point"]), default="bisection", show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="CSV path (default stdout)")
def cmd_sweep(model, config, r_min, r_max, r_steps, method, output):
    """PoA and bounds over a grid of cost ratios r = c/p."""
    _check_sweep(model, r_min, r_max, r_steps)
    r_values = np.linspace(r_min, r_max, r_steps)
    _write_rows(output, SWEEP_COLUMNS, sweep_rows(model, ChainConfig(config), r_values, method))


@main.command("bound-curves")
@click.option("--k", type=float, required=True, help="g at the decentralized level")
@click.option("--s", type=float, default=1.0 - 1e-9, show_default=True, help="g at the centralized level")
@click.option("--survival-at-qd", type=float, default=None, help="X(Qd); sets r = X(Qd)(1-k)")
@click.option("--r", "r_tilde", type=float, default=None, help="rescaled cost ratio")
@click.option("--alpha-min", type=float, default=None, help="default (1-k)^(-1/s)")
@click.option("--alpha-max", type=float, default=None, help="default 1.2 (1-k)^(-1/k)")
@click.option("--steps", type=int, default=200, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None)
def cmd_bound_curves(k, s, survival_at_qd, r_tilde, alpha_min, alpha_max, steps, output):
    """Improved upper and lower PoA bounds as functions of alpha = Qc/Qd."""
    if not (0.0 < k < 1.0) or s < k:
        raise click.UsageError("need 0 < k < 1 and s >= k")
    if (survival_at_qd is None) == (r_tilde is None):
        raise click.UsageError("give exactly one of --survival-at-qd and --r")
    if survival_at_qd is not None:
        if not (0.0 < survival_at_qd <= 1.0):
            raise click.UsageError("--survival-at-qd must lie in (0, 1]")
        r_tilde = survival_at_qd * (1.0 - k)
    if not (0.0 < r_tilde < 1.0):
        raise click.UsageError("r must lie in (0, 1)")
    lo = feasible_alpha_min(k, s) if alpha_min is None else alpha_min
    hi = 1.2 * threshold_alpha(k) if alpha_max is None else alpha_max
    if lo < 1.0 or hi <= lo or steps < 2:
        raise click.UsageError("need 1 <= alpha-min < alpha-max and steps >= 2")
    lower = lower_bound_push(k, s, r_tilde)
    rows = ([a, improved_upper_push(k, a)[0], lower] for a in np.linspace(lo, hi, steps))
    _write_rows(output, ["alpha", "improved_upper", "lower"], rows)


@main.command("geometry")
@click.option("--model", "model", type=ModelType(), default="uniform", show_default=True)
@click.option("--r", type=float, required=True)
@click.option("--config", type=click.Choice(["centralized"] + CONFIG_CHOICES), default="centralized", show_default=True)
@click.option("--q-max", type=float, default=None, help="default 1.5 Qc")
@click.option("--steps", type=int, default=201, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None)
@click.option("--summary", type=click.Path(dir_okay=False), default=None, help="intercepts CSV (default stderr)")
def cmd_geometry(model, r, config, q_max, steps, output, summary):
    """Order curve M(Q) with its supporting lines of slope r (units of p)."""
    gm = as_generalized(model)
    try:
        q_c = solve_centralized(gm, r)
    except NewsvendorError as exc:
        raise click.UsageError(str(exc)) from exc
    q_max = 1.5 * q_c if q_max is None else q_max
    if q_max <= 0.0 or steps < 2:
        raise click.UsageError("need q-max > 0 and steps >= 2")
    pi_c = expected_profit(gm, r, q_c)
    left, right = gm.marginal_limits(q_c) if gm.is_kink(q_c) else (gm.marginal(q_c),) * 2
    facts = [("Qc", q_c), ("intercept_centralized", pi_c), ("slope_match", abs(float(left) - r) <= 1e-9 and abs(float(right) - r) <= 1e-9)]
    header = ["Q", "M", "y_centralized"]
    qs = np.linspace(0.0, q_max, steps)
    columns = [qs, np.asarray(gm.order_fn(qs)), r * qs + pi_c]

    if config != "centralized":
        res = solve(Scenario(gm, r, config))
        pi_d = res.profit_d
        header.append("y_decentralized")
        columns.append(r * qs + pi_d)
        facts += [("Qd", res.Q_d), ("w_ratio", res.w_over_p), ("intercept_decentralized", pi_d)]
        cfg = ChainConfig(config)
        if cfg in (ChainConfig.PUSH_MANUFACTURER, ChainConfig.PUSH_RETAILER):
            # follower (retailer) line: slope w through (Qd, M(Qd))
            w = res.w_over_p
            follower = -w * res.Q_d + float(gm.order_fn(res.Q_d))
            header += ["follower_curve", "y_follower"]
            columns += [columns[1], w * qs + follower]
            leader = (w - r) * res.Q_d
        else:
            # follower (manufacturer) sees w M(Q) against cost slope r
            w = res.w_over_p
            follower = -r * res.Q_d + w * float(gm.order_fn(res.Q_d))
            header += ["follower_curve", "y_follower"]
            columns += [w * columns[1], r * qs + follower]
            leader = (1.0 - w) * float(gm.order_fn(res.Q_d))
        facts += [("intercept_follower", follower), ("leader_profit", leader)]

    _write_rows(output, header, zip(*columns))
    if summary:
        _write_rows(summary, ["name", "value"], facts)
    else:
        for name, value in facts:
            click.echo(f"{name},{fmt(value)}", err=True)


@main.command("ar")
@click.option("--beta", type=float, default=0.9, show_default=True)
@click.option("--sigma2", type=float, default=100.0, show_default=True)
@click.option("--n-samples", type=int, default=1_000_000, show_default=True)
@click.option("--burn-in", type=int, default=1_000, show_default=True)
@click.option("--seed", type=int, default=20240101, show_default=True)
@click.option("--n-bins", type=int, default=128, show_default=True)
@click.option("--degrees", default="2,3,4,5,6", show_default=True, help="candidate polynomial degrees")
@click.option("--chains", type=int, default=1, show_default=True)
@click.option("--r-min", type=float, default=0.05, show_default=True)
@click.option("--r-max", type=float, default=0.95, show_default=True)
@click.option("--r-steps", type=int, default=19, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default="ar_output", show_default=True)
def cmd_ar(beta, sigma2, n_samples, burn_in, seed, n_bins, degrees, chains, r_min, r_max, r_steps, out_dir):
    """Simulate the AR(1) chi-square demand, fit its density, sweep PoA."""
    try:
        degree_set = tuple(int(d) for d in degrees.split(","))
        config = ArConfig(beta, sigma2, n_samples, burn_in, seed, n_bins, degree_set, chains)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    samples = generate_series(config)
    stats = summarize_series(samples)
    _write_rows(str(out / "summary.csv"), ["name", "value"], [
        ("n", stats.n),
        ("mean", stats.mean),
        ("mean_se", stats.mean_se),
        ("mean_theory", config.stationary_mean),
        ("variance", stats.variance),
        ("variance_se", stats.variance_se),
        ("variance_theory", config.stationary_variance),
        ("min", stats.minimum),
        ("max", stats.maximum),
    ])
    try:
        fit = fit_log_density(samples, config)
        model = build_empirical_model(fit)
    except (NewsvendorError, ValueError) as exc:
        click.echo(f"density fit failed: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    save_fit(fit, out / "fit.json")
    write_histogram_csv(fit, out / "histogram.csv")
    _check_sweep(model, r_min, r_max, r_steps)
    r_values = np.linspace(r_min, r_max, r_steps)
    for cfg in (ChainConfig.PUSH_MANUFACTURER, ChainConfig.PULL_RETAILER):
        _write_rows(str(out / f"sweep_{cfg.value}.csv"), SWEEP_COLUMNS, sweep_rows(model, cfg, r_values))
    click.echo(f"degree {fit.chosen_degree}, outputs in {out}", err=True)


@main.command("validate")
@click.option("--suite", type=click.Choice(["invariants", "oracle", "all"]), default="all", show_default=True)
@click.option("--inject-fault", type=click.Choice(list(FAULTS)), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="machine-readable listing")
def cmd_validate(suite, inject_fault, csv_path):
    """Run property and oracle suites; exit 1 if any check fails."""
    checks = run_suite(suite, inject_fault)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        line = f"{status} {c.suite}/{c.name} ({c.cases} cases, {c.violations} violations)"
        if c.detail:
            line += f": {c.detail}"
        click.echo(line)
    if csv_path:
        _write_rows(csv_path, ["suite", "check", "passed", "cases", "violations", "detail"],
                    [(c.suite, c.name, c.passed, str(c.cases), str(c.violations), c.detail) for c in checks])
    failed = [c.name for c in checks if not c.passed]
    if failed:
        click.echo(f"violated: {', '.join(failed)}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
