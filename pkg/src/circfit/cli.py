"""Command line surface.

Five subcommands: ``fit``, ``select-h``, ``simulate``, ``contaminate`` and
``sensitivity``.  Options may come from a flat key=value file via
``--config``; explicit flags win.  Every run writes its outputs plus a
``manifest.json`` (inputs, resolved parameters, seed, versions, wall clock)
into the directory given by ``--out``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
Failures print exactly one line ``error: <category>: <message>`` on stderr.
"""

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .bandwidth import make_grid, select_cv_ce, select_naive_cv, select_simex
from .dataio import (
    load_dataset,
    read_config,
    write_bandwidth_report,
    write_dataset,
    write_fit_result,
    write_manifest,
)
from .error_models import (
    NO_ERROR,
    gaussian_error,
    laplace_error,
    sample_error,
)
from .exceptions import CircfitError, DataError, DomainError, NumericError
from .fit import Dataset, FitConfig, fit
from . import simlab


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse kills the process with status 2 on bad flags; route the
    message through our own exit-code scheme instead."""

    def error(self, message):
        raise _UsageError(message)


def _choice(*options):
    def convert(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return convert


def _span(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError("expected LO:HI")
    lo, hi = float(parts[0]), float(parts[1])
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < LO < HI")
    return (lo, hi)


def _gridspec(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("expected LO:HI:COUNT")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if not (lo < hi) or count < 2:
        raise ValueError("need LO < HI and COUNT >= 2")
    return (lo, hi, count)


def _float_list(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _word_list(options):
    def convert(text):
        words = [tok.strip() for tok in text.split(",") if tok.strip()]
        bad = [w for w in words if w not in options]
        if bad:
            raise ValueError(f"unknown value(s) {', '.join(bad)}")
        return words

    return convert


def _anchor(text):
    if text == "auto":
        return "auto"
    value = float(text)
    if not (value > 0.0):
        raise ValueError("anchor must be positive or 'auto'")
    return value


_ESTIMATOR = _choice("ideal", "naive", "ce", "dk", "os")
_ORDER = _choice("local_constant", "local_linear")
_FAMILY = _choice("none", "gaussian", "laplace")
_SELECTOR = _choice("cv", "simex", "cv-ce")
_UNITS = _choice("rad", "deg")
_FAMILIES = _word_list(("gaussian", "laplace"))
_ESTIMATORS = _word_list(("naive", "ce", "dk", "os"))


def _apply_config(args):
    """Fill unset options from the key=value file; reject unknown keys."""
    if getattr(args, "config", None) is None:
        return
    types = args._types
    filecfg = read_config(args.config)
    unknown = sorted(set(filecfg) - set(types))
    if unknown:
        raise _UsageError(f"unknown config key(s): {', '.join(unknown)}")
    for key, raw in filecfg.items():
        if getattr(args, key) is None:
            try:
                setattr(args, key, types[key](raw))
            except ValueError as exc:
                raise _UsageError(f"config key {key}: {exc}") from None


def _fill(args, **defaults):
    for key, value in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)


def _need(args, *keys):
    for key in keys:
        if getattr(args, key) is None:
            raise _UsageError(f"--{key.replace('_', '-')} is required")


def _require_seed(args):
    if args.seed is None:
        raise _UsageError("--seed is required for stochastic commands")


def _load(args):
    dataset, report = load_dataset(args.input, units=args.units)
    if report.na_lines:
        lines = ", ".join(str(k) for k in report.na_lines)
        print(
            f"WARN na-rows: dropped {len(report.na_lines)} row(s) "
            f"at file line(s) {lines}",
            file=sys.stderr,
        )
    return dataset


def _model_from(args, w):
    """Resolve --family/--sigma-u/--reliability into an error model.

    Without the true covariate the reliability target is interpreted
    against the observed variance: sigma_u^2 = S2_w (1 - lambda).
    """
    if args.sigma_u is not None and args.reliability is not None:
        raise _UsageError("--sigma-u and --reliability are mutually exclusive")
    family = args.family
    if family is None:
        family = "none" if (args.sigma_u is None and args.reliability is None) else "gaussian"
    if family == "none":
        if args.sigma_u not in (None, 0.0) or args.reliability is not None:
            raise _UsageError("family 'none' does not take an error size")
        return NO_ERROR
    if args.sigma_u is not None:
        sigma = args.sigma_u
    elif args.reliability is not None:
        lam = args.reliability
        if not (0.0 < lam <= 1.0):
            raise DomainError("reliability must lie in (0, 1]")
        sigma = math.sqrt(float(np.var(w, ddof=1)) * (1.0 - lam))
    else:
        raise _UsageError(f"family {family!r} needs --sigma-u or --reliability")
    return gaussian_error(sigma) if family == "gaussian" else laplace_error(sigma)


def _eval_points(args, dataset, estimator):
    if args.grid is not None:
        lo, hi, count = args.grid
        return np.linspace(lo, hi, count)
    cov = dataset.x if estimator == "ideal" else dataset.w
    if cov is None:
        raise DataError("the ideal estimator needs the x column to place points")
    return np.sort(cov)


def _finish_run(args, command, parameters, outputs, started):
    manifest = os.path.join(args.out, "manifest.json")
    write_manifest(
        manifest,
        command=command,
        parameters=parameters,
        seed=args.seed,
        outputs=[os.path.basename(p) for p in outputs],
        wall_clock_s=time.perf_counter() - started,
    )
    return manifest


def _cmd_fit(args):
    _apply_config(args)
    _need(args, "input", "estimator", "h", "out")
    _fill(args, units="rad", order="local_linear", b_star=250)
    started = time.perf_counter()
    dataset = _load(args)
    model = _model_from(args, dataset.w)
    if args.estimator == "ce":
        _require_seed(args)
    config = FitConfig(
        estimator=args.estimator,
        h=args.h,
        error=model,
        weight_order=args.order,
        b_star=args.b_star,
        seed=0 if args.seed is None else args.seed,
    )
    points = _eval_points(args, dataset, args.estimator)
    result = fit(dataset, config, points)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "fit.csv")
    write_fit_result(result, out_csv)
    parameters = {
        "input": args.input,
        "units": args.units,
        "estimator": args.estimator,
        "order": args.order,
        "family": model.family,
        "sigma_u": model.sigma_u,
        "h": args.h,
        "b_star": args.b_star,
        "points": len(points),
    }
    _finish_run(args, "fit", parameters, [out_csv], started)
    defined = int(result.defined.sum())
    print(f"fit: n={dataset.n} points={len(points)} defined={defined}/{len(points)} -> {out_csv}")
    return 0


def _cmd_select_h(args):
    _apply_config(args)
    _need(args, "input", "estimator", "selector", "out")
    _require_seed(args)
    _fill(
        args,
        units="rad",
        order="local_linear",
        b_star=250,
        anchor="auto",
        window=(0.35, 1.5),
        count=8,
        folds=5,
        b=30,
    )
    started = time.perf_counter()
    dataset = _load(args)
    model = _model_from(args, dataset.w)
    anchor = args.anchor
    if anchor == "auto":
        anchor = 1.06 * float(dataset.w.std()) * dataset.n ** (-0.2)
    grid = make_grid(anchor, args.window[0], args.window[1], args.count)
    config = FitConfig(
        estimator=args.estimator,
        h=float(grid[0]),
        error=model,
        weight_order=args.order,
        b_star=args.b_star,
        seed=args.seed,
    )
    rng = np.random.default_rng(args.seed)
    if args.selector == "cv":
        report = select_naive_cv(dataset, grid, config, folds=args.folds, rng=rng)
    elif args.selector == "simex":
        report = select_simex(dataset, grid, config, b=args.b, folds=args.folds, rng=rng)
    else:
        report = select_cv_ce(dataset, grid, config, b=args.b, folds=args.folds, rng=rng)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "bandwidth.csv")
    write_bandwidth_report(report, out_csv)
    parameters = {
        "input": args.input,
        "units": args.units,
        "estimator": args.estimator,
        "order": args.order,
        "family": model.family,
        "sigma_u": model.sigma_u,
        "selector": args.selector,
        "anchor": anchor,
        "window": list(args.window),
        "count": args.count,
        "folds": args.folds,
        "b": args.b,
        "b_star": args.b_star,
        "selected": report.selected,
        "boundary_hit": report.boundary_hit,
    }
    _finish_run(args, "select-h", parameters, [out_csv], started)
    if report.boundary_hit:
        print(
            "WARN boundary: selected bandwidth sits at a grid edge; widen the window",
            file=sys.stderr,
        )
    print(
        f"select-h: selector={report.selector} selected h={report.selected:.8g} "
        f"over {len(grid)} candidates -> {out_csv}"
    )
    return 0


def _cmd_simulate(args):
    _apply_config(args)
    _need(args, "preset", "out")
    _require_seed(args)
    _fill(args, workers=1)
    started = time.perf_counter()
    result = simlab.run_preset(args.preset, seed=args.seed, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    records_csv = os.path.join(args.out, "records.csv")
    fitted_csv = os.path.join(args.out, "fitted.csv")
    result.records_csv(records_csv)
    result.fitted_csv(fitted_csv)
    spec = simlab.preset_spec(args.preset)
    parameters = {
        "preset": args.preset,
        "workers": args.workers,
        "replicates": spec["replicates"],
        "procedures": list(spec["procedures"]),
    }
    _finish_run(args, "simulate", parameters, [records_csv, fitted_csv], started)
    for row in result.summary():
        flag = " FLAGGED" if row["flagged"] else ""
        print(
            f"{row['scenario']} {row['procedure']}: median risk "
            f"{row['median_risk']:.4f} median h {row['median_h']:.4f} "
            f"failures {row['failures']}/{row['replicates']}{flag}"
        )
    print(f"simulate: wrote {records_csv} and {fitted_csv}")
    return 0


def _cmd_contaminate(args):
    _apply_config(args)
    _need(args, "input", "out")
    _require_seed(args)
    _fill(args, units="rad", family="gaussian")
    if (args.sigma_u is None) == (args.target_reliability is None):
        raise _UsageError("give exactly one of --sigma-u and --target-reliability")
    started = time.perf_counter()
    dataset = _load(args)
    if dataset.x is None:
        raise DataError("contamination needs the true covariate column x")
    x = dataset.x
    rng = np.random.default_rng(args.seed)
    make_model = gaussian_error if args.family == "gaussian" else laplace_error
    if args.sigma_u is not None:
        if not (args.sigma_u >= 0.0):
            raise DomainError("sigma_u must be nonnegative")
        u = sample_error(make_model(args.sigma_u), rng, x.size)
        achieved = float(np.var(x, ddof=1) / np.var(x + u, ddof=1))
    else:
        lam = args.target_reliability
        if not (0.0 < lam <= 1.0):
            raise DomainError("target reliability must lie in (0, 1]")
        if lam == 1.0:
            u = np.zeros(x.size)
            achieved = 1.0
        else:
            var_x = float(np.var(x, ddof=1))
            draw = sample_error(make_model(math.sqrt(var_x * (1.0 / lam - 1.0))), rng, x.size)
            # Rescale the drawn vector so the *sample* ratio S2_x / S2_w hits
            # the target exactly: S2_w(c) = S2_x + 2 c S_xu + c^2 S2_u is
            # quadratic in the scale c, and the larger root is the
            # nonnegative solution.
            s_xu = float(np.cov(x, draw, ddof=1)[0, 1])
            s2_u = float(np.var(draw, ddof=1))
            disc = s_xu * s_xu + s2_u * var_x * (1.0 / lam - 1.0)
            c = (-s_xu + math.sqrt(disc)) / s2_u
            u = c * draw
            achieved = float(var_x / np.var(x + u, ddof=1))
            if abs(achieved - lam) > 1e-3:
                raise NumericError(
                    f"contamination calibration missed the target: {achieved:.6f} vs {lam}"
                )
    contaminated = Dataset(theta=dataset.theta, w=x + u, x=x)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "contaminated.csv")
    write_dataset(contaminated, out_csv)
    parameters = {
        "input": args.input,
        "units": args.units,
        "family": args.family,
        "sigma_u": args.sigma_u,
        "target_reliability": args.target_reliability,
        "achieved_reliability": achieved,
    }
    _finish_run(args, "contaminate", parameters, [out_csv], started)
    print(f"contaminate: achieved reliability {achieved:.6f} -> {out_csv}")
    return 0


def _cmd_sensitivity(args):
    _apply_config(args)
    _need(args, "input", "h", "out")
    _require_seed(args)
    _fill(
        args,
        units="rad",
        b_star=250,
        lambdas=[0.75, 0.8, 0.85, 0.9],
        families=["gaussian", "laplace"],
        estimators=["naive", "ce", "dk", "os"],
    )
    started = time.perf_counter()
    dataset = _load(args)
    if args.grid is not None:
        lo, hi, count = args.grid
        points = np.linspace(lo, hi, count)
    else:
        points = np.linspace(float(dataset.w.min()), float(dataset.w.max()), 200)
    var_w = float(np.var(dataset.w, ddof=1))
    for lam in args.lambdas:
        if not (0.0 < lam < 1.0):
            raise DomainError("sensitivity reliabilities must lie in (0, 1)")
    cells = [
        (lam, family, estimator)
        for lam in args.lambdas
        for family in args.families
        for estimator in args.estimators
    ]
    seeds = np.random.SeedSequence(args.seed).spawn(max(len(cells), 1))
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    failures = []
    for (lam, family, estimator), cell_seed in zip(cells, seeds):
        sigma = math.sqrt(var_w * (1.0 - lam))
        name = f"fit_lam{lam:g}_{family}_{estimator}.csv"
        path = os.path.join(args.out, name)
        if estimator == "naive":
            model = NO_ERROR
        elif estimator == "ce":
            # The complex-replicate correction is a gaussian-error method;
            # under an assumed laplace family it is reported as the
            # misspecified gaussian fit at the same error size.
            model = gaussian_error(sigma)
        else:
            model = gaussian_error(sigma) if family == "gaussian" else laplace_error(sigma)
        try:
            config = FitConfig(
                estimator=estimator,
                h=args.h,
                error=model,
                b_star=args.b_star,
                seed=int(cell_seed.generate_state(1)[0]),
            )
            write_fit_result(fit(dataset, config, points), path)
        except CircfitError as exc:
            failures.append({
                "lambda": lam,
                "family": family,
                "estimator": estimator,
                "error": f"{type(exc).__name__}: {exc}",
            })
            print(f"cell lam{lam:g} {family} {estimator}: failed ({type(exc).__name__}: {exc})")
            continue
        outputs.append(path)
        print(f"cell lam{lam:g} {family} {estimator}: -> {path}")
    parameters = {
        "input": args.input,
        "units": args.units,
        "h": args.h,
        "b_star": args.b_star,
        "lambdas": list(args.lambdas),
        "families": list(args.families),
        "estimators": list(args.estimators),
        "points": len(points),
        "failures": failures,
    }
    _finish_run(args, "sensitivity", parameters, outputs, started)
    print(f"sensitivity: wrote {len(outputs)} of {len(cells)} cell file(s)")
    return 0


def _add_common(p, types):
    p.add_argument("--config", help="flat key=value option file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="root seed for every stochastic draw")
    types.update(out=str, seed=int)


def _add_data(p, types):
    p.add_argument("--input", help="input CSV with theta and w columns (x optional)")
    p.add_argument("--units", type=_UNITS, help="angle units in the file: rad or deg")
    types.update(input=str, units=_UNITS)


def _add_model(p, types):
    p.add_argument("--family", type=_FAMILY, help="assumed error family")
    p.add_argument("--sigma-u", type=float, help="error scale (standard deviation)")
    p.add_argument(
        "--reliability",
        type=float,
        help="alternative to --sigma-u: signal fraction of the observed variance",
    )
    types.update(family=_FAMILY, sigma_u=float, reliability=float)


def build_parser():
    parser = _Parser(prog="circfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"circfit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("fit", help="fit the circular regression at a fixed bandwidth")
    types = {}
    _add_common(p, types)
    _add_data(p, types)
    _add_model(p, types)
    p.add_argument("--estimator", type=_ESTIMATOR, help="ideal, naive, ce, dk or os")
    p.add_argument("--order", type=_ORDER, help="local_constant or local_linear")
    p.add_argument("--h", type=float, help="bandwidth")
    p.add_argument("--b-star", type=int, help="complex replicates for the ce estimator")
    p.add_argument("--grid", type=_gridspec, help="evaluation points LO:HI:COUNT")
    types.update(estimator=_ESTIMATOR, order=_ORDER, h=float, b_star=int, grid=_gridspec)
    p.set_defaults(func=_cmd_fit, _types=types)

    p = sub.add_parser("select-h", help="choose a bandwidth by cross-validation")
    types = {}
    _add_common(p, types)
    _add_data(p, types)
    _add_model(p, types)
    p.add_argument("--estimator", type=_ESTIMATOR, help="estimator the selector tunes")
    p.add_argument("--order", type=_ORDER, help="local_constant or local_linear")
    p.add_argument("--selector", type=_SELECTOR, help="cv, simex or cv-ce")
    p.add_argument("--anchor", type=_anchor, help="grid anchor, a number or 'auto'")
    p.add_argument("--window", type=_span, help="grid window LO:HI, relative to the anchor")
    p.add_argument("--count", type=int, help="number of candidates")
    p.add_argument("--folds", type=int, help="cross-validation folds")
    p.add_argument("--b", type=int, help="remeasurement replicates")
    p.add_argument("--b-star", type=int, help="complex replicates for the ce estimator")
    types.update(
        estimator=_ESTIMATOR,
        order=_ORDER,
        selector=_SELECTOR,
        anchor=_anchor,
        window=_span,
        count=int,
        folds=int,
        b=int,
        b_star=int,
    )
    p.set_defaults(func=_cmd_select_h, _types=types)

    p = sub.add_parser("simulate", help="run a packaged simulation preset")
    types = {}
    _add_common(p, types)
    p.add_argument("--preset", help=f"one of: {', '.join(simlab.PRESETS)}")
    p.add_argument("--workers", type=int, help="process count for replicate tasks")
    types.update(preset=str, workers=int)
    p.set_defaults(func=_cmd_simulate, _types=types)

    p = sub.add_parser("contaminate", help="add synthetic measurement error to x")
    types = {}
    _add_common(p, types)
    _add_data(p, types)
    p.add_argument("--family", type=_FAMILY, help="error family to draw from")
    p.add_argument("--sigma-u", type=float, help="draw errors at this fixed scale")
    p.add_argument(
        "--target-reliability",
        type=float,
        help="rescale the drawn errors so S2_x/S2_w hits this value",
    )
    types.update(family=_FAMILY, sigma_u=float, target_reliability=float)
    p.set_defaults(func=_cmd_contaminate, _types=types)

    p = sub.add_parser(
        "sensitivity",
        help="fit over a grid of assumed reliabilities and error families",
    )
    types = {}
    _add_common(p, types)
    _add_data(p, types)
    p.add_argument("--h", type=float, help="bandwidth shared by every cell")
    p.add_argument("--b-star", type=int, help="complex replicates for the ce cells")
    p.add_argument("--lambdas", type=_float_list, help="comma-separated reliabilities")
    p.add_argument("--families", type=_FAMILIES, help="comma-separated error families")
    p.add_argument("--estimators", type=_ESTIMATORS, help="comma-separated estimators")
    p.add_argument("--grid", type=_gridspec, help="evaluation points LO:HI:COUNT")
    types.update(
        h=float,
        b_star=int,
        lambdas=_float_list,
        families=_FAMILIES,
        estimators=_ESTIMATORS,
        grid=_gridspec,
    )
    p.set_defaults(func=_cmd_sensitivity, _types=types)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
    except CircfitError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
