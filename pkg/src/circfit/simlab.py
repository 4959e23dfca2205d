"""Simulation lab: scenario generation, empirical risk, experiment matrix.

A procedure is "<estimator>-<selector>" where the estimator token fixes the
assumed error family and weight order:

    ideal   error-free fit on the true covariate (local linear)
    naive   uncorrected fit on the contaminated covariate
    ce      complex-replicate correction (always assumes gaussian noise)
    dkc     deconvoluting weights, local-constant, true error family
    dkl     deconvoluting weights, local-linear, true error family
    os      smooth-then-deconvolve, true error family

and the selector is one of oracle (true-risk minimizer), cv (plain k-fold),
cvce (error-aware CV, ce only), simex (two-stage remeasurement).  Assumed
noise levels always use the scenario's true sigma_u; ce on laplace data is
the deliberate misspecification cell.

Replicates are independent jobs: each (scenario, replicate) cell derives its
generators from a spawned seed sequence, so results are identical for any
worker count and are merged in replicate order.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .angles import cosine_dissimilarity, sample_von_mises, wrap_angle
from .bandwidth import (
    make_grid,
    select_cv_ce,
    select_naive_cv,
    select_oracle,
    select_simex,
)
from .error_models import (
    NO_ERROR,
    ErrorModel,
    gaussian_error,
    laplace_error,
    sample_error,
    sigma_from_reliability,
)
from .exceptions import CircfitError, DomainError, NumericError
from .fit import Dataset, FitConfig, fit

COVARIATES = ("uniform", "normal")
REGRESSIONS = ("smooth", "jump")

_SEED_MAX = 2**63

#: Risk grid for the smooth curve: covariate support inset by half a unit.
GRID_SMOOTH = np.round(np.arange(-45, 46) / 10.0, 10)

#: Risk grid for the jump curve: [-3, 3] at step 0.1 without the jump point.
GRID_JUMP = np.round(np.delete(np.arange(-30, 31), 30) / 10.0, 10)


@dataclass(frozen=True)
class Scenario:
    """One data-generating configuration.

    reliability fixes sigma_u through the analytic covariate variance
    (25/3 for uniform, 4 for normal); give sigma_u directly to bypass that.
    """

    n: int
    covariate: str = "uniform"
    regression: str = "smooth"
    kappa: float = 3.0
    family: str = "gaussian"
    reliability: float = None
    sigma_u: float = None
    name: str = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 10:
            raise DomainError("scenario size must be an integer >= 10")
        if self.covariate not in COVARIATES:
            raise DomainError(f"unknown covariate law {self.covariate!r}")
        if self.regression not in REGRESSIONS:
            raise DomainError(f"unknown regression curve {self.regression!r}")
        if not np.isfinite(self.kappa) or self.kappa < 0.0:
            raise DomainError("kappa must be finite and nonnegative")
        if (self.reliability is None) == (self.sigma_u is None):
            raise DomainError("give exactly one of reliability and sigma_u")
        if self.reliability is not None and not 0.0 < self.reliability <= 1.0:
            raise DomainError("reliability must lie in (0, 1]")
        if self.sigma_u is not None and (
            not np.isfinite(self.sigma_u) or self.sigma_u < 0.0
        ):
            raise DomainError("sigma_u must be finite and nonnegative")
        if self.name is None:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self):
        noise = (
            f"lam{self.reliability:g}"
            if self.reliability is not None
            else f"su{self.sigma_u:g}"
        )
        return f"{self.covariate}-{self.regression}-{self.family}-{noise}-n{self.n}"

    def covariate_variance(self):
        return 25.0 / 3.0 if self.covariate == "uniform" else 4.0

    def error_model(self):
        sigma = (
            self.sigma_u
            if self.sigma_u is not None
            else sigma_from_reliability(self.covariate_variance(), self.reliability)
        )
        return ErrorModel(self.family, sigma)

    def risk_grid(self):
        return GRID_SMOOTH if self.regression == "smooth" else GRID_JUMP


def true_regression(regression, x):
    """True conditional direction of a scenario curve, wrapped to [-pi, pi).

    smooth: 2*atan(x).  jump: 2*atan(1/x), discontinuous at zero; x = 0
    returns the wrapped right limit (pi, stored as -pi under the half-open
    convention).  Both branches approach +/-pi near zero so the cosine
    metric sees them as close.
    """
    if regression not in REGRESSIONS:
        raise DomainError(f"unknown regression curve {regression!r}")
    arr = np.asarray(x, dtype=np.float64)
    if regression == "smooth":
        out = wrap_angle(2.0 * np.arctan(arr))
    else:
        with np.errstate(divide="ignore"):
            out = wrap_angle(np.where(arr == 0.0, np.pi, 2.0 * np.arctan(1.0 / arr)))
    if np.ndim(x) == 0:
        return float(out)
    return out


def generate(scenario, rng):
    """Draw one replicate: X from the covariate law, angles von Mises around
    the true curve, W = X + U.  Draw order (x, angles, errors) is part of
    the determinism contract."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = scenario.n
    if scenario.covariate == "uniform":
        x = rng.uniform(-5.0, 5.0, n)
    else:
        x = rng.normal(0.0, 2.0, n)
    theta = sample_von_mises(
        true_regression(scenario.regression, x), scenario.kappa, rng
    )
    w = x + sample_error(scenario.error_model(), rng, n)
    return Dataset(theta, w, x=x)


def empirical_risk(result, truth):
    """Mean angular loss 1 - cos of a fit against the true curve values.

    Undefined fit points are skipped; more than 20 percent undefined makes
    the risk itself unreliable and raises NumericError.
    """
    truth_vals = np.asarray(
        truth(result.points) if callable(truth) else truth, dtype=np.float64
    )
    if truth_vals.shape != result.points.shape:
        raise DomainError("truth values must align with the fit grid")
    frac_undef = 1.0 - result.defined.mean()
    if frac_undef > 0.2:
        raise NumericError(
            f"risk undefined: {frac_undef:.0%} of grid points have no direction"
        )
    return float(
        cosine_dissimilarity(
            result.m_hat[result.defined], truth_vals[result.defined]
        ).mean()
    )


_ESTIMATOR_TOKENS = {
    "ideal": ("ideal", "none", "local_linear"),
    "naive": ("naive", "none", "local_linear"),
    "ce": ("ce", "gaussian", "local_linear"),
    "dkc": ("dk", "scenario", "local_constant"),
    "dkl": ("dk", "scenario", "local_linear"),
    "os": ("os", "scenario", "local_linear"),
}

SELECTORS = ("oracle", "cv", "cvce", "simex")

#: The thirteen-procedure comparison panel.
PANEL = (
    "ideal-oracle",
    "ideal-cv",
    "naive-oracle",
    "naive-cv",
    "ce-oracle",
    "ce-cvce",
    "ce-simex",
    "dkc-oracle",
    "dkc-simex",
    "dkl-oracle",
    "dkl-simex",
    "os-oracle",
    "os-simex",
)


def parse_procedure(name):
    """Split a procedure name into (estimator, family mode, weight order,
    selector) and validate the combination."""
    head, sep, selector = name.rpartition("-")
    if not sep or head not in _ESTIMATOR_TOKENS or selector not in SELECTORS:
        raise DomainError(f"unknown procedure {name!r}")
    estimator, family_mode, weight_order = _ESTIMATOR_TOKENS[head]
    if selector == "cvce" and estimator != "ce":
        raise DomainError("the cvce selector applies to the ce estimator only")
    if selector == "simex" and estimator == "ideal":
        raise DomainError("remeasurement selection needs a contaminated estimator")
    return estimator, family_mode, weight_order, selector


def _assumed_model(family_mode, scenario_model):
    sigma = scenario_model.sigma_u
    if family_mode == "none":
        return NO_ERROR
    if family_mode == "gaussian":
        return gaussian_error(sigma)
    if family_mode == "laplace":
        return laplace_error(sigma)
    return scenario_model


def task_seed(master_seed, scenario_index, replicate):
    """Seed sequence of one (scenario, replicate) job.

    Published so results can be recomputed outside run_matrix: the job
    spawns 1 + len(procedures) children, the first for data generation and
    one per procedure in listed order.
    """
    return np.random.SeedSequence(master_seed).spawn(scenario_index + 1)[
        scenario_index
    ].spawn(replicate + 1)[replicate]


def _run_procedure(proc, dataset, scenario_model, grid, points, truth_vals,
                   rng, folds, b, b_star):
    estimator, family_mode, weight_order, selector = parse_procedure(proc)
    model = _assumed_model(family_mode, scenario_model)
    cfg = FitConfig(
        estimator,
        h=float(grid[0]),
        error=model,
        weight_order=weight_order,
        b_star=b_star,
        seed=int(rng.integers(_SEED_MAX)),
    )
    if selector == "oracle":
        report = select_oracle(dataset, grid, cfg, truth_vals, points)
    elif selector == "cv":
        report = select_naive_cv(dataset, grid, cfg, folds=folds, rng=rng)
    elif selector == "cvce":
        report = select_cv_ce(dataset, grid, cfg, b=b, folds=folds, rng=rng)
    else:
        report = select_simex(dataset, grid, cfg, b=b, folds=folds, rng=rng)
    final_cfg = replace(cfg, h=report.selected, seed=int(rng.integers(_SEED_MAX)))
    result = fit(dataset, final_cfg, points)
    return report, result


def _run_task(payload):
    """One (scenario, replicate) job; top-level so worker processes can
    receive it."""
    (master_seed, si, rep, scenario, procedures, folds, b, b_star,
     window, candidates) = payload
    children = task_seed(master_seed, si, rep).spawn(1 + len(procedures))
    data_rng = np.random.default_rng(children[0])
    dataset = generate(scenario, data_rng)
    scenario_model = scenario.error_model()
    anchor = 1.06 * dataset.w.std() * scenario.n ** (-0.2)
    grid = make_grid(anchor, window[0], window[1], candidates)
    points = scenario.risk_grid()
    truth_vals = true_regression(scenario.regression, points)
    records = []
    fitted = []
    for pi, proc in enumerate(procedures):
        prng = np.random.default_rng(children[1 + pi])
        started = time.perf_counter()
        try:
            report, result = _run_procedure(
                proc, dataset, scenario_model, grid, points, truth_vals,
                prng, folds, b, b_star,
            )
            risk = empirical_risk(result, truth_vals)
        except CircfitError as exc:
            records.append({
                "scenario": scenario.name, "procedure": proc, "replicate": rep,
                "risk": np.nan, "h": np.nan, "boundary_hit": False,
                "undefined": -1, "seconds": time.perf_counter() - started,
                "status": type(exc).__name__, "message": str(exc),
            })
            continue
        records.append({
            "scenario": scenario.name, "procedure": proc, "replicate": rep,
            "risk": risk, "h": report.selected,
            "boundary_hit": report.boundary_hit,
            "undefined": int((~result.defined).sum()),
            "seconds": time.perf_counter() - started,
            "status": "ok", "message": "",
        })
        for x_pt, m_pt, ok in zip(points, result.m_hat, result.defined):
            fitted.append({
                "scenario": scenario.name, "procedure": proc, "replicate": rep,
                "x": float(x_pt), "m_hat": float(m_pt) if ok else np.nan,
                "defined": bool(ok),
            })
    return records, fitted


@dataclass(frozen=True)
class ExperimentResult:
    """Long-format experiment output: one record per (scenario, procedure,
    replicate) and one fitted row per grid point of each successful fit."""

    scenarios: tuple
    procedures: tuple
    replicates: int
    master_seed: int
    records: tuple
    fitted: tuple

    def risks(self, scenario_name, procedure):
        """Per-replicate risks of one cell (NaN where the run failed)."""
        vals = [
            r["risk"] for r in self.records
            if r["scenario"] == scenario_name and r["procedure"] == procedure
        ]
        return np.asarray(vals, dtype=np.float64)

    def column(self, scenario_name, procedure, key):
        return [
            r[key] for r in self.records
            if r["scenario"] == scenario_name and r["procedure"] == procedure
        ]

    def summary(self):
        """Per-cell aggregates; a cell with more than 10 percent failed
        replicates is flagged."""
        rows = []
        for sc in self.scenarios:
            for proc in self.procedures:
                cell = [
                    r for r in self.records
                    if r["scenario"] == sc.name and r["procedure"] == proc
                ]
                if not cell:
                    continue
                ok = [r for r in cell if r["status"] == "ok"]
                risks = np.asarray([r["risk"] for r in ok], dtype=np.float64)
                hs = np.asarray([r["h"] for r in ok], dtype=np.float64)
                rows.append({
                    "scenario": sc.name,
                    "procedure": proc,
                    "replicates": len(cell),
                    "failures": len(cell) - len(ok),
                    "flagged": (len(cell) - len(ok)) > 0.1 * len(cell),
                    "median_risk": float(np.median(risks)) if ok else np.nan,
                    "median_h": float(np.median(hs)) if ok else np.nan,
                    "seconds": float(sum(r["seconds"] for r in cell)),
                })
        return rows

    def records_csv(self, path):
        from . import dataio

        dataio.write_records(self.records, path)

    def fitted_csv(self, path):
        from . import dataio

        dataio.write_fitted(self.fitted, path)


def run_matrix(scenarios, procedures, replicates, seed=0, workers=1, folds=5,
               b=10, b_star=250, window=(0.35, 1.5), candidates=8):
    """Run every (scenario, replicate) cell through every procedure.

    The candidate grid of each replicate is geometric around the
    rule-of-thumb anchor 1.06 * sd(w) * n^(-1/5).  seed determines
    everything, including with workers > 1; per-replicate failures are
    recorded, not raised.
    """
    scenarios = tuple(scenarios)
    procedures = tuple(procedures)
    for proc in procedures:
        parse_procedure(proc)
    if not isinstance(replicates, (int, np.integer)) or replicates < 0:
        raise DomainError("replicates must be a nonnegative integer")
    payloads = [
        (int(seed), si, rep, sc, procedures, folds, b, b_star,
         tuple(window), candidates)
        for si, sc in enumerate(scenarios)
        for rep in range(int(replicates))
    ]
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            outputs = list(pool.map(_run_task, payloads))
    else:
        outputs = [_run_task(p) for p in payloads]
    records = []
    fitted = []
    for rec, fitrows in outputs:
        records.extend(rec)
        fitted.extend(fitrows)
    return ExperimentResult(
        scenarios=scenarios,
        procedures=procedures,
        replicates=int(replicates),
        master_seed=int(seed),
        records=tuple(records),
        fitted=tuple(fitted),
    )


def _preset_table():
    gauss08 = dict(family="gaussian", reliability=0.8)
    return {
        # Thirteen-procedure comparison at desk scale; the risk-ordering
        # acceptance checks read this cell.
        "fig4-desk": dict(
            scenarios=(Scenario(n=100, covariate="uniform",
                                regression="smooth", **gauss08),),
            procedures=PANEL,
            replicates=20,
            kwargs=dict(folds=5, b=10, b_star=250,
                        window=(0.35, 1.5), candidates=8),
        ),
        # Harder curve, oracle bandwidths only: replicate-corrected vs
        # deconvolution variants at n=250.
        "fig1-desk": dict(
            scenarios=(Scenario(n=250, covariate="normal",
                                regression="jump", **gauss08),),
            procedures=("naive-cv", "ce-oracle", "dkc-oracle", "dkl-oracle",
                        "os-oracle"),
            replicates=20,
            kwargs=dict(window=(0.2, 1.6), candidates=10),
        ),
        # Same hard curve under laplace noise; the gaussian-assuming ce cell
        # probes misspecification.
        "fig3-desk": dict(
            scenarios=(Scenario(n=100, covariate="normal",
                                regression="jump", family="laplace",
                                reliability=0.9),),
            procedures=("ce-oracle", "dkc-oracle", "dkl-oracle", "os-oracle"),
            replicates=20,
            kwargs=dict(window=(0.2, 1.6), candidates=10),
        ),
        # Bandwidth shrinkage: remeasurement-selected vs plain-CV dk fits.
        # The window reaches far enough down that plain CV can undersmooth;
        # clipping it would decide the comparison by fiat.
        "shrinkage-desk": dict(
            scenarios=(Scenario(n=100, covariate="normal",
                                regression="jump", **gauss08),),
            procedures=("dkl-cv", "dkl-simex"),
            replicates=20,
            kwargs=dict(folds=5, b=30, b_star=250,
                        window=(0.15, 2.2), candidates=12),
        ),
        # Two procedures, two replicates, seconds of wall clock; exists so
        # pipelines can be exercised without paying for a study.
        "smoke-desk": dict(
            scenarios=(Scenario(n=40, covariate="uniform",
                                regression="smooth", **gauss08),),
            procedures=("naive-cv", "dkl-cv"),
            replicates=2,
            kwargs=dict(folds=3, b=4, b_star=60,
                        window=(0.5, 1.4), candidates=4),
        ),
        # Selector cost comparison on a dense candidate grid, one replicate.
        "timing-desk": dict(
            scenarios=(Scenario(n=50, covariate="uniform",
                                regression="smooth", **gauss08),),
            procedures=("ce-cvce", "ce-simex", "os-simex"),
            replicates=1,
            kwargs=dict(folds=5, b=10, b_star=250,
                        window=(0.8, 1.3), candidates=50),
        ),
    }


PRESETS = tuple(sorted(_preset_table()))


def preset_spec(name):
    table = _preset_table()
    if name not in table:
        raise DomainError(f"unknown preset {name!r}; have {', '.join(PRESETS)}")
    return table[name]


def run_preset(name, seed=0, workers=1):
    spec = preset_spec(name)
    return run_matrix(
        spec["scenarios"],
        spec["procedures"],
        spec["replicates"],
        seed=seed,
        workers=workers,
        **spec["kwargs"],
    )
