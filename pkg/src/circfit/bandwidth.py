"""Bandwidth selection.

Four selectors, one report type:

* select_naive_cv: k-fold cross-validation of whatever estimator the config
  names, training and validating on the observed pairs;
* select_simex: the two-stage remeasurement scheme - add fresh noise to the
  covariate (once, then twice), cross-validate each contaminated layer
  against the previous one, and extrapolate h1^2 / h2 back to the error-free
  level;
* select_cv_ce: cross-validation built from replicate-averaged complex
  weights evaluated at imaginary-noise perturbations of the validation
  points, so held-out smoothing and validation targets are corrected in one
  pass;
* select_oracle: minimizes the true average angular risk on a reference
  grid (simulation use only).

Fold splits are drawn once per selection (seeded shuffle) and shared across
candidates and stages; all replicate noise is drawn once up front, so the
candidate axis sees common random numbers.  Ties prefer the smallest
bandwidth; an arg-min on the grid edge is flagged and logged.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .angles import cosine_dissimilarity
from .error_models import sample_error
from .exceptions import DomainError, NumericError, SelectionError
from .fit import Dataset, components_to_angles, evaluate_components, fit
from .weights import CeReplicateEngine, check_imag_noise

logger = logging.getLogger("circfit")

_SEED_MAX = 2**63


@dataclass(frozen=True)
class BandwidthReport:
    """Outcome of one selection: per-candidate losses and the chosen h.

    For the two-stage selector, losses are the first-stage traces,
    losses_stage2 the second stage, stage_selected the (h1, h2) pair and
    selected = h1^2 / h2 (which may leave the candidate window; that is the
    extrapolation working as intended).  fit_invocations counts estimator
    evaluations (one per trained fold)."""

    selector: str
    candidates: np.ndarray
    losses: np.ndarray
    selected: float
    boundary_hit: bool
    losses_stage2: np.ndarray = None
    stage_selected: tuple = None
    fit_invocations: int = 0

    def to_csv(self, path):
        from . import dataio

        dataio.write_bandwidth_report(self, path)


def make_grid(anchor, lo, hi, count):
    """Geometric candidate grid: count points from lo*anchor to hi*anchor."""
    if not np.isfinite(anchor) or anchor <= 0.0:
        raise DomainError("anchor bandwidth must be positive")
    if not (np.isfinite(lo) and np.isfinite(hi)) or not 0.0 < lo < hi:
        raise DomainError("window must satisfy 0 < lo < hi")
    if not isinstance(count, (int, np.integer)) or count < 2:
        raise DomainError("count must be an integer >= 2")
    return np.geomspace(lo * anchor, hi * anchor, int(count))


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise DomainError("candidate grid must be a nonempty vector")
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0.0):
        raise DomainError("candidate bandwidths must be positive")
    if np.any(np.diff(grid) <= 0.0):
        raise DomainError("candidate grid must be strictly increasing")
    return grid


def _fold_pairs(n, folds, rng):
    """Seeded shuffle split into (train_idx, valid_idx) pairs."""
    if not isinstance(folds, (int, np.integer)) or not 2 <= folds <= n:
        raise DomainError("folds must be an integer in [2, n]")
    perm = rng.permutation(n)
    parts = np.array_split(perm, folds)
    pairs = []
    for k, va in enumerate(parts):
        tr = np.concatenate([parts[i] for i in range(len(parts)) if i != k])
        pairs.append((np.sort(tr), np.sort(va)))
    return pairs


def _fold_loss(theta_va, g1, g2):
    m, defined, _ = components_to_angles(g1, g2)
    if not defined.any():
        raise SelectionError("all predictions in a fold are undefined")
    loss = np.ones(theta_va.size)
    loss[defined] = cosine_dissimilarity(theta_va[defined], m[defined])
    return float(loss.mean())


def _cv_total(theta, train_cov, valid_cov, fold_pairs, config, x_cov=None):
    """Sum over folds of the fold-mean angular loss.

    train_cov feeds the held-in fit, valid_cov the held-out evaluation
    points; they differ between remeasurement stages.  x_cov, when given,
    becomes the true covariate of the training subsets (ideal estimator).
    """
    total = 0.0
    for tr, va in fold_pairs:
        ds = Dataset(
            theta[tr],
            train_cov[tr],
            x=None if x_cov is None else x_cov[tr],
        )
        g1, g2 = evaluate_components(ds, config, valid_cov[va])
        total += _fold_loss(theta[va], g1, g2)
    return total


def cv_loss(dataset, config, folds=5, rng=None):
    """Cross-validation loss of one configuration (shared-fold convenience)."""
    rng = np.random.default_rng(0) if rng is None else rng
    pairs = _fold_pairs(dataset.n, folds, rng)
    if config.estimator == "ideal":
        if dataset.x is None:
            raise DomainError("the ideal estimator needs the true covariate")
        total = _cv_total(dataset.theta, dataset.x, dataset.x, pairs, config, dataset.x)
    else:
        total = _cv_total(dataset.theta, dataset.w, dataset.w, pairs, config)
    return total / len(pairs)


def _finish(selector, grid, losses, invocations, losses2=None):
    stages = None
    idx = int(np.argmin(losses))
    if losses2 is None:
        selected = float(grid[idx])
        boundary = idx in (0, grid.size - 1)
    else:
        idx2 = int(np.argmin(losses2))
        h1, h2 = float(grid[idx]), float(grid[idx2])
        selected = h1 * h1 / h2
        boundary = idx in (0, grid.size - 1) or idx2 in (0, grid.size - 1)
        stages = (h1, h2)
    if boundary:
        logger.warning(
            "selector %s: arg-min on the candidate grid boundary "
            "(selected h=%.6g); widen the window", selector, selected
        )
    return BandwidthReport(
        selector=selector,
        candidates=grid,
        losses=np.asarray(losses),
        selected=selected,
        boundary_hit=boundary,
        losses_stage2=None if losses2 is None else np.asarray(losses2),
        stage_selected=stages,
        fit_invocations=invocations,
    )


def select_naive_cv(dataset, grid, config, folds=5, rng=None):
    """Pick the candidate minimizing plain k-fold CV loss of the configured
    estimator on the observed data."""
    grid = _check_grid(grid)
    rng = np.random.default_rng(0) if rng is None else rng
    pairs = _fold_pairs(dataset.n, folds, rng)
    if config.estimator == "ideal":
        if dataset.x is None:
            raise DomainError("the ideal estimator needs the true covariate")
        cov, xcov = dataset.x, dataset.x
    else:
        cov, xcov = dataset.w, None
    losses = np.empty(grid.size)
    for i, h in enumerate(grid):
        losses[i] = _cv_total(
            dataset.theta, cov, cov, pairs, replace(config, h=float(h)), xcov
        ) / len(pairs)
    return _finish("naive-cv", grid, losses, len(pairs) * grid.size)


def select_simex(dataset, grid, config, b=30, folds=5, rng=None):
    """Two-stage remeasurement selection.

    Stage 1 smooths noise-added copies w + u* and validates at the observed
    w; stage 2 smooths twice-contaminated copies and validates at the
    first-layer points.  Per-replicate CV losses are averaged, each stage is
    minimized on the same grid with the same folds, and the selected
    bandwidth is the geometric extrapolation h1^2 / h2.
    """
    grid = _check_grid(grid)
    if config.estimator == "ideal":
        raise DomainError("remeasurement selection needs a contaminated estimator")
    if not isinstance(b, (int, np.integer)) or b < 1:
        raise DomainError("b must be a positive integer")
    rng = np.random.default_rng(0) if rng is None else rng
    pairs = _fold_pairs(dataset.n, folds, rng)
    streams = rng.spawn(2 * int(b))
    model = config.error
    theta, w, n = dataset.theta, dataset.w, dataset.n
    loss1 = np.zeros(grid.size)
    loss2 = np.zeros(grid.size)
    invocations = 0
    for i in range(int(b)):
        s1, s2 = streams[2 * i], streams[2 * i + 1]
        w_once = w + sample_error(model, s1, n)
        w_twice = w_once + sample_error(model, s2, n)
        seed1 = int(s1.integers(_SEED_MAX))
        seed2 = int(s2.integers(_SEED_MAX))
        for c, h in enumerate(grid):
            cfg1 = replace(config, h=float(h), seed=seed1)
            cfg2 = replace(config, h=float(h), seed=seed2)
            loss1[c] += _cv_total(theta, w_once, w, pairs, cfg1)
            loss2[c] += _cv_total(theta, w_twice, w_once, pairs, cfg2)
            invocations += 2 * len(pairs)
    loss1 /= b * len(pairs)
    loss2 /= b * len(pairs)
    return _finish("simex", grid, loss1, invocations, loss2)


def select_cv_ce(dataset, grid, config, b=30, folds=5, rng=None):
    """Error-aware CV for the complex-replicate estimator.

    Held-out fits use replicate-averaged complex weights; validation points
    are perturbed as w_j + i sigma z, averaged over b perturbations before
    the angle is formed, so both sides of the loss see the same correction.
    The replicate matrix of each fold is drawn once and shared across
    candidates (common random numbers); imaginary parts are discarded after
    the noise-consistency check.
    """
    grid = _check_grid(grid)
    if config.estimator != "ce":
        raise DomainError("this selector is specific to the ce estimator")
    if not isinstance(b, (int, np.integer)) or b < 1:
        raise DomainError("b must be a positive integer")
    rng = np.random.default_rng(0) if rng is None else rng
    pairs = _fold_pairs(dataset.n, folds, rng)
    sigma = config.error.sigma_u
    theta, w = dataset.theta, dataset.w
    if sigma == 0.0:
        losses = np.empty(grid.size)
        for i, h in enumerate(grid):
            losses[i] = _cv_total(
                theta, w, w, pairs, replace(config, h=float(h))
            ) / len(pairs)
        return _finish("cv-ce", grid, losses, len(pairs) * grid.size)
    z_val = rng.standard_normal((dataset.n, int(b)))
    z_train = [rng.standard_normal((tr.size, int(config.b_star))) for tr, _ in pairs]
    redraws = rng.spawn(len(pairs) * grid.size)
    losses = np.zeros(grid.size)
    invocations = 0
    noise_flags = 0
    evaluations = 0
    for c, h in enumerate(grid):
        for k, (tr, va) in enumerate(pairs):
            engine = CeReplicateEngine(
                w[tr],
                sigma,
                float(h),
                rng=redraws[c * len(pairs) + k],
                z=z_train[k],
            )
            sin_t = np.sin(theta[tr])
            cos_t = np.cos(theta[tr])
            g1 = np.empty(va.size)
            g2 = np.empty(va.size)
            for jj, j in enumerate(va):
                wavg = np.zeros(tr.size, dtype=np.complex128)
                imsq = np.zeros(tr.size)
                for rep in range(int(b)):
                    target = complex(w[j], sigma * z_val[j, rep])
                    avg, _ = engine.weights_at(target, assert_imag=False)
                    wavg += avg
                    imsq += avg.imag**2
                wavg /= b
                # During selection a failed noise check only flags the
                # evaluation: with few perturbations the check's standard
                # error is itself noisy, and a systematic breakdown shows
                # up in the loss regardless.  Estimation keeps it fatal.
                try:
                    check_imag_noise(wavg, imsq, int(b), f"validation w={w[j]:g}")
                except NumericError:
                    noise_flags += 1
                evaluations += 1
                g1[jj] = wavg.real @ sin_t
                g2[jj] = wavg.real @ cos_t
            losses[c] += _fold_loss(theta[va], g1, g2)
            invocations += 1
    losses /= len(pairs)
    if noise_flags:
        logger.warning(
            "selector cv-ce: imaginary-noise consistency tripped at %d of %d "
            "validation evaluations", noise_flags, evaluations
        )
    return _finish("cv-ce", grid, losses, invocations)


def select_oracle(dataset, grid, config, truth, points):
    """Candidate minimizing the true mean angular risk on a reference grid.

    truth is the true regression evaluated at points (or a callable).
    Candidates whose fit leaves more than 20 percent of the grid undefined
    are excluded (infinite risk); if that removes every candidate the
    selection fails.
    """
    grid = _check_grid(grid)
    points = np.ascontiguousarray(points, dtype=np.float64)
    truth_vals = np.asarray(truth(points) if callable(truth) else truth, dtype=np.float64)
    if truth_vals.shape != points.shape:
        raise DomainError("truth values must align with the reference points")
    losses = np.full(grid.size, np.inf)
    for i, h in enumerate(grid):
        res = fit(dataset, replace(config, h=float(h)), points)
        frac_undef = 1.0 - res.defined.mean()
        if frac_undef > 0.2:
            continue
        losses[i] = float(
            cosine_dissimilarity(res.m_hat[res.defined], truth_vals[res.defined]).mean()
        )
    if not np.isfinite(losses).any():
        raise SelectionError("every candidate left the fit mostly undefined")
    return _finish("oracle", grid, losses, grid.size)


def amise_h(beta, var_integral, bias_integral, n):
    """Closed-form rate-optimal bandwidth
    ((1 + 2 beta) var_integral / (4 n bias_integral)) ^ (1 / (5 + 2 beta)).

    beta is the smoothness exponent of the error law (0 for none, effectively
    2 for laplace); the two integrals are the user-supplied variance and
    squared-bias constants.
    """
    if not np.isfinite(beta) or beta < 0.0:
        raise DomainError("beta must be nonnegative")
    if not (np.isfinite(var_integral) and var_integral > 0.0):
        raise DomainError("var_integral must be positive")
    if not (np.isfinite(bias_integral) and bias_integral > 0.0):
        raise DomainError("bias_integral must be positive")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError("n must be a positive integer")
    return float(
        ((1.0 + 2.0 * beta) * var_integral / (4.0 * n * bias_integral))
        ** (1.0 / (5.0 + 2.0 * beta))
    )
