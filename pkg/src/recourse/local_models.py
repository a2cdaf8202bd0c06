"""Local linear surrogates of a 1-D score function, and why they mislead.

Fitting a least-squares line to a nonlinear score curve gives answers whose
slope - even whose sign - depends on the window the fit is computed over. A
counterfactual search on the same curve answers "what input yields this
score" directly and carries its own accuracy check. The helpers here fit
surrogates at several scales, run both kinds of answer side by side, and
emit plot-ready CSV data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FeatureSpace
from .distances import DistanceSpec, FeatureStats
from .search import CfQuery, LambdaSchedule, solve_best


def demo_score_curve(x):
    """Bundled demo: damped oscillation on a rising trend.

    Chosen so nearby fitting windows produce opposite-sign slopes while the
    broad trend stays positive.
    """
    x = np.asarray(x, dtype=float)
    return 40.0 * np.sin(3.0 * x) * np.exp(-0.1 * x * x) + 8.0 * x


@dataclass
class SurrogateFit:
    center: float
    window: tuple[float, float]
    slope: float
    intercept: float
    fit_rmse: float
    n_samples: int

    def predict(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


def _eval_curve(score_fn, xs: np.ndarray) -> np.ndarray:
    try:
        ys = np.asarray(score_fn(xs), dtype=float)
        if ys.shape == xs.shape:
            return ys
    except (TypeError, ValueError):
        pass
    return np.array([float(score_fn(float(x))) for x in xs])  # scalar-only callables


def fit_local_linear(score_fn, center: float, half_width: float,
                     n_samples: int = 101) -> SurrogateFit:
    """Ordinary least squares over uniform samples in a window around center."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    xs = np.linspace(center - half_width, center + half_width, n_samples)
    if np.allclose(xs, xs[0]):
        raise ValueError("degenerate sample abscissae")
    ys = _eval_curve(score_fn, xs)
    slope, intercept = np.polyfit(xs, ys, 1)
    rmse = float(np.sqrt(np.mean((slope * xs + intercept - ys) ** 2)))
    return SurrogateFit(
        center=float(center),
        window=(float(xs[0]), float(xs[-1])),
        slope=float(slope),
        intercept=float(intercept),
        fit_rmse=rmse,
        n_samples=n_samples,
    )


def scale_sweep(score_fn, center: float, half_widths,
                n_samples: int = 101) -> list[SurrogateFit]:
    """One local fit per window half-width."""
    half_widths = list(half_widths)
    if len(half_widths) < 2:
        raise ValueError("need at least two half-widths to compare scales")
    return [fit_local_linear(score_fn, center, hw, n_samples) for hw in half_widths]


def sweep_summary(fits) -> list[dict]:
    return [
        {
            "half_width": (f.window[1] - f.window[0]) / 2.0,
            "slope": f.slope,
            "sign": int(np.sign(f.slope)),
            "rmse": f.fit_rmse,
        }
        for f in fits
    ]


@dataclass
class SurrogateVsCounterfactual:
    """Both answers to "what input would produce this target score?"."""

    target: float
    surrogate_x: float | None
    surrogate_true_score: float | None
    surrogate_unreachable: bool
    cf_x: float | None
    cf_true_score: float | None
    cf_converged: bool

    def to_doc(self) -> dict:
        return {
            "target": self.target,
            "surrogate": {
                "unreachable": self.surrogate_unreachable,
                "x": self.surrogate_x,
                "true_score": self.surrogate_true_score,
            },
            "counterfactual": {
                "converged": self.cf_converged,
                "x": self.cf_x,
                "true_score": self.cf_true_score,
            },
        }


class _Callable1DModel:
    """Adapter exposing forward / input_gradient for a scalar score function."""

    def __init__(self, score_fn, h: float = 1e-5):
        self.score_fn = score_fn
        self.h = h

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xs = x.reshape(-1)
        ys = _eval_curve(self.score_fn, xs)
        return float(ys[0]) if single else ys

    def input_gradient(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xs = x.reshape(-1)
        g = (_eval_curve(self.score_fn, xs + self.h)
             - _eval_curve(self.score_fn, xs - self.h)) / (2 * self.h)
        return g.reshape(-1, 1) if not single else np.array([g[0]])


def counterfactual_1d(score_fn, center: float, target: float,
                      search_radius: float = 6.0, tolerance: float = 0.01,
                      n_restarts: int = 12, seed: int = 0):
    """Counterfactual search on a 1-D curve, capped to a box around center."""
    lo, hi = center - search_radius, center + search_radius
    stats = FeatureStats(
        median=[center], mad=[search_radius], std=[search_radius],
        min=[lo], max=[hi], fitted_on=2,
    )
    space = FeatureSpace.identity(1, stats=stats)
    query = CfQuery(
        x_original=np.array([center]),
        target_score=target,
        distance=DistanceSpec("unnormalized_sq_euclidean"),
        n_restarts=n_restarts,
        tolerance_eps=tolerance,
        cap_to_training_range=True,
        rng_seed=seed,
        schedule=LambdaSchedule(adam_step_size=0.1),
    )
    return solve_best(_Callable1DModel(score_fn), query, space)


def surrogate_prediction_vs_counterfactual(
    score_fn, center: float, fit: SurrogateFit, target: float,
    search_radius: float = 6.0, tolerance: float = 0.01, seed: int = 0,
) -> SurrogateVsCounterfactual:
    """Answer a target-score question with the surrogate and with a search.

    The surrogate branch inverts the fitted line and reports the TRUE score
    at that input; a flat line makes every target except its own intercept
    unreachable. The counterfactual branch searches the curve itself, so its
    reported score is within tolerance whenever it converges.
    """
    if abs(fit.slope) < 1e-12:
        surrogate_x = None
        surrogate_true = None
        unreachable = True
    else:
        surrogate_x = (target - fit.intercept) / fit.slope
        surrogate_true = float(_eval_curve(score_fn, np.array([surrogate_x]))[0])
        unreachable = False

    result = counterfactual_1d(score_fn, center, target,
                               search_radius=search_radius,
                               tolerance=tolerance, seed=seed)
    if result.converged:
        cf_x = float(result.x_prime[0])
        cf_true = float(result.achieved_score)
    else:
        cf_x, cf_true = None, None
    return SurrogateVsCounterfactual(
        target=float(target),
        surrogate_x=surrogate_x,
        surrogate_true_score=surrogate_true,
        surrogate_unreachable=unreachable,
        cf_x=cf_x,
        cf_true_score=cf_true,
        cf_converged=bool(result.converged),
    )


def emit_plot_data(out_dir, score_fn=demo_score_curve, center: float = 1.0,
                   half_widths=(0.3, 1.0, 3.0), target: float | None = None,
                   curve_range: tuple[float, float] = (-4.0, 5.0),
                   n_curve: int = 601) -> dict:
    """Write curve/fit/counterfactual CSVs for downstream plotting.

    Files: ``curve.csv`` (x, score), ``fits.csv`` (one row per window with
    slope, intercept, rmse and line endpoints), ``counterfactual.csv``
    (the found point and its true score). Returns a small summary dict.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    xs = np.linspace(curve_range[0], curve_range[1], n_curve)
    ys = _eval_curve(score_fn, xs)
    with (out_dir / "curve.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "score"])
        w.writerows(zip(xs.round(6), ys.round(6)))

    fits = scale_sweep(score_fn, center, half_widths)
    with (out_dir / "fits.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["half_width", "window_lo", "window_hi", "slope", "intercept",
                    "rmse", "line_x0", "line_y0", "line_x1", "line_y1"])
        for f in fits:
            lo, hi = f.window
            w.writerow([
                round((hi - lo) / 2, 6), round(lo, 6), round(hi, 6),
                round(f.slope, 6), round(f.intercept, 6), round(f.fit_rmse, 6),
                round(lo, 6), round(float(f.predict(lo)), 6),
                round(hi, 6), round(float(f.predict(hi)), 6),
            ])

    if target is None:
        target = float(ys.min() + 0.25 * (ys.max() - ys.min()))
    comparison = surrogate_prediction_vs_counterfactual(
        score_fn, center, fits[0], target
    )
    with (out_dir / "counterfactual.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "cf_x", "cf_true_score", "surrogate_x",
                    "surrogate_true_score"])
        w.writerow([
            round(target, 6),
            None if comparison.cf_x is None else round(comparison.cf_x, 6),
            None if comparison.cf_true_score is None else round(comparison.cf_true_score, 6),
            None if comparison.surrogate_x is None else round(comparison.surrogate_x, 6),
            None if comparison.surrogate_true_score is None else round(comparison.surrogate_true_score, 6),
        ])

    signs = {int(np.sign(f.slope)) for f in fits}
    return {
        "out_dir": str(out_dir),
        "n_windows": len(fits),
        "slopes": [f.slope for f in fits],
        "opposite_sign_slopes": (1 in signs and -1 in signs),
        "comparison": comparison.to_doc(),
    }
