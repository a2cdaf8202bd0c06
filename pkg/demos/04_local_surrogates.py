"""Why a local linear approximation is a shaky explanation.

Fit least-squares lines to the same curve at the same center over different
windows: the slopes disagree, even in sign. Then ask both the surrogate and
a counterfactual search the same question - "what input gives score -10?" -
and check each answer against the real curve.
"""

from recourse.local_models import (
    demo_score_curve,
    emit_plot_data,
    fit_local_linear,
    scale_sweep,
    surrogate_prediction_vs_counterfactual,
)

CENTER = 1.0
WIDTHS = (0.1, 0.3, 1.0, 3.0)

print(f"local linear fits of the demo curve at x = {CENTER}:")
for fit in scale_sweep(demo_score_curve, CENTER, WIDTHS):
    hw = (fit.window[1] - fit.window[0]) / 2
    print(f"  window +/-{hw:<4}  slope {fit.slope:>9.2f}  rmse {fit.fit_rmse:>7.3f}")
print("same point, same curve - and the slope even flips sign with the window.\n")

tiny = fit_local_linear(demo_score_curve, CENTER, 0.05, 51)
comp = surrogate_prediction_vs_counterfactual(demo_score_curve, CENTER, tiny, -10.0)
print("question: what x would produce a score of -10?")
print(f"  surrogate line says  x = {comp.surrogate_x:.3f}; "
      f"the curve actually gives {comp.surrogate_true_score:.2f} there")
print(f"  counterfactual search says x = {comp.cf_x:.3f}; "
      f"the curve gives {comp.cf_true_score:.3f} - within tolerance of -10")

summary = emit_plot_data("recourse_data/surrogate_demo", demo_score_curve,
                         center=CENTER, half_widths=WIDTHS, target=-10.0)
print(f"\nplot-ready CSVs written to {summary['out_dir']} "
      f"(curve.csv, fits.csv, counterfactual.csv)")
