"""When does climbing the confidence landscape help correctness?

Synthetic landscapes with closed-form Gaussian smoothing make the two
central facts checkable by direct computation.

Alignment: one ascent step on smoothed confidence raises smoothed
correctness exactly when the two gradients have positive dot product.

The trap: if the strongest confidence maximizer sits outside the correct
region, every trajectory started in its basin converges there, ending
maximally confident and almost surely wrong, with confidence rising
monotonically the whole way (nothing inside the ascent signals a problem).
"""

import numpy as np

from ltpo.landscape import (
    BallRegion,
    GaussianBump,
    HalfSpaceRegion,
    Landscape,
    alignment_check,
    alignment_trials,
    flow_integrate,
    smoothed_corr_exact,
    trap_demo,
)

# --- the alignment condition ------------------------------------------------
aligned = Landscape(
    dimension=2,
    bumps=(GaussianBump(np.zeros(2), height=1.0, width=1.0),),
    corr_region=BallRegion(np.array([[0.0, 0.0]]), np.array([1.0])),
)
rep = alignment_check(aligned, [0.8, 0.2], sigma=0.5, eta=1e-4)
print(f"correct region on the confidence peak: dot={rep.dot:+.5f}, "
      f"corr change={rep.observed_delta_corr:+.2e}  (both positive)")

opposed = Landscape(
    dimension=2,
    bumps=(GaussianBump(np.zeros(2), height=1.0, width=1.0),),
    corr_region=HalfSpaceRegion(normal=np.array([-1.0, 0.0]), offset=-2.0),
)
rep = alignment_check(opposed, [1.0, 0.0], sigma=0.5, eta=1e-4)
print(f"correct region behind the climber:     dot={rep.dot:+.5f}, "
      f"corr change={rep.observed_delta_corr:+.2e}  (both negative)")

trials = alignment_trials(500, seed=0, eta=1e-4, sigma=0.5)
informative = [t for t in trials if t.informative]
rate = sum(t.agrees for t in informative) / len(informative)
print(f"500 random landscapes: sign agreement "
      f"{rate:.1%} on {len(informative)} informative trials")

# --- the confidently-incorrect trap ------------------------------------------
print("\ntrap demonstration (tall wrong bump at (-2,0), correct ball at (2,0)):")
report = trap_demo(trials=20, seed=0)
print(f"  trap point {np.round(report.trap_point, 4)}: "
      f"correctness {report.trap_corr:.2e}")
print(f"  good point {np.round(report.good_point, 4)}: "
      f"correctness {report.good_corr:.4f}")
print(f"  basin starts trapped: {report.trapped}/{report.trials}, "
      f"confidence monotone along all: {report.monotone}/{report.trials}")
print(f"  control starts reach correctness >= "
      f"{report.control_corr_values.min():.4f}")

# one trajectory in detail: confidence up, correctness down
traj = flow_integrate(report.landscape, [-1.1, 0.6], step_size=0.05,
                      max_steps=5000, grad_tol=1e-8, sigma=0.5)
idx = np.linspace(0, len(traj.points) - 1, 8, dtype=int)
print("\n  step     conf      corr")
for i in idx:
    print(f"  {i:>4} {traj.conf_values[i]:>9.5f} {traj.corr_values[i]:>9.2e}")
print(f"  terminal point {np.round(traj.points[-1], 4)}, "
      f"correctness {smoothed_corr_exact(report.landscape, traj.points[-1], 0.5):.2e}")
