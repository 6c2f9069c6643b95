"""Measure how the smoothed score's magnitude scales with the noise level.

For a prior smoothed with Gaussian noise of scale sigma, the score at a
noised sample is dominated by -eps/sigma (eps the noise draw) whenever sigma
is large against the prior's own spread, so sigma * RMS||score|| sits on a
plateau at sqrt(d).  Once sigma becomes comparable to the prior's spread the
proportionality breaks and the curve falls below the plateau.

Two priors in d = 64 illustrate both regimes:

* an exactly zero-width point-mass prior never reaches the breakdown --
  the plateau extends to every level;
* the same spikes widened to standard deviation 0.02 break down as soon as
  sigma approaches that width.

This scaling is what motivates step sizes proportional to sigma^2: it keeps
the per-level signal-to-noise ratio of the score term roughly constant.

Run time: a few seconds.
"""

import numpy as np

from basis_sep.core import geometric_schedule
from basis_sep.metrics import grad_proportionality_experiment
from basis_sep.priors import EmpiricalDiracPrior, GmmPrior
from basis_sep.toys import toy_images


def main():
    images = toy_images(10)
    rows = np.stack([s.data for s in images])
    shape = images[0].shape
    schedule = geometric_schedule(1.0, 0.01, 10)

    point_mass = EmpiricalDiracPrior(rows, shape)
    widened = GmmPrior(np.full(10, 0.1), rows, np.full(10, 4e-4), shape)

    rng = np.random.default_rng(0)
    exact = grad_proportionality_experiment(point_mass, schedule, 2000, rng,
                                            dataset=rows)
    rng = np.random.default_rng(0)
    smooth = grad_proportionality_experiment(widened, schedule, 2000, rng)

    target = np.sqrt(64.0)
    print(f"plateau reference sqrt(d) = {target:.3f}; "
          f"widened prior std = 0.02\n")
    print("level   sigma     sigma*RMS (width 0)   sigma*RMS (width 0.02)")
    for level, sigma in enumerate(schedule.sigmas):
        print(f"{level:5d}   {sigma:7.4f}   {exact[level]:19.3f}   "
              f"{smooth[level]:22.3f}")
    print("\nthe zero-width prior stays on the plateau at every level;")
    print("the widened prior leaves it once sigma nears 0.02.")


if __name__ == "__main__":
    main()
