"""Sanity-check the sampler against a closed-form posterior.

With one component, identity mixing, a Gaussian prior, and a fixed
observation noise gamma^2, the posterior is Gaussian with known mean and
variance -- so the sampler's output distribution can be checked exactly.

Two analytic corrections make the comparison sharp rather than approximate:

* the prior the sampler actually uses at the final level is the noised
  prior, so the prior variance is 1 + sigma_L^2, not 1;
* an unadjusted discretized chain with step eta targeting a Gaussian with
  variance v converges to variance v / (1 - eta/(2 v)), slightly inflated.

Run time: a few seconds.
"""

import numpy as np

from basis_sep.core import AnnealConfig, RngStream, Signal, geometric_schedule, step_size
from basis_sep.priors import IsotropicGaussianPrior
from basis_sep.sampler import SamplerConfig, basis_separate
from basis_sep.tasks import linear_sum


def main():
    prior = IsotropicGaussianPrior(0.0, 1.0, (1,))
    op = linear_sum([1.0], (1,))
    observed = Signal(np.array([2.0]), (1,))
    gamma2 = 0.25

    schedule = geometric_schedule(1.0, 0.1, 5)
    config = SamplerConfig(
        schedule, AnnealConfig(delta=4e-3, steps_per_level=300, gamma2=gamma2)
    )
    rng = RngStream(11)

    chains = 300
    finals = np.empty(chains)
    for chain in range(chains):
        components, _ = basis_separate(prior, op, observed, config, rng,
                                       chain=chain)
        finals[chain] = components.components[0, 0]

    # Closed form for the chain's stationary law.
    v_prior = 1.0 + float(schedule.sigmas[-1]) ** 2
    post_var = 1.0 / (1.0 / v_prior + 1.0 / gamma2)
    post_mean = post_var * (observed.data[0] / gamma2)
    eta = step_size(schedule, schedule.levels - 1, 4e-3)
    v_chain = post_var / (1.0 - eta / (2.0 * post_var))

    print(f"chains:            {chains}")
    print(f"sampled mean:      {finals.mean():.5f}   exact {post_mean:.5f}")
    print(f"sampled variance:  {finals.var(ddof=1):.5f}   exact {v_chain:.5f}")
    print(f"(undiscretized posterior variance would be {post_var:.5f};")
    print(f" the step size eta = {eta:.4g} inflates it by "
          f"{v_chain / post_var - 1.0:.2%})")


if __name__ == "__main__":
    main()
