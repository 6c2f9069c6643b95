"""Separate additive mixtures of two toy images.

Ten 8x8 grayscale images are mixed pairwise as m = 0.5*x1 + 0.5*x2.  A
point-mass prior over the ten images drives the annealed sampler, which
recovers both components from each mixture.  Estimated components are
matched to the ground truth by best PSNR over permutations before scoring.

Artifacts (PGM images for the first case) are written next to this script
under out/02_toy_image_separation/.

Run time: a few seconds.
"""

from pathlib import Path

import numpy as np

from basis_sep.core import AnnealConfig, RngStream, Signal, geometric_schedule
from basis_sep.dataio import write_pnm
from basis_sep.metrics import match_components, psnr, reconstruction_error
from basis_sep.priors import EmpiricalDiracPrior
from basis_sep.sampler import SamplerConfig, basis_separate
from basis_sep.tasks import linear_sum, make_mixture_set
from basis_sep.toys import toy_images

OUT = Path(__file__).resolve().parent / "out" / "02_toy_image_separation"


def main():
    images = toy_images(10)
    shape = images[0].shape
    rows = np.stack([s.data for s in images])
    prior = EmpiricalDiracPrior(rows, shape)
    op = linear_sum([0.5, 0.5], shape)
    cases = make_mixture_set(images, 10, op, seed=0)

    config = SamplerConfig(geometric_schedule(1.0, 0.01, 10), AnnealConfig())
    rng = RngStream(0)

    OUT.mkdir(parents=True, exist_ok=True)
    all_psnr = []
    for index, case in enumerate(cases):
        estimate, _ = basis_separate(prior, op, case.mixture, config, rng,
                                     chain=index)
        perm = match_components(estimate, case.ground_truth)
        matched = estimate.components[list(perm)]
        values = [psnr(matched[j], case.ground_truth.components[j])
                  for j in range(2)]
        recon_max, _ = reconstruction_error(case.mixture, estimate, op)
        all_psnr.extend(values)
        print(f"case {index}: sources {case.source_indices}  "
              f"PSNR {values[0]:6.2f} / {values[1]:6.2f} dB  "
              f"mixture residual {recon_max:.2e}")
        if index == 0:
            write_pnm(OUT / "mixture.pgm", case.mixture)
            for j in range(2):
                write_pnm(OUT / f"component{j}.pgm",
                          Signal(matched[j], shape))
                write_pnm(OUT / f"truth{j}.pgm",
                          Signal(case.ground_truth.components[j], shape))

    print(f"\nmean matched PSNR over {len(all_psnr)} components: "
          f"{np.mean(all_psnr):.2f} dB")
    print("(a single chain occasionally commits to the wrong pair -- large "
          "residual, low PSNR;\n running several chains and keeping the "
          "best posterior log-density repairs this,\n as the colorization "
          "demo does with best_of)")
    print(f"artifacts for case 0 written to {OUT}")


if __name__ == "__main__":
    main()
