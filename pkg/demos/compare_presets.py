"""
Comparing reconstruction losses
===============================

Train every preset from scratch with a few seeds and tabulate test
PSNR and SSIM. With the defaults below this is the desk-scale run
(10 epochs on 4000 digits, about an hour on one core); pass a smaller
epoch count on the command line for a quick look.
"""

import sys

from stftvae import experiments as E

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 10
run = E.RunConfig(epochs=epochs, data_source="sample", out_dir="compare_runs")
reports = E.run_table(run, list(E.PRESETS), seeds=[0, 1, 2])

print(f"{'preset':10} {'PSNR':>7} {'SSIM':>6}   full-protocol reference")
for name, (p, s) in E.mean_by_preset(reports).items():
    ref = E.REFERENCE_TABLE[name]
    print(f"{name:10} {p:7.2f} {s:6.3f}   {ref[0]:.2f} / {ref[1]:.3f}")

# sample grids for each preset, from the seed-0 runs
E.cmd_compare(run, list(E.PRESETS))
