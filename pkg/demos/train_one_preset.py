"""
Training one model
==================

A short run of the STFT preset on the bundled digits, then a look at
the reconstructions and a few samples from the prior.
"""

from stftvae import data, vae
from stftvae import experiments as E

run = E.RunConfig(preset="STFT", epochs=2, subset=1000, data_source="sample", out_dir="demo_runs")
print(run.loss_config())

train = E.load_split(run, "train")
res = E.train(run, train)
for row in res.log_rows:
    print({k: round(v, 4) for k, v in row.items()})

test = E.load_split(run, "test")
psnr, ssim, n, _ = E.evaluate(E.reconstruct_fn(res.params), test.images)
print(f"test PSNR {psnr:.2f} dB, SSIM {ssim:.3f} over {n} digits")

# first row originals, second row reconstructions
pairs = list(test.images[:8]) + list(vae.reconstruct(res.params, test.images[:8]))
data.write_grid_png(pairs, 8, run.run_dir() / "reconstructions.png")
data.write_grid_png(vae.generate(res.params, 16, seed=0), 4, run.run_dir() / "samples.png")
print("images in", run.run_dir())
