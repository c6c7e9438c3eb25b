"""A miniature study end to end: experiment -> report -> charts.

Run: python demos/08_experiments.py      (about a minute on CPU)
Artifacts: demo_output/experiments/.

The full-scale studies are the four configs under configs/; this demo runs
the loss ablation at smoke scale so it finishes quickly.
"""

import os

from ivusgan.cli import main as cli_main

out = "demo_output/experiments"
os.makedirs(out, exist_ok=True)

cfg_path = os.path.join(out, "ablation_smoke.toml")
with open(cfg_path, "w") as fh:
    fh.write(f"""
[experiment]
name = "loss_ablation"
seeds = [0]
out_dir = "{out}/ablation"

[dataset]
n_train = 8
n_val = 4
n_test = 4

[phantom]
image_size = 32
seed = 0

[generator]
variant = "unet"
depth = 4
base_channels = 4

[discriminator]
n_down = 3
base_channels = 4

[train]
epochs = 10
batch_size = 4
""")

code = cli_main(["experiment", "--config", cfg_path])
print(f"\nexperiment exit code: {code}")

code = cli_main(["report", f"{out}/ablation", "--out", f"{out}/summary"])
print(f"report exit code: {code}")

print(f"\nreport CSV: {out}/ablation/report.csv")
with open(f"{out}/ablation/report.csv") as fh:
    for line in list(fh)[:4]:
        print("  " + line.rstrip()[:120])
print(f"charts: {out}/summary/")
