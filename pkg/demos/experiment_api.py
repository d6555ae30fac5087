"""Drive the experiment recipes from Python with small overrides.

The same recipes back the command line, e.g.

    izosga sweep --config fig1_sweep.toml --out results/fig1 --seeds 10 --svg

Run: python demos/experiment_api.py   (about a minute)
"""
import tempfile
from pathlib import Path

from izosga.experiments import load_experiment, run_train_deploy

out = Path(tempfile.mkdtemp()) / "train-deploy"
spec = load_experiment("fig3_train_deploy.toml", {"seeds": 2, "deploy_iterations": 200})
spec.optimizer.iterations = 800
summary = run_train_deploy(spec, out, svg=True)

print("trained terminal mean", round(summary["train"]["final_window_mean"], 3))
for row in summary["deploy"]:
    print(f"deploy budget {row['budget']}: {row['mean']:.3f} bits")
print("files:", ", ".join(sorted(p.name for p in out.iterdir())))
