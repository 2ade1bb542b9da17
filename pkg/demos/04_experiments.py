"""Small versions of the statistical experiments, with reports written to disk."""

import sys
import tempfile

from beta_adic.experiments import ExperimentConfig, run_experiment, write_report
from beta_adic.plotting import emit_plot

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="beta_adic_")

# Birkhoff sums of the first digit are Gaussian after centring.
clt = run_experiment(ExperimentConfig(kind="clt", n=2000, trials=6000, seed=1))
print("CLT", clt.verdict, clt.summary["ks_normal"])

# Normalized occupation sums; both candidate limit laws are reported.
ds = run_experiment(ExperimentConfig(kind="ds", n=20000, trials=400, seed=1))
print("DS", ds.verdict, ds.summary["ks_exp_half_chi2"], ds.summary["ks_exp_chi2"])

# Sup over mean of occupation sums along a schedule of orbit lengths.
bre = run_experiment(ExperimentConfig(kind="bre", n=10**5, trials=100, seed=1))
print("BRE", bre.verdict, bre.summary["sup_mean_ratio"], bre.summary["slope"])

for rep in (clt, ds):
    cfg = ExperimentConfig(**{k: v for k, v in rep.inputs.items() if k in ("kind", "n", "trials", "seed")})
    json_path, csv_path = write_report(rep, out, cfg.stem)
    svg_path = emit_plot(rep, f"{out}/{cfg.stem}.svg")
    print("wrote", json_path, csv_path, svg_path)
