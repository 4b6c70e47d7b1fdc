# Price and storage traces of the bundled day (needs matplotlib).
#
# python demos/04_plot_day.py [outfile.png]

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from flexhedge.mpc import run_baseline, run_receding
from flexhedge.scenario_io import bundled_path, load_scenario

out = sys.argv[1] if len(sys.argv) > 1 else "bundled_day.png"
scenario = load_scenario(bundled_path())
hours = np.arange(1, scenario.n_hours + 1)
baseline = run_baseline(scenario)
runs = {h: run_receding(scenario, h) for h in (1, 6, 8)}

fig, (ax_p, ax_f, ax_s) = plt.subplots(3, 1, figsize=(8, 9), sharex=True)

ax_p.step(hours, baseline.lmp_at("3"), where="mid", color="k", label="no storage")
for h, traj in runs.items():
    ax_p.step(hours, traj.lmp_at("3"), where="mid", label=f"H={h}")
ax_p.axhline(scenario.pi_des[0], color="r", ls="--", lw=1, label="cap")
ax_p.set_ylabel("price at bus 3 (EUR/MWh)")
ax_p.legend(ncol=3, fontsize=8)

for i, (h, traj) in enumerate(runs.items()):
    ax_f.bar(hours + (i - 1) * 0.27, np.array(traj.flex)[:, 0], width=0.27, label=f"H={h}")
ax_f.axhline(0, color="k", lw=0.5)
ax_f.set_ylabel("flex (MW, + discharge)")
ax_f.legend(fontsize=8)

cap = scenario.storage[0].capacity
for h, traj in runs.items():
    ax_s.plot(hours, 100 * np.array(traj.soc)[:, 0] / cap, marker=".", label=f"H={h}")
ax_s.set_ylabel("state of charge (%)")
ax_s.set_xlabel("hour")
ax_s.set_xticks(hours[::2])

fig.tight_layout()
fig.savefig(out, dpi=120)
print("wrote", out)
