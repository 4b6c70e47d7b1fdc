"""Regenerate the bundled scenario from the synthetic APX-like generator.

    python tools/calibrate_bundled.py [--seed N] [--out DIR]

Edit the price/demand shapes in ``flexhedge.scenario_io`` or the storage
ratings below, rerun, and commit the regenerated files.
"""
import argparse

from flexhedge.scenario_io import DEFAULT_SEED, bundled_path, save_scenario, synthesize_apx_like

parser = argparse.ArgumentParser()
parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
parser.add_argument("--out", default=str(bundled_path()))
args = parser.parse_args()

scenario = synthesize_apx_like(seed=args.seed)
path = save_scenario(scenario, args.out)
print(f"wrote {path}")
