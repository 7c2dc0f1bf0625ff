"""
Driving the studies from the command line
=========================================

Every study has a subcommand that reads a JSON config, writes CSV/JSON into
an output directory, and echoes the fully resolved config next to it.  The
same calls work from a shell as ``optocool <command> --config ... --out ...``.
"""
# %%
import csv
import json
import tempfile
from pathlib import Path

from optocool.cli import main

work = Path(tempfile.mkdtemp())
config = {
    "seed": 7,
    "stark_map": {"K_values": [2], "M_values": [-2], "fields_V_per_m": [0.0, 5e5, 2e6], "n_levels": 3},
    "cool": {"duration_s": 0.5, "snapshot_times_s": [0.0, 0.2, 0.5]},
    "trajectories": {"n_particles": 2, "duration_s": 0.1},
}
cfg_path = work / "run.json"
cfg_path.write_text(json.dumps(config, indent=2))

# %%
for cmd in ("stark-map", "branching", "cool", "trajectories"):
    code = main([cmd, "--config", str(cfg_path), "--out", str(work / cmd)])
    print(cmd, "exit", code, sorted(p.name for p in (work / cmd).iterdir()))

# %%
with open(work / "cool" / "cooling.csv") as fh:
    rows = list(csv.DictReader(fh))
print(rows[0])
print(rows[-1])

# %%
# Unknown keys are refused with exit code 2 rather than silently ignored.
bad = work / "bad.json"
bad.write_text(json.dumps({"cool": {"duraton_s": 1}}))
print("typo ->", main(["cool", "--config", str(bad), "--out", str(work / "bad")]))
