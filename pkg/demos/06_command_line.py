# coding: utf-8

# # The command line
#
# Each experiment is a YAML file. The subcommand names the experiment; results land in the output
# directory as diagnostics.csv, report.json and fields/*.hsf. One PASS/FAIL line is printed per
# enabled check and the exit status is 0 only when all of them pass.

# In[1]:

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from hartree_lab.io import read_diagnostics, read_field

here = Path(__file__).resolve().parent
out = Path(tempfile.mkdtemp())
for kind in ("evolve", "check-potential"):
    cfg = here / "configs" / f"{kind}.yaml"
    r = subprocess.run([sys.executable, "-m", "hartree_lab", kind, "--config", str(cfg),
                        "--out", str(out / kind)], capture_output=True, text=True)
    print(f"$ hartree-lab {kind} --config {cfg.name}  (exit {r.returncode})")
    print(r.stdout)


# The artifacts are plain files.

# In[2]:

cols = read_diagnostics(out / "evolve" / "diagnostics.csv")
print("columns", list(cols))
print("energy", cols["energy"][:3], "...")
last = sorted((out / "evolve" / "fields").glob("u_*.hsf"))[-1]
print(last.name, "t =", read_field(last).t)
print(json.loads((out / "evolve" / "report.json").read_text())["checks"])
