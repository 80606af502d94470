"""End-to-end pipeline: config -> CLI runs -> merged report -> figures.

The command line front end drives everything from one INI file.  This
script writes a small config, invokes `sloc simulate`, `sloc
gaussian-check`, and `sloc isoperimetry` into separate subdirectories,
merges their verdicts with `sloc report`, and (if the TypeScript renderer
in frontend/ has been built) turns the CSVs into SVG figures.

Run:  python3 demos/pipeline_report.py [work_dir]
"""

import json
import os
import subprocess
import sys
import tempfile

CONFIG = """\
[experiment]
kind = {kind}
seed = 11
out = {out}

[density]
name = gaussian
n = 2

[schedule]
dt = 0.01
t_max = 1.0
stride = 10

[runs]
count = 10
strategy = closed-form
"""


def sloc(*args):
    print(f"$ sloc {' '.join(args)}", flush=True)
    subprocess.run([sys.executable, "-m", "sloc.cli", *args], check=True)


def main(work=None):
    work = work or tempfile.mkdtemp(prefix="sloc-pipeline-")
    for kind, sub in [("simulate", "sim"), ("gaussian-check", "gc"), ("isoperimetry", "iso")]:
        out = os.path.join(work, sub)
        os.makedirs(out, exist_ok=True)
        cfg = os.path.join(work, f"{sub}.ini")
        with open(cfg, "w") as fh:
            fh.write(CONFIG.format(kind=kind, out=out))
        sloc(kind, "--config", cfg)

    sloc("report", "--out", work)
    with open(os.path.join(work, "report.json")) as fh:
        report = json.load(fh)
    print("\nmerged verdicts:")
    for name, chk in sorted(report.items()):
        print(f"  {name:45s} {chk['status']}")

    renderer = os.path.join(os.path.dirname(__file__), "..", "frontend", "dist", "cli.js")
    if os.path.exists(renderer):
        figs = os.path.join(work, "figures")
        subprocess.run(
            [
                "node", renderer,
                "--trajectories", os.path.join(work, "sim"),
                "--mass-process", os.path.join(work, "iso", "mass_process.csv"),
                "--summary", os.path.join(work, "gc", "summary.json"),
                "--out", figs,
            ],
            check=True,
        )
        print(f"\nfigures written to {figs}: {sorted(os.listdir(figs))}")
    else:
        print("\n(frontend not built; run `npm install && npm run build` in frontend/ for figures)")

    print(f"\nall artifacts under {work}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
