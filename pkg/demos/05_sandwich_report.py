"""
Estimates against bounds through the command line
=================================================

Runs the three CLI steps in a temporary directory: estimate, bounds, report.
"""
import tempfile
from pathlib import Path

from nnlab.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    grid = ["--L", "0.5:3.5:0.5", "--n", "1:10:1"]
    main(["estimate", "--dim", "2", "--trials", "3000", "--seed", "11", *grid,
          "--out", str(out / "est")])
    main(["bounds", "--dim", "2", *grid, "--out", str(out / "bounds")])
    code = main(["report", "--estimates", str(out / "est" / "estimates.csv"),
                 "--bounds", str(out / "bounds" / "bounds.csv"), "--out", str(out / "report")])
    print("\nreport exit code:", code)
    print((out / "report" / "report.csv").read_text())
