"""Golden-file invocations of the command line, one per subcommand.

Run this file directly to regenerate the golden outputs after an intended
format change.
"""

import pathlib
import sys

HERE = pathlib.Path(__file__).resolve().parent
GOLDEN = HERE / "golden"
INPUTS = GOLDEN / "inputs"

CASES = {
    "family_eval.csv": ["family-eval", "--family", "case-iii", "--y1=-1:1:3", "--y2=-1:1:3",
                        "--t", "0:1:3"],
    "evolve.csv": ["evolve", "--system", "z", "--init", str(INPUTS / "caseiii.init"),
                   "--t1", "0.01", "--record-every", "5"],
    "validate.txt": ["validate", "--family", "case-d", "--params", str(INPUTS / "cased_13.params"),
                     "--samples", "50", "--tol", "1e-8"],
    "classify.txt": ["classify", "--init", str(INPUTS / "caseiii.init")],
    "normalize.txt": ["normalize", "--init", str(INPUTS / "diagonal.init")],
    "periodicity.csv": ["periodicity", "--scan-qmax", "9"],
    "mesh.obj": ["mesh", "--family", "case-iii", "--params", str(INPUTS / "caseiii.params"),
                 "--y1", "0:1:2", "--y2", "0:1:2", "--t", "0:1:2"],
}


def run_case(name, outdir):
    from slcalib.cli import main

    out = pathlib.Path(outdir) / name
    code = main(CASES[name] + ["--out", str(out)])
    return code, out


if __name__ == "__main__" and "--regenerate" in sys.argv:
    for case in CASES:
        code, path = run_case(case, GOLDEN)
        print(f"{case}: exit {code}")
