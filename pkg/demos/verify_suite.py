"""Run the bundled verification suite and print one verdict per comparison.

Run:  python3 demos/verify_suite.py
Equivalent to `isop verify --seed 0`; takes about half a minute.
"""
import json
from importlib.resources import files

from isop.harness import run_suite

manifest = json.loads(files("isop").joinpath("data/default.json").read_text())
verdicts = run_suite(manifest, seed=0)

print(f"{'theorem':28s} {'lhs':>10s} {'rhs':>10s} {'z':>8s}  status")
for v in verdicts:
    z = "inf" if v.z == float("inf") else f"{v.z:8.2f}"
    print(f"{v.theorem:28s} {v.lhs:10.4f} {v.rhs:10.4f} {z:>8s}  {v.status}")

# A violation would mean a bug or an unfaithful discretization, never a counterexample.
bad = [v.theorem for v in verdicts if v.status == "violation"]
print("\nall consistent" if not bad else f"\nviolations: {bad}")
