"""Cross-validate the two nonlocal-operator implementations.

The spectral path applies the exact Fourier symbol; the quadrature path
assembles a principal-value correction inside a split radius plus an exact
tail series.  They are built from entirely different ingredients, so their
agreement on a grid ladder -- together with self-adjointness and the
Riesz-inverse round trip -- pins the operator down.  Run:

    python3 demos/operator_validation.py
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from fracshock.experiments import operator_battery

OUT_DIR = os.path.join(os.path.dirname(__file__), "output", "operator_validation")

battery = operator_battery()  # defaults: 5 orders x grid ladder (256, 512, 1024)

print("quadrature vs spectral, relative L2 error on sin(x):")
print(f"{'order':>8} {'n':>6} {'rel error':>12} {'selfadj defect':>15}")
for lam, n, r, rel, defect, seed, chash in battery.rows:
    print(f"{lam:8.2f} {n:6d} {rel:12.3e} {defect:15.3e}")

print("\ngates:")
for name, ok in battery.gates.items():
    print(f"  {name}: {'pass' if ok else 'FAIL'}")

# error ladder plot: one line per order
os.makedirs(OUT_DIR, exist_ok=True)
fig, ax = plt.subplots(figsize=(6, 4.2))
lams = sorted({row[0] for row in battery.rows})
for lam in lams:
    pts = [(row[1], row[3]) for row in battery.rows if row[0] == lam]
    pts.sort()
    ax.loglog([n for n, _ in pts], [e for _, e in pts], "o-", label=f"order {lam}")
ax.set_xlabel("grid cells")
ax.set_ylabel("relative L2 error vs spectral")
ax.set_title("quadrature operator convergence")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
path = os.path.join(OUT_DIR, "error_ladder.png")
fig.savefig(path, dpi=130)
print(f"\nwrote {path}")
print("all gates pass" if battery.passed else f"FAILING: {battery.failures()}")
