"""Print the largest |Q_nu[H_l]| per rule level and flag entries above a threshold."""
import argparse

from sparse_ocp.quad1d import hermite_bound_report

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--nu-max", type=int, default=20)
ap.add_argument("--l-max", type=int, default=100)
ap.add_argument("--flag-above", type=float, default=1.0 + 1e-6)
args = ap.parse_args()

rep = hermite_bound_report(args.nu_max, args.l_max, flag_above=args.flag_above)
for nu, row in enumerate(rep.table):
    l = int(abs(row).argmax())
    print(f"nu={nu:3d}  max_l |Q[H_l]| = {abs(row[l]):.15f}  (l={l})")
print(f"overall max {rep.max_value:.15f} at {rep.argmax}; {len(rep.flagged)} entries above {args.flag_above}")
