"""Full-size run: 1025 mesh nodes, 1025 parameter dimensions, 10^4 quadrature points.

Takes far longer than the desk preset (hours on a laptop); nothing here is part of the test suite.

    python3 scripts/run_full_scale.py --alpha 2 --out out/full
"""
import argparse
import logging
from pathlib import Path

from sparse_ocp import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--mode", choices=["apriori", "aposteriori", "both"], default="both")
    ap.add_argument("--out", type=Path, default=Path("out/full"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    modes = ["apriori", "aposteriori"] if args.mode == "both" else [args.mode]
    cfg = ex.preset("paper", field={"alpha": args.alpha}, modes=modes)
    out = args.out / f"alpha{args.alpha:g}"
    (out).mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    ex.run_convergence(cfg, out=out)
    ex.run_samples(cfg, out=out)


if __name__ == "__main__":
    main()
