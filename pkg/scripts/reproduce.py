"""Regenerate the figure data tables with the shipped spec files.

    python scripts/reproduce.py --out results            # everything
    python scripts/reproduce.py --only fig1 --reps 20    # quick look

``fig1`` is run once per aspect ratio q/p in {1/4, 1/2, 1}. The tables are
plain CSV; plotting is left to the reader.
"""
import argparse
import copy
import json
import logging
import sys
import tempfile
from pathlib import Path

from btlab.cli import main as btl

HERE = Path(__file__).resolve().parent
ASPECTS = {"q4": 0.25, "q2": 0.5, "q1": 1.0}


def _run(mode, spec, out, extra):
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(spec, fh)
    rc = btl([mode, "--spec", fh.name, "--out", str(out), *extra])
    Path(fh.name).unlink()
    logging.info("%s -> %s (exit %d)", mode, out, rc)
    return rc


def jobs():
    fig1 = json.loads((HERE / "fig1_ellipses.json").read_text())
    for tag, ratio in ASPECTS.items():
        spec = copy.deepcopy(fig1)
        spec["grain"]["q"] = spec["grain"]["p"] * ratio
        yield "fig1", f"fig1_ellipses_{tag}.csv", spec
    for group, name in (("fig5", "fig5_histograms"), ("fig5", "fig5_ellipses"),
                        ("fig_reconstruction", "fig_reconstruction"), ("window_check", "window_check")):
        yield group, f"{name}.csv", json.loads((HERE / f"{name}.json").read_text())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", help="fig1, fig5, fig_reconstruction or window_check")
    ap.add_argument("--reps", type=int, help="override replicate counts")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = []
    if args.reps:
        extra += ["--reps", str(args.reps)]
    if args.threads:
        extra += ["--threads", str(args.threads)]
    worst = 0
    for group, fname, spec in jobs():
        if args.only and args.only != group:
            continue
        worst = max(worst, _run(spec["mode"], spec, out / fname, extra))
    return worst


if __name__ == "__main__":
    sys.exit(main())
