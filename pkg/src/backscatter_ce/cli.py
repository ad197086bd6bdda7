"""Command-line front end: ``run``, ``pilots``, ``validate`` and ``presets``.

Exit codes: 0 success, 2 configuration error, 3 infeasible scenario or a
pilot matrix that fails validation.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys

import numpy as np

from .config import PRESETS, ConfigError, InfeasibleScenarioError, ScenarioConfig, preset
from .pilots import PilotMatrix, make_pilot, validate_pilot
from .runner import manifest_path, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3
log = logging.getLogger("backscatter_ce")


def format_complex(z: complex) -> str:
    im = z.imag
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{z.real!r}{sign}{abs(im)!r}j"


def write_pilot_csv(path, entries: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in entries:
            w.writerow([format_complex(complex(z)) for z in row])


def read_pilot_csv(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: expected a non-empty rectangular matrix")
    try:
        return np.array([[complex(v.strip().replace(" ", "")) for v in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: bad complex entry ({exc})") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_run(args) -> int:
    if (args.preset is None) == (args.config is None):
        raise ConfigError("give exactly one of --preset or --config")
    cfg = preset(args.preset) if args.preset else ScenarioConfig.from_json(args.config)
    changes = {"trials": args.trials, "seed": args.seed}
    if args.estimators:
        changes["estimators"] = [e.strip() for e in args.estimators.split(",") if e.strip()]
    if args.power_dbm:
        changes["power_dbm"] = _floats(args.power_dbm)
    cfg = cfg.override(**changes)
    result = run_scenario(cfg, workers=args.workers, out_path=args.out, dump_rx_dir=args.dump_rx)
    if args.out is None:
        sys.stdout.write(result.csv_text)
    else:
        log.info("wrote %s and %s", args.out, manifest_path(args.out))
    return EXIT_OK


def cmd_pilots(args) -> int:
    try:
        x = make_pilot(args.design, args.tags, args.tau, root=args.root)
    except ValueError as exc:
        raise InfeasibleScenarioError(str(exc)) from None
    if args.out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        for row in x.entries:
            w.writerow([format_complex(complex(z)) for z in row])
    else:
        write_pilot_csv(args.out, x.entries)
    return EXIT_OK


def cmd_validate(args) -> int:
    entries = read_pilot_csv(args.input)
    try:
        x = PilotMatrix(entries, design="custom")
    except ValueError as exc:
        print(f"FAIL {exc}")
        return EXIT_INFEASIBLE
    r = validate_pilot(x, args.tol)
    print(f"source_orthogonality_defect={r.source_orthogonality_defect:.3e}")
    print(f"mutual_orthogonality_defect={r.mutual_orthogonality_defect:.3e}")
    print(f"gram_defect={r.gram_defect:.3e}")
    print("PASS" if r.passed else "FAIL")
    return EXIT_OK if r.passed else EXIT_INFEASIBLE


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        cfg = preset(name)
        print(f"{name}: K={cfg.num_tags} tau={cfg.tau} design={cfg.pilot_design} variants={list(cfg.variants)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="backscatter-ce", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a Monte-Carlo scenario and write the NMSE table")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--config", help="JSON scenario file")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--estimators", help="comma-separated estimator names")
    r.add_argument("--power-dbm", help="comma-separated transmit powers in dBm")
    r.add_argument("--out", help="CSV path (manifest goes next to it); stdout if omitted")
    r.add_argument("--dump-rx", metavar="DIR", help="write trial-0 received blocks as CSV")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("pilots", help="export a pilot matrix as CSV")
    q.add_argument("--design", required=True, choices=("hadamard", "zc", "dft"))
    q.add_argument("--tags", type=int, required=True)
    q.add_argument("--tau", type=int)
    q.add_argument("--root", type=int, default=1)
    q.add_argument("--out")
    q.set_defaults(func=cmd_pilots)

    v = sub.add_parser("validate", help="check a pilot CSV against the orthogonality conditions")
    v.add_argument("--in", dest="input", required=True)
    v.add_argument("--tol", type=float, default=1e-10)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("presets", help="list figure presets")
    s.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenarioError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
