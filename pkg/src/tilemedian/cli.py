"""Command-line front end.

Four subcommands: ``filter`` runs an engine over an image file, ``verify``
exhaustively checks the comparator networks against the zero-one principle,
``opcount`` sweeps per-pixel operation counts to CSV, and ``check`` runs the
engine-vs-oracle equivalence matrix. Exit status is 0 on success, 2 on usage
errors, 1 when a verification or equivalence run finds a failure.
"""

import argparse
import csv
import sys

import numpy as np

from . import networks, pnm, report
from .aware import MIN_KERNEL as AWARE_MIN_KERNEL
from .engine import VARIANTS, filter_planes
from .reference import PATTERNS, TestImageSpec, generate


def _parse_synth(token: str, seed: int, density: float) -> np.ndarray:
    """Render 'synth:PATTERN:WxH:DEPTH' to an image."""
    parts = token.split(":")
    if len(parts) != 4:
        raise ValueError("expected synth:PATTERN:WxH:DEPTH")
    _, pattern, size, depth = parts
    w, _, h = size.partition("x")
    return generate(TestImageSpec(pattern, int(w), int(h), int(depth),
                                  seed=seed, density=density))


def cmd_filter(args, parser) -> int:
    if args.k < 3 or args.k % 2 == 0:
        parser.error(f"--k must be an odd diameter >= 3, got {args.k}")
    if args.variant == "aware" and args.k < AWARE_MIN_KERNEL:
        parser.error(f"the aware engine needs k >= {AWARE_MIN_KERNEL}; "
                     f"use --variant oblivious for k={args.k}")
    try:
        if args.infile.startswith("synth:"):
            image = _parse_synth(args.infile, args.seed, args.density)
        else:
            image = pnm.read_image(args.infile)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read {args.infile}: {exc}")

    checksums = [] if args.dump_checksums else None
    out = filter_planes(image, args.k, args.variant, root=args.root,
                        workers=args.workers, slice_budget=args.slice_budget,
                        checksums=checksums)
    if checksums:
        print("\n".join(checksums))
    pnm.write_image(args.out, out)
    print(f"wrote {args.out}: {out.shape[1]}x{out.shape[0]} "
          f"{out.dtype.name} k={args.k} variant={args.variant}")
    return 0


def _parse_claim(text: str) -> networks.Claim:
    if text == "sorted":
        return networks.Claim.sorted()
    kind, _, rest = text.partition(":")
    if kind == "merged" and rest:
        return networks.Claim.merged(*(int(s) for s in rest.split(",")))
    raise ValueError(f"bad claim {text!r} (expected 'sorted' or 'merged:P,Q,...')")


def _verify_one_file(args, parser) -> int:
    try:
        net = networks.load_network_file(args.network_file)
        claim = _parse_claim(args.claim)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    res = networks.verify_zero_one(net, claim)
    if res.ok:
        print(f"ok {args.network_file}: {args.claim} holds "
              f"({res.inputs_checked} inputs, {res.mode})")
        return 0
    print(f"FAIL {args.network_file}: {args.claim} violated")
    print(f"  counterexample input: {res.counterexample}")
    if res.detail:
        print(f"  {res.detail}")
    return 1


def cmd_verify(args, parser) -> int:
    if args.network_file:
        return _verify_one_file(args, parser)

    budget = args.max_exhaustive_wires
    checked = 0
    failures = 0

    def run(net, claim, label):
        nonlocal checked, failures
        res = networks.verify_zero_one(net, claim)
        checked += 1
        if not res.ok:
            failures += 1
            print(f"FAIL {label}: counterexample input {res.counterexample}"
                  + (f" ({res.detail})" if res.detail else ""))

    n_sorts = 0
    for n in range(2, min(budget, 16) + 1):
        run(networks.batcher_sort(n), networks.Claim.sorted(), f"batcher sort n={n}")
        run(networks.pairwise_sort(n), networks.Claim.sorted(), f"pairwise sort n={n}")
        n_sorts += 2
    if n_sorts:
        print(f"sorting networks: {n_sorts} checked "
              f"(n = 2..{min(budget, 16)}, exhaustive 0/1)")

    n_merges = 0
    for p in range(1, budget // 2 + 1):
        for q in range(p, budget - p + 1):
            run(networks.oddeven_merge(p, q), networks.Claim.merged(p, q),
                f"odd-even merge p={p} q={q}")
            n_merges += 1
    if n_merges:
        print(f"merge networks: {n_merges} checked (p+q <= {budget}, "
              "exhaustive sorted-run 0/1)")

    n_medians = 0
    for n in range(3, min(budget, 16) + 1, 2):
        w = r = (n - 1) // 2
        pruned = networks.prune(networks.make_sorter(n), [w])
        run(pruned, networks.Claim.of_ranks({w: r}), f"pruned median selection n={n}")
        n_medians += 1
    if n_medians:
        print(f"median selections: {n_medians} checked "
              f"(odd n <= {min(budget, 16)}, rank claim, exhaustive 0/1)")

    print(f"{checked} networks checked, {failures} failures")
    return 1 if failures else 0


def _parse_sweep(text: str) -> range:
    parts = text.split(":")
    if len(parts) not in (2, 3) or not all(p.lstrip("-").isdigit() for p in parts):
        raise ValueError(f"bad sweep {text!r} (expected START:STOP[:STEP])")
    start, stop = int(parts[0]), int(parts[1])
    step = int(parts[2]) if len(parts) == 3 else 2
    if step < 1 or start < 3 or stop < start:
        raise ValueError(f"bad sweep {text!r}")
    return range(start, stop + 1, step)


def cmd_opcount(args, parser) -> int:
    if args.sweep:
        try:
            ks = list(_parse_sweep(args.sweep))
        except ValueError as exc:
            parser.error(str(exc))
    else:
        ks = [args.k]
    if any(k % 2 == 0 for k in ks):
        parser.error(f"kernel sweep must hold odd diameters only, got {ks}")
    if args.variant == "aware" and min(ks) < AWARE_MIN_KERNEL:
        parser.error(f"the aware engine needs k >= {AWARE_MIN_KERNEL}")

    rows = report.opcount_sweep(ks, args.variant)
    writer = csv.DictWriter(sys.stdout, fieldnames=report.OPCOUNT_FIELDS)
    writer.writeheader()
    writer.writerows(rows)
    if args.csv:
        report.write_csv(rows, report.OPCOUNT_FIELDS, args.csv)
        fig = report.figure_path(args.csv)
        report.render_opcount_figure(rows, fig)
        print(f"wrote {args.csv} and {fig}", file=sys.stderr)
    return 0


def cmd_check(args, parser) -> int:
    rows = report.run_matrix(args.matrix)
    n_bad = 0
    for r in rows:
        tag = (f"{r['pattern']} {r['width']}x{r['height']}/{r['depth']} "
               f"k={r['k']} {r['variant']}")
        if r["equal"]:
            print(f"ok   {tag}")
        else:
            n_bad += 1
            print(f"DIFF {tag}: {r['mismatches']} pixels differ, "
                  f"first at ({r['first_diff']})")
    print(f"{len(rows)} cells checked, {n_bad} differ")
    if args.csv:
        report.write_csv(rows, report.CHECK_FIELDS, args.csv)
        fig = report.figure_path(args.csv)
        report.render_check_figure(rows, fig)
        print(f"wrote {args.csv} and {fig}", file=sys.stderr)
    return 1 if n_bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilemedian",
        description="Exact median filtering over a hierarchy of split tiles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="median-filter an image file")
    p.add_argument("--in", dest="infile", required=True,
                   help="input image (P5/P6/MF32), or synth:PATTERN:WxH:DEPTH "
                        f"with PATTERN one of {'/'.join(PATTERNS)}")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--k", type=int, required=True, help="odd kernel diameter")
    p.add_argument("--variant", choices=VARIANTS, default="auto")
    p.add_argument("--root", type=int, default=None,
                   help="override the root tile edge length")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--slice-budget", type=int, default=None, metavar="BYTES",
                   help="cap on intermediate buffer bytes (aware engine)")
    p.add_argument("--seed", type=int, default=0, help="seed for synth: inputs")
    p.add_argument("--density", type=float, default=0.3,
                   help="impulse fraction for synth:impulse inputs")
    p.add_argument("--dump-checksums", action="store_true",
                   help="print per-pass buffer checksums (aware engine)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("verify", help="check comparator networks (zero-one principle)")
    p.add_argument("--max-exhaustive-wires", type=int, default=16, metavar="N",
                   help="verify sorts/selections up to N wires and merges up "
                        "to N total inputs (0 skips everything)")
    p.add_argument("--network-file", default=None,
                   help="verify one network-description file instead of the suite")
    p.add_argument("--claim", default="sorted",
                   help="claim for --network-file: sorted | merged:P,Q,...")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("opcount", help="sweep per-pixel operation counts to CSV")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--sweep", help="kernel range START:STOP[:STEP], inclusive")
    g.add_argument("--k", type=int, help="single kernel diameter")
    p.add_argument("--variant", choices=("oblivious", "aware"), default="oblivious")
    p.add_argument("--csv", default=None,
                   help="also write the table here, plus a .png figure beside it")
    p.set_defaults(func=cmd_opcount)

    p = sub.add_parser("check", help="compare engines against the brute-force oracle")
    p.add_argument("--matrix", choices=("small", "full"), default="small")
    p.add_argument("--csv", default=None,
                   help="also write per-cell results here, plus a .png figure")
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
