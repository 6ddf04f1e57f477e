"""``ims`` command line tool: solve, extract and check.

Exit codes: 0 success, 2 input or format error, 3 topology error,
4 numerical error, 5 extraction error.
"""

import argparse
import logging
import os
import sys


def _common(p):
    p.add_argument("--mesh-a", required=True, help="source mesh (OBJ)")
    p.add_argument("--mesh-b", required=True, help="target mesh (OBJ)")
    p.add_argument("--connection", default="default", choices=["default", "vectorfield", "spin"])
    p.add_argument("--no-idt", action="store_true", help="skip intrinsic Delaunay flips")
    p.add_argument("--threads", type=int, default=0, help="BLAS threads (0 = all cores)")
    p.add_argument("--out", default="ims_out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="ims", description="Bijective surface correspondence on A x B.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute a correspondence")
    _common(s)
    s.add_argument("--landmarks", help="landmark pairs file (a b per line)")
    s.add_argument("--curves", help="curve pairs file (curveA: ... ; curveB: ...)")
    s.add_argument("--init-map", help="vertex-to-face map A->B used for initialization")
    s.add_argument("--anneal", default="100", help="comma-separated t values, lambda = t * lambda_0")
    s.add_argument("--sigma-a", type=float, default=1.0)
    s.add_argument("--sigma-b", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--coarse-a", help="coarse version of mesh A for two-level solving")
    s.add_argument("--coarse-b", help="coarse version of mesh B for two-level solving")
    s.add_argument("--random-init", action="store_true", help="start from a random section")
    s.add_argument("--maxiter", type=int, default=1000)
    s.add_argument("--gtol", type=float, default=1e-5)

    e = sub.add_parser("extract", help="extract maps from a saved section")
    _common(e)
    e.add_argument("--section", required=True, help="IMSZ1 section file written by solve")
    e.add_argument("--coarse-a")
    e.add_argument("--coarse-b")

    c = sub.add_parser("check", help="run the invariant suite on the meshes")
    c.add_argument("--mesh-a", required=True)
    c.add_argument("--mesh-b")
    c.add_argument("--connection", default="default", choices=["default", "vectorfield", "spin"])
    c.add_argument("--no-idt", action="store_true")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=0)
    c.add_argument("-v", "--verbose", action="store_true")
    return ap


def _set_threads(n):
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _schedule(text):
    from .errors import InputError

    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as err:
        raise InputError("--anneal expects comma-separated numbers, got %r" % text) from err


def cmd_solve(args):
    import json

    from . import pipeline

    cfg = pipeline.RunConfig(
        mesh_a=args.mesh_a, mesh_b=args.mesh_b, landmarks=args.landmarks, curves=args.curves,
        init_map=args.init_map, connection=args.connection, schedule=_schedule(args.anneal),
        sigma_a=args.sigma_a, sigma_b=args.sigma_b, seed=args.seed, idt=not args.no_idt,
        coarse_a=args.coarse_a, coarse_b=args.coarse_b, random_init=args.random_init, out=args.out,
        gtol=args.gtol, maxiter=args.maxiter)
    res = pipeline.run(cfg)
    summary = pipeline.write_outputs(res, cfg.out)
    print(json.dumps({k: summary[k] for k in ("multi_zero_percent_ab", "multi_zero_percent_ba",
                                               "graph_area", "sandwich_ok")}, default=lambda o: o.item()))
    return 0


def cmd_extract(args):
    from . import pipeline

    cfg = pipeline.RunConfig(mesh_a=args.mesh_a, mesh_b=args.mesh_b, connection=args.connection,
                             idt=not args.no_idt, coarse_a=args.coarse_a, coarse_b=args.coarse_b, out=args.out)
    if not os.path.isfile(args.section):
        from .errors import InputError
        raise InputError("file not found: %s" % args.section)
    summary = pipeline.extract_from_file(args.section, cfg, args.out)
    print("multi_zero %.3f%% / %.3f%%" % (summary["multi_zero_percent_ab"], summary["multi_zero_percent_ba"]))
    return 0


def cmd_check(args):
    from .diagnostics import run_checks

    paths = [args.mesh_a] + ([args.mesh_b] if args.mesh_b else [])
    results = run_checks(paths, kind=args.connection, idt=not args.no_idt, seed=args.seed)
    code = 0
    for r in results:
        print("%s %-40s %s" % ("PASS" if r.ok else "FAIL", r.name, r.detail))
        if not r.ok and code == 0:
            code = r.exit_code
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .errors import ImsError

    try:
        return {"solve": cmd_solve, "extract": cmd_extract, "check": cmd_check}[args.command](args)
    except ImsError as e:
        print("ims %s: error: %s" % (args.command, e), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print("ims %s: error: %s" % (args.command, e), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
