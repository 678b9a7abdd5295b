"""Command-line interface: mesh generation, runs, comparisons, convergence
and verification suites."""

import argparse
import sys

from .errors import UransError, UsageError


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="urans2d",
        description="2D Taylor-Hood flow solver with TKE closures")
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate or convert a mesh file")
    p_mesh.add_argument("--kind", choices=["unit-square", "annulus"], default="annulus")
    p_mesh.add_argument("--n", type=int, default=8, help="unit-square subdivisions")
    p_mesh.add_argument("--n-r", type=int, default=9)
    p_mesh.add_argument("--n-t", type=int, default=40)
    p_mesh.add_argument("--r1", type=float, default=1.0)
    p_mesh.add_argument("--r2", type=float, default=0.1)
    p_mesh.add_argument("--cx", type=float, default=0.5)
    p_mesh.add_argument("--cy", type=float, default=0.0)
    p_mesh.add_argument("--convert", metavar="PATH", help="read PATH instead of generating")
    p_mesh.add_argument("--out", required=True, help="output mesh file")

    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("--config", help="key=value config file")
    p_run.add_argument("--closure", choices=["nse", "one-eq", "one-eq-prandtl", "half-eq"])
    p_run.add_argument("--filter", choices=["on", "off"])
    p_run.add_argument("--t-final", type=float)
    p_run.add_argument("--out", required=True, help="output directory")

    p_cmp = sub.add_parser("compare", help="four-closure benchmark on one mesh")
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--t-final", type=float, default=15.0)
    p_cmp.add_argument("--filter", choices=["on", "off"], default="on")
    p_cmp.add_argument("--no-reference", action="store_true",
                       help="skip the finer-mesh plain-flow reference run")

    p_mms = sub.add_parser("mms", help="manufactured-solution convergence study")
    p_mms.add_argument("--out", required=True)
    p_mms.add_argument("--quick", action="store_true")

    p_ver = sub.add_parser("verify", help="energy/positivity/balance verification suite")
    p_ver.add_argument("--out", required=True)
    p_ver.add_argument("--quick", action="store_true")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except UransError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _dispatch(args):
    from . import scenario
    from .config import parse_config

    if args.command == "mesh":
        from .mesh import gen_eccentric_annulus, gen_unit_square, read_mesh, write_mesh

        if args.convert:
            with open(args.convert) as fh:
                mesh = read_mesh(fh)
        elif args.kind == "unit-square":
            mesh = gen_unit_square(args.n)
        else:
            mesh = gen_eccentric_annulus(args.n_r, args.n_t, args.r1, args.r2,
                                         (args.cx, args.cy))
        with open(args.out, "w") as fh:
            write_mesh(mesh, fh)
        print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
        return 0

    if args.command == "run":
        if args.config:
            with open(args.config) as fh:
                config = parse_config(fh.read())
        else:
            config = scenario.offset_circles_config(args.closure or "half-eq")
        if args.closure:
            from dataclasses import replace

            config.closure = replace(config.closure, variant=args.closure)
            config.label = args.closure
        if args.filter:
            config.stepper.filter_on = args.filter == "on"
        if args.t_final is not None:
            config.t_final = args.t_final
        result = scenario.run(config, args.out, progress=_progress)
        print(f"\ncompleted {len(result.records)} steps; "
              f"max E+k = {result.max_energy_plus_k:.6g}")
        return 0

    if args.command == "compare":
        results = scenario.compare(args.out, with_reference=not args.no_reference,
                                   t_final=args.t_final, filter_on=args.filter == "on")
        for name, res in results.items():
            print(f"{name}: final KE {res.records[-1].kinetic_energy:.6g}, "
                  f"max E+k {res.max_energy_plus_k:.6g}")
        return 0

    if args.command == "mms":
        spatial, plain, filtered = scenario.run_mms(args.out, quick=args.quick)
        print(spatial.table)
        print(plain.table)
        print(filtered.table)
        return 0

    if args.command == "verify":
        checks = scenario.verify_suite(args.out, quick=args.quick)
        ok = True
        for name, passed, detail in checks:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
            ok = ok and passed
        return 0 if ok else 1

    raise UsageError(f"unknown command {args.command!r}")


def _progress(step, total, record):
    if step % 100 == 0 or step == total:
        print(f"  step {step}/{total} t={record.t:.3f} "
              f"E={record.kinetic_energy:.5g} k={record.k_avg:.5g}", flush=True)


if __name__ == "__main__":
    sys.exit(main())
