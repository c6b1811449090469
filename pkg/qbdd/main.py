import argparse
import logging
import os
import sys

from qbdd.errors import PreconditionError, QbddError
from qbdd.solver.calibration import CalibrationStore, cell_key
from qbdd.solver.experiments import (SOLVERS, calibrate, closest_vector, estimate_parameters,
                                     generate_instance, instance_digest, run_trials, verify_rows)
from qbdd.solver.intlat import IntMatrix, hnf, shortest_vector
from qbdd.solver.reduction import BddInstance, plant_lattice_instance
from qbdd.solver.zqgroup import decomp_to_json, decompose
from qbdd.utils.helpers import dump_json, read_json, read_json_rows, write_json, write_json_rows

logger = logging.getLogger("qbdd")


def build_parser():
    parser = argparse.ArgumentParser(description='Bounded distance decoding on q-periodic lattices')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', '-v', action='store_true', help='Enable verbose output')
    common.add_argument('--jobs', '-j', type=int, default=1, help='Worker processes for trials')
    common.add_argument('--output', '-o', type=str, help='Write the JSON artifact to this path')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen', parents=[common], help='Generate a planted BDD instance')
    gen.add_argument('--n', type=int, help='Lattice dimension')
    gen.add_argument('--q', type=int, help='Period q (q Z^n inside the lattice)')
    gen.add_argument('--r', type=int, help='Number of random generators mod q')
    gen.add_argument('--basis', type=str, help='Plant on this basis (matrix text file) instead of a random one')
    gen.add_argument('--eps1', type=float, default=0.0, help='Planted offset is at most eps1 * lambda1')
    gen.add_argument('--seed', type=int, required=True, help='Random seed')
    gen.set_defaults(handler=cmd_gen)

    solve = sub.add_parser('solve', parents=[common], help='Run a solver on an instance file')
    solve.add_argument('instance', type=str, help='Instance JSON written by gen')
    solve.add_argument('--solver', choices=SOLVERS, default='poly', help='Solver to run')
    solve.add_argument('--beta', type=int, help='Block size for the tradeoff solver')
    solve.add_argument('--backend', choices=('gram', 'dense'), default='gram', help='Simulation backend')
    solve.add_argument('--seed', type=int, required=True, help='Random seed')
    solve.add_argument('--trials', type=int, default=1, help='Independent solver runs')
    solve.add_argument('--p-err', type=float, default=0.1, help='End-to-end failure probability')
    solve.add_argument('--eps1', type=float, help='eps1 used to size phase estimation')
    solve.add_argument('--m', type=int, help='Sample count for the poly and tradeoff solvers')
    solve.add_argument('--timings', action='store_true', help='Record wall time per trial')
    solve.set_defaults(handler=cmd_solve)

    cal = sub.add_parser('calibrate', parents=[common], help='Measure eps1 thresholds for a family')
    cal.add_argument('family', type=str, help='Family spec JSON')
    cal.add_argument('--name', type=str, default='default', help='Calibration table name')
    cal.set_defaults(handler=cmd_calibrate)

    ver = sub.add_parser('verify', parents=[common], help='Audit a result file against oracles')
    ver.add_argument('results', type=str, help='Result rows written by solve')
    ver.set_defaults(handler=cmd_verify)

    ora = sub.add_parser('oracle', parents=[common], help='Exact lambda1, closest vector and decomposition')
    ora.add_argument('instance', type=str, help='Instance JSON written by gen')
    ora.set_defaults(handler=cmd_oracle)

    est = sub.add_parser('estimate', parents=[common], help='Parameter formulas and random q-ary statistics')
    est.add_argument('--n', type=int, required=True, help='Lattice dimension (also m for the q-ary draws)')
    est.add_argument('--q', type=int, required=True, help='Period q')
    est.add_argument('--r', type=int, required=True, help='Group rank')
    est.add_argument('--beta', type=int, action='append', default=[], help='Tradeoff block size (repeatable)')
    est.add_argument('--eps', type=float, default=0.25, help='Exponent of the sublinear regime')
    est.add_argument('--c', type=float, default=2.0, help='Exponent of the polylog regime')
    est.add_argument('--draws', type=int, default=0, help='Random q-ary lattices to sample')
    est.add_argument('--seed', type=int, help='Random seed for the q-ary draws')
    est.set_defaults(handler=cmd_estimate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.handler(args)
    except QbddError as e:
        print(f"Error: {e.message}")
        if args.verbose and e.details:
            print(dump_json(e.details), end='')
        if args.output:
            write_json(args.output, e.to_json())
        return e.exit_code
    except (OSError, ValueError, KeyError) as e:
        print(f"Error: {e}")
        return 1


def load_instance(path):
    if not os.path.exists(path):
        raise PreconditionError(f"instance file not found: {path}", code="missing instance")
    return BddInstance.from_json(read_json(path))


def banner(title):
    print("\n" + "=" * 80)
    print(title)
    print("=" * 80)


def cmd_gen(args):
    if args.basis:
        with open(args.basis, 'r') as f:
            B = hnf(IntMatrix.from_text(f.read()))
        instance = plant_lattice_instance(B, args.eps1, args.seed)
        generator = {"basis": os.path.abspath(args.basis), "eps1": args.eps1, "seed": args.seed}
    else:
        if None in (args.n, args.q, args.r):
            raise PreconditionError("gen needs --n, --q and --r, or --basis", code="missing parameters")
        instance = generate_instance(args.n, args.q, args.r, args.eps1, args.seed)
        generator = {"n": args.n, "q": args.q, "r": args.r, "eps1": args.eps1, "seed": args.seed}
    record = instance.to_json()
    record["generator"] = generator
    if args.output:
        write_json(args.output, record)
        print(f"Instance written to {args.output}")
    else:
        print(dump_json(record), end='')
    if args.verbose:
        print(f"  n={instance.n} q={instance.q} rank={instance.decomp.r} "
              f"lambda1^2={instance.lambda1_sq} |Delta|^2={sum(d * d for d in instance.planted['delta'])}")
    return 0


def cmd_solve(args):
    instance = load_instance(args.instance)
    if args.solver == 'tradeoff' and args.beta is None:
        raise PreconditionError("the tradeoff solver needs --beta", code="bad beta")
    rank = instance.decomp.r if instance.decomp else decompose(instance.basis, instance.q).r
    calibrated = CalibrationStore().lookup(cell_key(args.solver, instance.n, instance.q, rank, args.beta))
    if calibrated is not None and instance.eps1 > calibrated:
        logger.warning("instance eps1=%g exceeds the calibrated threshold %g", instance.eps1, calibrated)

    print(f"Solving {args.instance} with {args.solver} ({args.trials} trial(s))...")
    rows = run_trials(instance, args.solver, args.seed, args.trials, jobs=args.jobs,
                      progress=args.verbose, beta=args.beta, backend=args.backend,
                      p_err=args.p_err, eps1_sizing=args.eps1, timings=args.timings, m=args.m)
    digest = instance_digest(instance)
    for row in rows:
        row["instance"] = os.path.abspath(args.instance)
        row["instance_sha256"] = digest
        row["calibrated_eps1"] = calibrated
    if args.output:
        write_json_rows(args.output, rows)
    print_solve_report(args, rows)
    if any(row["status"] == "ok" for row in rows):
        return 0
    return rows[0].get("exit_code", 1)


def print_solve_report(args, rows):
    banner(f"SOLVE REPORT: {args.instance}")
    successes = sum(row["success"] for row in rows)
    print(f"\nSolver: {args.solver}   backend: {args.backend}   seed: {args.seed}")
    print(f"Successes: {successes}/{len(rows)}")
    for row in rows:
        status = "ok" if row["status"] == "ok" else f"error ({row['status']})"
        print(f"\n  Trial #{row['trial']}: {status}, correct={row['success']}")
        if row["vector"] is not None:
            print(f"  Vector: {row['vector']}  distance^2={row['distance_sq']}")
        details = row.get("details") or {}
        if args.verbose and details.get("ladder"):
            for step in details["ladder"]:
                print(f"    lambda1_hat={step['lambda1_hat']} sigma={step['sigma']} "
                      f"m={step['m']} -> {step.get('status')}")
    if args.output:
        print(f"\nResult rows written to {args.output}")
    print("\n" + "=" * 80)


def cmd_calibrate(args):
    family = read_json(args.family)
    if family.get("seed") is None:
        raise PreconditionError("family spec needs a seed", code="missing seed")
    store = CalibrationStore()
    cells = calibrate(family, store, jobs=args.jobs, progress=args.verbose, name=args.name)
    path = store.save(args.name)
    if args.output:
        write_json(args.output, store.to_json(args.name))
    banner(f"CALIBRATION TABLE: {args.name}")
    for key, cell in sorted(cells.items()):
        threshold = "none" if cell["threshold"] is None else f"{cell['threshold']:g}"
        print(f"\n  {key}: threshold eps1 = {threshold}")
        for eps1, rate in cell["rates"].items():
            print(f"    eps1={eps1:<10} success={rate:.3f}")
    if path:
        print(f"\nTable saved to {path}")
    print("\n" + "=" * 80)
    return 0


def cmd_verify(args):
    if not os.path.exists(args.results):
        raise PreconditionError(f"result file not found: {args.results}", code="missing results")
    rows = read_json_rows(args.results)
    base = os.path.dirname(os.path.abspath(args.results))
    instances = {}
    digests_bad = []

    def loader(row):
        path = row.get("instance")
        if path is None:
            raise PreconditionError("result row does not reference an instance", code="missing instance")
        if not os.path.isabs(path):
            path = os.path.join(base, path)
        if path not in instances:
            instances[path] = load_instance(path)
        if instance_digest(instances[path]) != row.get("instance_sha256"):
            digests_bad.append(row["trial"])
        return instances[path]

    report = verify_rows(rows, loader)
    for trial in digests_bad:
        report.fail(trial, "instance digest")
    if args.output:
        write_json(args.output, report.to_json())

    banner(f"VERIFY REPORT: {args.results}")
    print(f"\nRows checked: {report.rows}")
    print(f"Probabilistic bound checks: {report.bound_checks}, violations: {report.bound_violations} "
          f"(allowed {report.bound_tolerance:.1f})")
    if report.failures:
        print("\n❌ FAILED CHECKS:")
        for failure in report.failures:
            print(f"  Trial #{failure['trial']}: {failure['check']} {failure['detail']}".rstrip())
    print(f"\nResult: {'PASS' if report.passed else 'FAIL'}")
    print("\n" + "=" * 80)
    return 0 if report.passed else 4


def cmd_oracle(args):
    instance = load_instance(args.instance)
    B = instance.basis
    coeffs, lambda1_sq = shortest_vector(B)
    closest = closest_vector(instance)
    decomp = decompose(B, instance.q)
    record = {"lambda1_sq": lambda1_sq, "shortest_vector": list(B @ coeffs),
              "closest_vector": list(closest),
              "distance_sq": sum((a - b) ** 2 for a, b in zip(instance.target, closest)),
              "decomposition": decomp_to_json(decomp)}
    if args.output:
        write_json(args.output, record)
    banner(f"ORACLE REPORT: {args.instance}")
    print(f"\nlambda1^2 = {lambda1_sq}")
    print(f"Closest vector: {record['closest_vector']}  distance^2={record['distance_sq']}")
    print(f"Group: q={decomp.q} qvec={list(decomp.qvec)} rank={decomp.r}")
    if args.verbose:
        print("\nBasis (HNF, columns):")
        print(B.to_text(), end='')
    print("\n" + "=" * 80)
    return 0


def cmd_estimate(args):
    record = estimate_parameters(args.n, args.q, args.r, betas=args.beta, eps=args.eps, c=args.c,
                                 draws=args.draws, seed=args.seed)
    if args.output:
        write_json(args.output, record)
    banner(f"PARAMETER ESTIMATES: n={args.n} q={args.q} r={args.r}")
    poly = record["poly"]
    print(f"\npoly: m={poly['m']} (admissible {poly['m_admissible']})  eps1 shape={poly['eps1_shape']:.3e}")
    for row in record["tradeoff"]:
        print(f"tradeoff beta={row['beta']}: m={row['m']}  eps1 shape={row['eps1_shape']:.3e}  "
              f"block={row['block_term']:.3f} sampling={row['sampling_term']:.3f}")
    sub = record["regimes"]["sublinear"]
    print(f"\nsublinear regime: beta={sub['beta']:.3g} exponent={sub['exponent']:.4g} "
          f"(stated {sub['stated_exponent']:.4g})")
    poly_regime = record["regimes"]["polylog"]
    print(f"polylog regime: beta={poly_regime['beta']:.3g} exponent={poly_regime['exponent']:.4g} "
          f"(stated {poly_regime['stated_exponent']:.4g})")
    if "qary" in record:
        qary = record["qary"]
        print(f"\nrandom q-ary (m={qary['m']}, {qary['draws']} draws): primitive rate "
              f"{qary['primitive_rate']:.4f} (floor {qary['primitive_floor']:.4f}), "
              f"fitted delta {qary['delta_fit']:.4f}")
    print("\n" + "=" * 80)
    return 0


if __name__ == "__main__":
    sys.exit(main())
