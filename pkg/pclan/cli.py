"""
Command line surface: `pclan <command> [options]`.

Every command prints JSON-lines records (sorted keys) on standard output and, given `--out`, also writes them (and a
CSV summary for experiments) into that directory. The exit status is 1 when an acceptance check fails and 2 when the
run cannot be carried out.
"""
import argparse
import sys
from pathlib import Path

from pclan.configuratron import ExperimentConfig
from pclan.experiments import RUNS, write_report
from pclan.experiments.reporting import dumps, write_jsonl
from pclan.lattice.catalog import beta_M, lambda_beta, window_catalog, ANCHOR
from pclan.lattice.geometry import Box, Plaquette, enumerate_through, size_counts
from pclan.lattice.universe import ContourUniverse
from pclan.metrics import oracle
from pclan.processes.bounds import BranchingSpec, rate_bundle
from pclan.processes.clan import PerfectSampler, ClanStats, clan_stats
from pclan.processes.forward import evolve, generate_marks
from pclan.utils import PClanException, PClanConfigException, derive_rng, replica_range

EXPERIMENT_COMMANDS = {'oracle-equivalence': 'oracle_equivalence', 'r2': 'r2', 'r3': 'r3', 'r4': 'r4', 'r5': 'r5',
                       'r6': 'r6', 'clan-tails': 'clan_tails'}


def _emit(records, args, name):
    records = list(records)
    for r in records:
        print(dumps(r))
    if args.out is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_jsonl(records, Path(args.out) / '{}.jsonl'.format(name))


def _seed(args, config: ExperimentConfig):
    return config.seed if args.seed is None else args.seed


def cmd_bounds(args, config):
    lam = lambda_beta(args.beta, args.nmax)
    bracket = beta_M(args.d, args.nmax)
    bundle = rate_bundle(BranchingSpec(args.beta, args.d, args.nmax), allow_supercritical=args.allow_supercritical)
    record = dict(beta=args.beta, d=args.d, n_max=args.nmax, **{'lambda': lam.value}, tail=lam.tail_bound,
                  beta_M_lo=bracket.lo, beta_M_hi=bracket.hi, a_bar=bundle.a_bar, b_bar=bundle.b_bar, M2=bundle.M2,
                  M3=bundle.M3, time_exponent=bundle.time_exponent, M0=bundle.M0)
    _emit([record], args, 'bounds')
    return True


def cmd_enumerate(args, config):
    if args.box is not None:
        catalog = window_catalog(Box(args.box), args.beta, args.nmax)
        records = [dict(plaquettes=g, size=g.size, weight=w) for g, w in catalog]
        records.append(dict(kind='summary', contours=len(catalog), total_rate=catalog.total_rate))
    else:
        p = Plaquette(*args.plaquette)
        records = [dict(plaquettes=g, size=g.size) for g in enumerate_through(p, args.nmax)]
        records.append(dict(kind='summary', plaquette=p, counts=size_counts(args.nmax)))
    _emit(records, args, 'enumerate')
    return True


def cmd_oracle(args, config):
    _emit([oracle.measure(Box(args.box), args.beta, args.nmax).to_json()], args, 'oracle')
    return True


def cmd_sample_forward(args, config):
    box = Box(args.box)
    catalog = window_catalog(box, args.beta, args.nmax)
    seed = _seed(args, config)
    records = []
    for r in replica_range(args.replicas, 'Forward', args.verbose):
        rng = derive_rng(seed, 'sample-forward', r)
        trajectory = evolve((), generate_marks(catalog, box, args.t_end, rng))
        records.extend(dict(replica=r, time=e.time, kind=e.kind, contour=e.contour) for e in trajectory.events)
        records.append(dict(replica=r, kind='final', time=args.t_end, configuration=trajectory.final_state))
    _emit(records, args, 'sample-forward')
    return True


def cmd_sample_perfect(args, config):
    box = Box(args.box)
    sampler = PerfectSampler(box, args.beta, args.nmax, allow_supercritical=args.allow_supercritical)
    seed = _seed(args, config)
    centre = (box.x0 + box.width // 2, box.y0 + box.height // 2)
    records = []
    for r in replica_range(args.replicas, 'Perfect samples', args.verbose):
        clan = sampler.clan(derive_rng(seed, 'sample-perfect', r))
        if args.emit == 'config':
            records.append(dict(replica=r, configuration=clan.state()))
        else:
            records.append(dict(replica=r, **ClanStats.of(clan, centre)._asdict()))
    _emit(records, args, 'sample-perfect')
    return True


def cmd_cluster_stats(args, config):
    seed = _seed(args, config)
    records = []
    for i, beta in enumerate(args.betas):
        BranchingSpec(beta, 2, max(args.nmax, 4)).require_subcritical(args.allow_supercritical)
        stats, capped = clan_stats([ANCHOR], ContourUniverse(beta, args.nmax), args.replicas,
                                   derive_rng(seed, 'cluster-stats', i), verbose=args.verbose)
        records.extend(dict(beta=beta, replica=r, **s._asdict()) for r, s in enumerate(stats))
        records.append(dict(kind='summary', beta=beta, completed=len(stats), capped=capped))
    _emit(records, args, 'cluster-stats')
    return True


def cmd_experiment(args, config):
    ok = True
    names = [EXPERIMENT_COMMANDS[args.command]] if args.command != 'all' else list(config.experiments)
    for name in names:
        report = RUNS[name](config[name])
        if args.verbose:
            report.log()
        for r in report.records():
            print(dumps(r))
        if args.out is not None:
            write_report(report, args.out)
        ok = ok and report.passed
    return ok


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help="Root seed, overrides the configuration's.")
    common.add_argument('--config', default=None, help="YAML or flat key=value configuration file.")
    common.add_argument('--out', default=None, help="Directory receiving JSON-lines (and CSV) outputs.")
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help="Configuration override, e.g. r5.box=16. Repeatable.")
    common.add_argument('--verbose', action='store_true')

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument('--beta', type=float, default=2.0)
    model.add_argument('--nmax', type=int, default=8)

    parser = argparse.ArgumentParser(prog='pclan', description="Exact sampling and bound verification for contour "
                                                               "loss networks.")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('bounds', parents=[common, model], help="Branching constants at one inverse temperature.")
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--allow-supercritical', action='store_true')
    p.set_defaults(handler=cmd_bounds, nmax=10)

    p = sub.add_parser('enumerate', parents=[common, model], help="Contours through a plaquette, or of a box.")
    p.add_argument('--plaquette', type=int, nargs=3, default=list(ANCHOR), metavar=('X', 'Y', 'AXIS'))
    p.add_argument('--box', type=int, default=None)
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser('oracle', parents=[common, model], help="Exact finite-volume measure of a small box.")
    p.add_argument('--box', type=int, default=2)
    p.set_defaults(handler=cmd_oracle, nmax=4)

    p = sub.add_parser('sample-forward', parents=[common, model], help="Forward loss-network runs from empty.")
    p.add_argument('--box', type=int, default=4)
    p.add_argument('--t-end', type=float, default=10.0)
    p.add_argument('--replicas', type=int, default=1)
    p.set_defaults(handler=cmd_sample_forward)

    p = sub.add_parser('sample-perfect', parents=[common, model], help="Exact window samples from clans.")
    p.add_argument('--box', type=int, default=4)
    p.add_argument('--replicas', type=int, default=1)
    p.add_argument('--emit', choices=('config', 'stats'), default='config')
    p.add_argument('--allow-supercritical', action='store_true')
    p.set_defaults(handler=cmd_sample_perfect)

    p = sub.add_parser('cluster-stats', parents=[common, model], help="Clan statistics over a grid of betas.")
    p.add_argument('--betas', type=float, nargs='+', default=[1.6, 2.0, 2.4])
    p.add_argument('--replicas', type=int, default=1000)
    p.add_argument('--allow-supercritical', action='store_true')
    p.set_defaults(handler=cmd_cluster_stats)

    for command in list(EXPERIMENT_COMMANDS) + ['all']:
        p = sub.add_parser(command, parents=[common], help="Run the {} experiment(s).".format(command))
        p.set_defaults(handler=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.set) + ([] if args.seed is None else ['seed={}'.format(args.seed)])
        config = ExperimentConfig(args.config, overrides=overrides)
        ok = args.handler(args, config)
    except (PClanException, PClanConfigException) as e:
        print("pclan: {}: {}".format(type(e).__name__, e), file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == '__main__':
    sys.exit(main())
