"""
Command-line application: synthesis, profiles, landscape maps, GRAPE and validation
"""

import argparse
import json
import logging
import os
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cli.report_styles import (format_grape_summary, format_profile_summary, format_records_table,
                               format_scan_summary, format_switches, format_validation)
from core.config import DEFAULT_STEP, DEFAULT_TMAX, PROFILE_POINTS, RunConfig, default_output_dir
from core.dynamics import robustness_profile
from core.errors import ConfigurationError, PulseForgeError
from core.flows import Variant, default_cost, parse_cost, parse_variant
from core.grape import (GrapeProblem, compare_profiles, ensemble_offsets, grape_optimize, initial_phases,
                        training_fidelity)
from core.landscape import find_global, gate_matrix, grid_scan, landscape_for
from core.pulse_io import load_pulse, save_profile, save_pulse, write_csv
from core.record_store import RecordStore, load_record, write_manifest
from core.system_checker import SystemChecker
from core.validation import CRITERIA, QUICK_STEP, run_acceptance
from workers.scan_worker import ScanWorker

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
SUBCOMMANDS = ('synthesize', 'profile', 'landscape', 'grape', 'validate')


def configure_logging(level: str = 'INFO'):
    """Root logger setup, done once per process"""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def parse_interval(text: str) -> Tuple[float, float]:
    try:
        low, high = (float(v) for v in text.split(':'))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH, got {text!r}") from None
    if not low < high:
        raise argparse.ArgumentTypeError(f"empty interval {text!r}")
    return low, high


def parse_box(text: str) -> Tuple[Tuple[float, float], ...]:
    """Comma separated LOW:HIGH intervals, one per landscape axis"""
    return tuple(parse_interval(part) for part in text.split(',') if part.strip())


def parse_floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


class _UsageParser(argparse.ArgumentParser):
    """Raises instead of exiting so run() can map usage errors to exit code 2"""

    def error(self, message):
        raise ConfigurationError(message)


class PulseForgeApp:
    """Command-line front end; one handler per subcommand"""

    def __init__(self):
        self.parser = self.build_parser()
        self.system_info = SystemChecker.check_system()

    def build_parser(self) -> argparse.ArgumentParser:
        common = _UsageParser(add_help=False)
        common.add_argument('--variant', choices=[v.value for v in Variant])
        common.add_argument('--order', type=int, default=1)
        common.add_argument('--cost', choices=['energy', 'time'])
        common.add_argument('--step', type=float, default=None)
        common.add_argument('--tmax', type=float, default=DEFAULT_TMAX)
        common.add_argument('--box', type=parse_box, default=())
        common.add_argument('--out', default=str(default_output_dir()))
        common.add_argument('--seed', type=int, default=0)
        common.add_argument('--gate', default='NOT')
        common.add_argument('--offsets', type=parse_floats, default=())
        common.add_argument('--threads', type=int, default=None)
        common.add_argument('--log-level', default='INFO')

        parser = _UsageParser(prog='pulseforge', description="Robust pulse synthesis by optimal control")
        sub = parser.add_subparsers(dest='subcommand', parser_class=_UsageParser)

        synthesize = sub.add_parser('synthesize', parents=[common], help="find a robust optimal pulse")
        synthesize.add_argument('--starts', type=int, default=None, help="multistart count")
        synthesize.add_argument('--refine-count', type=int, default=12)
        synthesize.add_argument('--tol', type=float, default=None,
                                help="accepted |F*|; defaults to 1e-6, or 1e-3 and 0.1 for order 1 and 2 gates")

        profile = sub.add_parser('profile', parents=[common], help="robustness profile of a pulse file")
        profile.add_argument('pulse', help="pulse CSV (t,ux,uy or t,phi)")
        profile.add_argument('--parameter', choices=['delta', 'alpha'], default='delta')
        profile.add_argument('--range', type=parse_interval, default=(-1.0, 1.0))
        profile.add_argument('--points', type=int, default=PROFILE_POINTS)

        landscape = sub.add_parser('landscape', parents=[common], help="grid scan of the shooting objective")
        landscape.add_argument('--resolution', type=int, default=50)

        grape = sub.add_parser('grape', parents=[common], help="phase-only GRAPE comparison")
        grape.add_argument('--record', help="synthesis record JSON giving duration and reference pulse")
        grape.add_argument('--duration', type=float, default=None)
        grape.add_argument('--spins', type=int, default=100)
        grape.add_argument('--range', type=parse_interval, default=(-0.5, 0.5))
        grape.add_argument('--samples', type=int, default=200)
        grape.add_argument('--iterations', type=int, default=300)
        grape.add_argument('--profile-range', type=parse_interval, default=(-0.6, 0.6))

        validate = sub.add_parser('validate', parents=[common], help="run the acceptance suite")
        validate.add_argument('--only', type=lambda s: [p for p in s.split(',') if p], default=None)
        return parser

    def parse_args(self, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
        args = self.parser.parse_args(argv)
        if args.subcommand is None:
            raise ConfigurationError(f"choose a subcommand: {', '.join(SUBCOMMANDS)}")
        return args

    def make_config(self, args: argparse.Namespace) -> RunConfig:
        variant = args.variant
        cost = args.cost
        if variant is not None and cost is None:
            cost = default_cost(parse_variant(variant)).value
        step = args.step
        if step is None:
            step = QUICK_STEP if args.subcommand == 'validate' else DEFAULT_STEP
        if step <= 0 or args.tmax <= 0:
            raise ConfigurationError("--step and --tmax must be positive")
        if args.order < 1:
            raise ConfigurationError("--order must be at least 1")
        tolerance = getattr(args, 'tol', None)
        if tolerance is not None and tolerance <= 0:
            raise ConfigurationError("--tol must be positive")
        return RunConfig(
            subcommand=args.subcommand,
            variant=variant,
            order=args.order,
            cost=cost or 'time',
            box=tuple(args.box),
            step=step,
            tmax=args.tmax,
            out=args.out,
            seed=args.seed,
            gate=args.gate.upper(),
            offsets=tuple(args.offsets),
            threads=SystemChecker.worker_count(args.threads),
            tolerance=tolerance,
            log_level=args.log_level,
        )

    def run(self, argv=None) -> int:
        """Parse, dispatch and map failures to exit codes"""
        try:
            args = argv if isinstance(argv, argparse.Namespace) else self.parse_args(argv)
            config = self.make_config(args)
            handler = getattr(self, f"cmd_{config.subcommand}")
            return handler(config, args)
        except ConfigurationError as e:
            print(f"usage error: {e}")
            return EXIT_USAGE
        except PulseForgeError as e:
            logger.error("%s: %s", type(e).__name__, e)
            print(f"failed: {e}")
            return EXIT_NUMERICAL

    # Worker hooks

    def on_scan_progress(self, done: int, total: int):
        logger.info("evaluated %d/%d chunks", done, total)

    def on_scan_error(self, message: str):
        logger.warning("scan chunk error: %s", message)

    def make_worker(self, config: RunConfig, target=None) -> ScanWorker:
        return ScanWorker(config.tmax, config.step, target, threads=config.threads,
                          progress=self.on_scan_progress, error=self.on_scan_error)

    def _require_variant(self, config: RunConfig) -> Variant:
        if config.variant is None:
            raise ConfigurationError(f"{config.subcommand} needs --variant")
        return parse_variant(config.variant)

    def _target(self, config: RunConfig, variant: Variant):
        return gate_matrix(config.gate) if variant is Variant.GATE_TIME else None

    # Subcommands

    def cmd_synthesize(self, config: RunConfig, args) -> int:
        variant = self._require_variant(config)
        target = self._target(config, variant)
        scape = landscape_for(variant, config.order, parse_cost(config.cost), config.offsets)
        worker = self.make_worker(config, target)
        record = find_global(variant, config.order, box=config.box or None, count=args.starts, seed=config.seed,
                             t_max=config.tmax, step=config.step, target=target,
                             refine_count=args.refine_count, evaluate=worker.map, landscape=scape,
                             tolerance=config.tolerance)
        store = RecordStore(config.out)
        path = store.save_record(record, config)
        print(format_records_table([record]))
        switches = format_switches(record)
        if switches:
            print(switches)
        print(f"record: {path}")
        return EXIT_OK

    def cmd_profile(self, config: RunConfig, args) -> int:
        field = load_pulse(args.pulse)
        grid = np.linspace(args.range[0], args.range[1], args.points)
        profile = robustness_profile(field, args.parameter, grid, step=config.step)
        out = Path(config.out) / f"{Path(args.pulse).stem}.{args.parameter}.profile.csv"
        save_profile(profile, out)
        maxima = profile.local_maxima()
        write_manifest(out, config, 'profile', {'pulse': os.path.abspath(args.pulse), 'local_maxima': maxima})
        print(format_profile_summary(profile, maxima))
        print(f"profile: {out}")
        return EXIT_OK

    def cmd_landscape(self, config: RunConfig, args) -> int:
        variant = self._require_variant(config)
        target = self._target(config, variant)
        scape = landscape_for(variant, config.order, parse_cost(config.cost), config.offsets)
        if config.box:
            scape = scape.with_box(config.box)
        worker = self.make_worker(config, target)
        scan = grid_scan(scape, args.resolution, config.tmax, config.step, target, evaluate=worker.map)

        base = Path(config.out) / f"{variant.value}-o{config.order}"
        table = base.with_suffix('.scan.csv')
        scan.to_csv(table)
        write_manifest(table, config, 'scan')
        if scape.dimension == 2:
            for quantity in ('Fstar', 'tstar', 'Astar'):
                path = base.with_suffix(f'.{quantity}.csv')
                scan.map_to_csv(quantity, path)
                write_manifest(path, config, f'map:{quantity}')
        print(format_scan_summary(scan))
        print(f"scan: {table}")
        return EXIT_OK

    def cmd_grape(self, config: RunConfig, args) -> int:
        reference = None
        duration = args.duration
        if args.record:
            record, _ = load_record(args.record)
            reference = record.field
            duration = duration or record.t_star
        if duration is None:
            raise ConfigurationError("grape needs --duration or --record")

        problem = GrapeProblem(ensemble_offsets(args.spins, *args.range), duration, args.samples)
        phases = initial_phases(problem, reference, seed=config.seed)
        result = grape_optimize(problem, args.iterations, phases0=phases)

        out = Path(config.out)
        pulse_path = save_pulse(result.pulse, out / 'grape.pulse.csv')
        write_manifest(pulse_path, config, 'grape-pulse', {'fidelity': result.fidelity})
        history_path = write_csv(out / 'grape.history.csv', ['iteration', 'fidelity'], enumerate(result.history))
        write_manifest(history_path, config, 'grape-history')

        grid = np.linspace(args.profile_range[0], args.profile_range[1], PROFILE_POINTS)
        grape_profile = robustness_profile(result.pulse, 'delta', grid, step=config.step)
        save_profile(grape_profile, out / 'grape.profile.csv')
        reference_fidelity = maxima = None
        if reference is not None:
            reference_fidelity = training_fidelity(problem, reference, step=config.step)
            reference_profile = robustness_profile(reference, 'delta', grid, step=config.step)
            save_profile(reference_profile, out / 'reference.profile.csv')
            maxima = compare_profiles(grape_profile, reference_profile)
        print(format_grape_summary(result, reference_fidelity, maxima))
        print(f"pulse: {pulse_path}")
        return EXIT_OK

    def cmd_validate(self, config: RunConfig, args) -> int:
        unknown = sorted(set(args.only or ()) - set(CRITERIA))
        if unknown:
            raise ConfigurationError(f"unknown criteria {', '.join(unknown)}; choose from {', '.join(CRITERIA)}")
        report = run_acceptance(config.step, config.out, args.only)
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / 'validation.json', 'w', encoding='utf-8') as f:
            json.dump(dict(report.to_dict(), config=config.to_dict(), system=self.system_info), f, indent=2)
        print(format_validation(report))
        return EXIT_OK if report.passed else EXIT_NUMERICAL


def run(argv: Optional[List[str]] = None) -> int:
    return PulseForgeApp().run(argv)
