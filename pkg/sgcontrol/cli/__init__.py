import argparse
import logging
import os
from typing import List, Optional

import numpy as np

from ..convexify import canonical_relaxation_instance, relaxation_study
from ..dynamics import integrate_plain
from ..enums import ExitCode
from ..errors import ConfigError, DivergenceError, LadderFailure, StageFailure
from ..pipeline import synthesize
from ..saturation import BASE_ORDER, RESIDUAL_TOLERANCE, ladder_build, step_residual
from ..signals import constant_signal
from ..storage import FileStorage
from ..torus import ModeSubspace, helmholtz, sobolev_norm
from .config import ExperimentConfig, load_config

COMMANDS = ['simulate', 'relax', 'ladder', 'control']

LOG_LEVELS = {
    'error': logging.ERROR,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}

parser = argparse.ArgumentParser(prog='sgcontrol',
                                 description='Second grade fluid simulations and low-mode control synthesis')
parser.add_argument('command', help='The experiment to run', choices=COMMANDS)
parser.add_argument('--config', help='JSON configuration of the run', metavar='PATH')
parser.add_argument('--out', help='Output directory (default: %(default)s)', metavar='DIR', default='sgcontrol-out')
parser.add_argument('--seed', help='Random seed, overrides SEED', type=int)

logger = logging.getLogger(__name__)


def configure_logging():
    """Configure the root logger from ``SG_LOG``."""
    name = os.environ.get('SG_LOG', 'info').strip().lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    if name not in LOG_LEVELS:
        logger.warning('Unknown SG_LOG level %r, using info', name)


def _forcing(exp: ExperimentConfig):
    return constant_signal(exp.forcing, exp.horizon) if exp.forcing is not None else None


def cmd_simulate(exp: ExperimentConfig, storage: FileStorage) -> dict:
    """Integrate the uncontrolled (or constantly controlled) system from INITIAL_STATE."""
    u0 = exp.initial_field(exp.rng())
    U0 = helmholtz(u0, exp.params)
    eta = constant_signal(exp.control, exp.horizon) if exp.control is not None else None
    logger.info('Simulating N=%d on [0, %g] with dt=%g', exp.trunc, exp.horizon, exp.step)
    traj = integrate_plain(U0, eta, exp.integrator(forcing=_forcing(exp)), exp.horizon)

    storage.save_trajectory(traj)
    if exp.snapshot_every:
        last = len(traj) - 1
        for i in sorted(set(range(0, last + 1, exp.snapshot_every)) | {last}):
            storage.save_snapshot(i, traj.state(i))
    logger.info('Final V1 norm %.6g after %d steps', traj.norms(1)[-1], len(traj) - 1)
    return {
        'steps': len(traj) - 1,
        'initial': u0.to_dict(),
        'final_V1': float(traj.norms(1)[-1]),
        'max_spillover': float(np.max(traj.spillover)),
    }


def cmd_relax(exp: ExperimentConfig, storage: FileStorage) -> dict:
    """Relaxation study of a random convexification problem over RELAX_KS."""
    instance = canonical_relaxation_instance(seed=exp.seed, trunc=exp.trunc, T=exp.horizon, dt=exp.relax_dt,
                                             directions=exp.relax_directions, geometry=exp.geometry,
                                             params=exp.params)
    logger.info('Relaxation study over k=%s', list(exp.relax_ks))
    _, table = relaxation_study(instance.decomposition, instance.background, exp.relax_ks, instance.cfg)
    storage.save_decomposition(instance.decomposition)
    storage.save_relaxation(table)
    return {
        'ks': list(table.ks),
        'slope_F': table.slope('F'),
        'slope_Kf': table.slope('Kf'),
        'decreasing': table.is_decreasing(),
    }


def cmd_ladder(exp: ExperimentConfig, storage: FileStorage) -> dict:
    """Build and verify the saturation ladder up to LADDER_ORDER."""
    ladder = ladder_build(exp.ladder_order, exp.geometry, exp.params, preferred_pairs=exp.preferred_pairs)
    residuals = [step_residual(step, exp.params) for step in ladder]
    worst = max(residuals, default=0.0)
    summary = {
        'order': exp.ladder_order,
        'q': [exp.geometry.q1, exp.geometry.q2],
        'alpha': exp.params.alpha,
        'steps': len(ladder),
        'substitutions': sum(1 for step in ladder if step.substituted),
        'max_residual': float(worst),
        'verified': bool(worst <= RESIDUAL_TOLERANCE),
    }
    storage.save_ladder(ladder, summary)
    if not summary['verified']:
        logger.error('Ladder replay residual %.3g exceeds %.0e', worst, RESIDUAL_TOLERANCE)
    return summary


def cmd_control(exp: ExperimentConfig, storage: FileStorage) -> dict:
    """Synthesize a control supported in H³_q from INITIAL_STATE to TARGET_STATE."""
    u0, uT = exp.initial_field(), exp.target_state
    epsilon = exp.resolve_epsilon(u0)
    logger.info('Synthesizing a control with epsilon=%.6g', epsilon)
    try:
        result = synthesize(u0, uT, _forcing(exp), exp.pipeline(epsilon))
    except StageFailure as e:
        storage.save_manifest({
            'command': 'control',
            'config': exp.to_dict(),
            'status': 'failed',
            'epsilon': epsilon,
            'failed_stage': e.stage,
            'achieved': e.achieved,
            'budget': e.budget,
            'attempts': [list(a) for a in e.attempts],
            'stages': [r.to_dict() for r in e.trace],
        })
        raise

    times = np.linspace(0.0, exp.horizon, exp.control_samples + 1)
    storage.save_control(result.eta_final, times, ModeSubspace.low_modes(BASE_ORDER))
    summary = result.to_dict()
    summary['epsilon'] = epsilon
    summary['target_V1'] = sobolev_norm(helmholtz(uT, exp.params), 1)
    summary['control'] = {'file': 'control.csv', 'samples': len(times),
                          'support': ModeSubspace.low_modes(BASE_ORDER).to_list()}
    return summary


HANDLERS = {
    'simulate': cmd_simulate,
    'relax': cmd_relax,
    'ladder': cmd_ladder,
    'control': cmd_control,
}


def run(command: str, config_path: Optional[str], out: str, seed: Optional[int] = None) -> ExitCode:
    """Run one command and write its artifacts below ``out``.

    Returns:
          ExitCode: 0 on success, 2 for configuration errors, 3 on divergence or an unverified ladder,
          4 when a ladder or stage fails.
    """
    try:
        exp = ExperimentConfig.from_config(load_config(config_path, seed))
        exp.require(command)
    except ConfigError as e:
        logger.error('Invalid configuration: %s', e)
        return ExitCode.config_error

    storage = FileStorage(out)
    try:
        summary = HANDLERS[command](exp, storage)
    except DivergenceError as e:
        logger.error('%s', e)
        storage.save_manifest({'command': command, 'config': exp.to_dict(), 'status': 'diverged',
                               'time': e.time, 'norm': e.norm})
        return ExitCode.diverged
    except StageFailure as e:
        logger.error('%s; attempts (k, error): %s', e, e.attempts)
        for report in e.trace:
            logger.error('  completed stage %d: error %.3e (budget %.3e, k=%d)',
                         report.stage, report.error, report.budget, report.k)
        return ExitCode.stage_failed
    except LadderFailure as e:
        logger.error('%s; tried %s', e, e.tried)
        storage.save_manifest({'command': command, 'config': exp.to_dict(), 'status': 'failed',
                               'error': str(e), 'tried': [list(t) for t in e.tried]})
        return ExitCode.stage_failed

    if summary.get('verified') is False:
        storage.save_manifest({'command': command, 'config': exp.to_dict(), 'status': 'unverified',
                               'result': summary})
        return ExitCode.unverified

    storage.save_manifest({'command': command, 'config': exp.to_dict(), 'status': 'ok', 'result': summary})
    logger.info('Results written to %s', storage.base_path)
    return ExitCode.ok


def main(argv: Optional[List[str]] = None) -> int:
    args = parser.parse_args(argv)
    configure_logging()
    return int(run(args.command, args.config, args.out, args.seed))
