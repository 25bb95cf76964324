"""
verify-censoring: exact censoring suites and lemma suites on enumerable systems.
"""

import time
from pathlib import Path
from typing import Any, Dict
import sys

sys.path.append(str(Path(__file__).parent.parent))
from exact.suites import lemma_suite, random_schedule_suite, relaxed_start_suite, subsequence_suite
from experiments.common import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, fan_out, monotone_space
from experiments.config import ExperimentConfig
from experiments.reports import ReportWriter, report
from systems.gibbs import GibbsSystem
from utils.logger import setup_logger

logger = setup_logger(__name__)

CLAIM = 'censoring updates never brings the top start closer to stationarity'


def verify_system(label: str, system: GibbsSystem, config: ExperimentConfig) -> Dict[str, Any]:
    """All suites for one system, or a refusal when it is not monotone."""
    tolerance = config.tolerance('inequality')
    space, monotone = monotone_space(label, system, tolerance)
    if not monotone.ok:
        return {'label': label, 'system': system.describe(), 'refused': 'system not monotone',
                'monotonicity': monotone.to_dict(), 'suites': []}

    max_len = int(config.param('max_len', 5))
    suites = [
        subsequence_suite(space, max_len, tolerance=tolerance),
        relaxed_start_suite(space, int(config.param('relaxed_len', 3)), tolerance=tolerance),
        random_schedule_suite(space, int(config.param('random_length', 3)),
                              float(config.param('keep_fraction', 0.5)), tolerance=tolerance),
        lemma_suite(space, int(config.param('depth', 4)), tolerance=tolerance,
                    check_extension=bool(config.param('check_extension', True))),
    ]
    for suite in suites:
        log = logger.info if suite.ok else logger.error
        log(f"{label}: {suite.claim}: {suite.cases} cases, {suite.violation_count} violations")
    return {
        'label': label,
        'system': system.describe(),
        'states': space.size,
        'monotonicity': monotone.to_dict(),
        'suites': [s.to_dict(config.record_timing) for s in suites],
    }


def cmd_verify_censoring(config: ExperimentConfig, writer: ReportWriter) -> int:
    began = time.perf_counter()
    systems = config.build_systems()
    logger.info(f"verifying censoring on {len(systems)} systems")
    results = fan_out(verify_system, [(label, system, config) for label, system in systems],
                      config.param('n_jobs'))

    refused = [r['label'] for r in results if r.get('refused')]
    violations = []
    cases = 0
    for result in results:
        writer.json(f"case-{writer.slug(result['label'])}", result)
        for suite in result['suites']:
            cases += suite['cases']
            if suite['verdict'] != 'certified':
                violations.append({'system': result['label'], 'claim': suite['claim'], 'witness': suite['witness']})

    if refused:
        verdict, code = 'refused', EXIT_CONFIG
    elif violations:
        verdict, code = 'violated', EXIT_VIOLATION
    else:
        verdict, code = 'certified', EXIT_OK
    writer.json('report', report(
        CLAIM, verdict,
        witness=violations[:20] or ([{'refused': label, 'reason': 'system not monotone'} for label in refused] or None),
        tolerance=config.tolerance('inequality'),
        seed=None,
        wall_time=writer.timing(time.perf_counter() - began),
        systems=[r['label'] for r in results],
        cases=cases,
    ))
    return code
