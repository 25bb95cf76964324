"""
Pieces shared by the experiment commands: exit codes, the monotonicity gate
and worker fan-out over systems.
"""

from typing import Any, Callable, List, Optional, Sequence, Tuple
import sys
from pathlib import Path

from joblib import Parallel, delayed

sys.path.append(str(Path(__file__).parent.parent))
from systems.certification import MonotonicityReport, verify_monotone
from systems.gibbs import GibbsSystem
from systems.state_space import StateSpace, enumerate_states
from utils.config import setting
from utils.logger import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def monotone_space(label: str, system: GibbsSystem,
                   tolerance: Optional[float] = None) -> Tuple[StateSpace, MonotonicityReport]:
    """Enumerate Omega and run the monotonicity check; callers refuse on a failed check."""
    space = enumerate_states(system)
    report = verify_monotone(system, space, tolerance)
    if not report.ok:
        logger.error(f"{label}: system not monotone, {report.violation}")
    return space, report


def fan_out(fn: Callable[..., Any], cases: Sequence[Tuple], n_jobs: Optional[int] = None) -> List[Any]:
    """fn(*case) for every case, in case order."""
    n_jobs = int(setting('parallel.n_jobs', 1)) if n_jobs is None else int(n_jobs)
    if n_jobs == 1 or len(cases) <= 1:
        return [fn(*case) for case in cases]
    return Parallel(n_jobs=n_jobs, prefer='threads')(delayed(fn)(*case) for case in cases)
