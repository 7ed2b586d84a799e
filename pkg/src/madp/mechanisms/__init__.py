from madp.mechanisms.base import PATHS, Mechanism, MechanismAnswer
from madp.mechanisms.laplace import LaplaceSplit, laplace_uniform_split
from madp.mechanisms.ledger import BudgetExceeded, BudgetLedger
from madp.mechanisms.noise import KeyedNoise, StreamNoise
from madp.mechanisms.pmw import PMW, PMWParams, PMWState, pmw_answer
from madp.mechanisms.schedulers import (
    SchedulerState,
    efficiency_threshold,
    scheduler_efficiency_threshold,
    scheduler_run,
)
from madp.mechanisms.scr import SeededCacheReconstruct, basis_matrix, default_lambda
from madp.mechanisms.zoo import (
    MECHANISM_KINDS,
    Independent,
    MechanismParams,
    build_mechanism,
    resolve_params,
    run_sequence,
)
