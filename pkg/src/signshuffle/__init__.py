"""Sign-based finite-sum optimization under random reshuffling.

Centralized sign methods with optional anchoring and momentum, their
multi-worker counterparts with exact communication accounting, classical
baselines, runtime checks of the underlying bounds, and a sweep harness.
"""

from .distributed import (Aggregate, CommLedger, DistStepDetail, WorkerNode,
                          dist_majority_vote_run, dist_signrvm_run,
                          dist_signrvr_run, majority_vote,
                          make_rosenbrock_workers, sign_average)
from .harness import (ALGORITHMS, Cell, ConfigError, ExperimentConfig,
                      apply_scale, build_config, grid_cells, main, preset,
                      run_cell, run_experiment, select_best, validate_config)
from .metrics import (CSV_HEADER, ProcessedSeries, emit_csv, l1_norm, l2_norm,
                      log10_series, moving_average, process_series,
                      read_trace_csv)
from .optimizers import (BASELINE_KINDS, BaselineState, Permutation,
                         SignRRState, SignRVMState, SignRVRState, StepDetail,
                         TraceRecord, baseline_epoch, bias_correct, shuffle,
                         sign, signrr_epoch, signrvm_epoch, signrvr_epoch)
from .problems import (FiniteSumProblem, LogisticProblem, RosenbrockSum,
                       estimate_coordinate_smoothness, finite_diff_check,
                       load_logistic_csv, make_rosenbrock)
from .schedules import Constant, InverseSqrt, Schedule
from .theory import (LemmaReport, check_descent, check_sign_markov,
                     check_vr_bound, iterate_box, markov_suite)

__version__ = "0.1.0"
