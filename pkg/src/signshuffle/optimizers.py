"""Epoch drivers for sign-based reshuffling methods and baselines.

Each driver advances one epoch: it derives that epoch's component order (a
fresh permutation for the reshuffling family, with-replacement draws for
the classical baselines), walks the inner iterations, and returns the
updated state plus one telemetry record per recorded iteration.

The anchored methods keep an epoch anchor y (the iterate at the start of
the epoch) and a cached full gradient there.  Inner updates use the
semi-stochastic estimate

    v = grad_i(x) - grad_i(y) + full_grad(y)

and are applied only while the iterate stays within a freeze threshold of
the anchor in the sup norm; otherwise the iterate is left in place for that
iteration (the estimate, and any momentum built from it, still advances).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics, streams
from .problems import FiniteSumProblem
from .schedules import Schedule

Array = np.ndarray

BASELINE_KINDS = ("sgd", "rr", "signsgd", "signum", "adam")


def sign(v) -> Array:
    """Element-wise sign with sign(0) = 0; NaN entries are an error."""
    v = np.asarray(v, dtype=float)
    if np.isnan(v).any():
        raise FloatingPointError("sign: NaN entry in input")
    return np.sign(v)


@dataclass(frozen=True)
class Permutation:
    """A component ordering for one epoch, with its provenance."""

    order: Array
    epoch: int
    seed: int
    worker: int = 0


def shuffle(n: int, t: int, master_seed: int, worker: int = 0) -> Permutation:
    """Permutation of range(n) for epoch t, deterministic in all arguments."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if t < 0:
        raise ValueError(f"epoch index must be non-negative, got {t}")
    rng = streams.derive(master_seed, streams.SHUFFLE, worker, t)
    order = rng.permutation(n)
    order.setflags(write=False)
    return Permutation(order=order, epoch=t, seed=master_seed, worker=worker)


def bias_correct(momentum: Array, beta: float, i: int) -> Array:
    """Debiased view momentum / (1 - beta^(i+1)) after i+1 accumulations.

    The correction rescales by a positive factor, so it never changes any
    sign; it exists for diagnostics, not for the updates themselves.
    """
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if i < 0:
        raise ValueError(f"iteration index must be non-negative, got {i}")
    return momentum / (1.0 - beta ** (i + 1))


@dataclass(slots=True)
class TraceRecord:
    """Telemetry for one inner iteration, taken before the update."""

    t: int
    i: int
    f: float
    grad_l1: float
    grad_l2: float
    applied: bool
    gamma: float
    d_threshold: float


@dataclass(slots=True)
class StepDetail:
    """Full per-iteration state for trajectory checks and replays.

    ``stoch_grad`` is the estimate feeding the update (a component gradient
    for plain reshuffling, the semi-stochastic estimate for the anchored
    methods); ``direction`` is the sign vector actually applied, zeros on a
    frozen iteration, and None for magnitude-step baselines.
    """

    t: int
    i: int
    applied: bool
    gamma: float
    d_threshold: float
    dist_inf: float
    f_before: float
    f_after: float
    grad_before: Array
    stoch_grad: Array
    direction: Array | None
    momentum: Array | None
    x: Array
    y: Array | None


@dataclass
class SignRRState:
    x: Array
    seed: int
    t: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)


@dataclass
class SignRVRState:
    x: Array
    seed: int
    t: int = 0
    i: int = 0
    y: Array | None = None
    anchor_grad: Array | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)


@dataclass
class SignRVMState(SignRVRState):
    beta: float = 0.9
    momentum: Array | None = None

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")


@dataclass
class BaselineState:
    x: Array
    seed: int
    t: int = 0
    steps: int = 0
    m: Array | None = None
    v: Array | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)


def _check_state(state, problem: FiniteSumProblem) -> None:
    if state.x.shape != (problem.d,):
        raise ValueError(f"state dimension {state.x.shape} does not match problem ({problem.d},)")


def _iterations(n: int, batch_size: int) -> int:
    if batch_size < 1:
        raise ValueError(f"batch_size must be at least 1, got {batch_size}")
    return -(-n // batch_size)


def _epoch_batches(perm_order: Array, batch_size: int):
    if batch_size == 1:
        return perm_order
    return [perm_order[k:k + batch_size] for k in range(0, perm_order.size, batch_size)]


def _probe(problem: FiniteSumProblem, x: Array):
    g = problem.full_grad(x)
    return problem.value(x), g, metrics.l1_norm(g), metrics.l2_norm(g)


def signrr_epoch(state: SignRRState, problem: FiniteSumProblem, gamma: Schedule, *,
                 batch_size: int = 1, telemetry_stride: int = 1, detail=None):
    """One reshuffled epoch of plain sign steps: x <- x - gamma * sign(grad_i(x))."""
    _check_state(state, problem)
    if telemetry_stride < 1:
        raise ValueError(f"telemetry_stride must be at least 1, got {telemetry_stride}")
    t = state.t
    perm = shuffle(problem.n, t, state.seed)
    n_iter = _iterations(problem.n, batch_size)
    batches = _epoch_batches(perm.order, batch_size)
    x = state.x
    records = []
    for i in range(n_iter):
        lr = gamma.value_at(t, i, n_iter)
        if batch_size == 1:
            g = problem.component_grad(int(batches[i]), x)
        else:
            g = problem.batch_grad(batches[i], x)
        direction = sign(g)
        want_record = i % telemetry_stride == 0
        if want_record or detail is not None:
            fx, grad_full, l1, l2 = _probe(problem, x)
            if want_record:
                records.append(TraceRecord(t, i, fx, l1, l2, True, lr, 0.0))
        x_next = x - lr * direction
        if detail is not None:
            detail.append(StepDetail(t, i, True, lr, 0.0, 0.0, fx, problem.value(x_next),
                                     grad_full, g, direction, None, x, None))
        x = x_next
    state.x = x
    state.t = t + 1
    return state, records


def _semi_stochastic(problem, batch, batch_size, x, y, anchor_grad):
    if batch_size == 1:
        k = int(batch)
        return (problem.component_grad(k, x) - problem.component_grad(k, y)) + anchor_grad
    return (problem.batch_grad(batch, x) - problem.batch_grad(batch, y)) + anchor_grad


def signrvr_epoch(state: SignRVRState, problem: FiniteSumProblem, gamma: Schedule,
                  dthr: Schedule, *, batch_size: int = 1, telemetry_stride: int = 1,
                  detail=None):
    """One anchored variance-reduced epoch of sign steps.

    The epoch anchor is the incoming iterate; its full gradient is computed
    once.  Each inner iteration forms the semi-stochastic estimate and
    applies a sign step only while ||x - y||_inf stays within the freeze
    threshold.
    """
    _check_state(state, problem)
    if telemetry_stride < 1:
        raise ValueError(f"telemetry_stride must be at least 1, got {telemetry_stride}")
    t = state.t
    perm = shuffle(problem.n, t, state.seed)
    n_iter = _iterations(problem.n, batch_size)
    batches = _epoch_batches(perm.order, batch_size)
    y = state.x
    anchor_grad = problem.full_grad(y)
    state.y = y
    state.anchor_grad = anchor_grad
    x = y
    records = []
    for i in range(n_iter):
        lr = gamma.value_at(t, i, n_iter)
        cap = dthr.value_at(t, i, n_iter)
        v = _semi_stochastic(problem, batches[i], batch_size, x, y, anchor_grad)
        dist = float(np.abs(x - y).max())
        applied = dist <= cap
        if applied:
            direction = sign(v)
            x_next = x - lr * direction
        else:
            direction = np.zeros_like(x)
            x_next = x
        want_record = i % telemetry_stride == 0
        if want_record or detail is not None:
            fx, grad_full, l1, l2 = _probe(problem, x)
            if want_record:
                records.append(TraceRecord(t, i, fx, l1, l2, applied, lr, cap))
        if detail is not None:
            detail.append(StepDetail(t, i, applied, lr, cap, dist, fx, problem.value(x_next),
                                     grad_full, v, direction, None, x, y))
        x = x_next
        state.i = i
    state.x = x
    state.t = t + 1
    return state, records


def signrvm_epoch(state: SignRVMState, problem: FiniteSumProblem, gamma: Schedule,
                  dthr: Schedule, *, carry_momentum: bool = False, batch_size: int = 1,
                  telemetry_stride: int = 1, detail=None):
    """Anchored epoch whose sign steps follow a momentum of the estimates.

    The momentum recurrence runs on every inner iteration, frozen ones
    included; only the iterate update is gated by the freeze threshold.
    Momentum restarts from zero each epoch unless ``carry_momentum`` is set.
    """
    _check_state(state, problem)
    if telemetry_stride < 1:
        raise ValueError(f"telemetry_stride must be at least 1, got {telemetry_stride}")
    t = state.t
    beta = state.beta
    perm = shuffle(problem.n, t, state.seed)
    n_iter = _iterations(problem.n, batch_size)
    batches = _epoch_batches(perm.order, batch_size)
    y = state.x
    anchor_grad = problem.full_grad(y)
    state.y = y
    state.anchor_grad = anchor_grad
    if not carry_momentum or state.momentum is None:
        mom = np.zeros_like(state.x)
    else:
        mom = state.momentum
    x = y
    records = []
    for i in range(n_iter):
        lr = gamma.value_at(t, i, n_iter)
        cap = dthr.value_at(t, i, n_iter)
        v = _semi_stochastic(problem, batches[i], batch_size, x, y, anchor_grad)
        mom = beta * mom + (1.0 - beta) * v
        dist = float(np.abs(x - y).max())
        applied = dist <= cap
        if applied:
            direction = sign(mom)
            x_next = x - lr * direction
        else:
            direction = np.zeros_like(x)
            x_next = x
        want_record = i % telemetry_stride == 0
        if want_record or detail is not None:
            fx, grad_full, l1, l2 = _probe(problem, x)
            if want_record:
                records.append(TraceRecord(t, i, fx, l1, l2, applied, lr, cap))
        if detail is not None:
            detail.append(StepDetail(t, i, applied, lr, cap, dist, fx, problem.value(x_next),
                                     grad_full, v, direction, mom, x, y))
        x = x_next
        state.i = i
    state.x = x
    state.t = t + 1
    state.momentum = mom
    return state, records


def baseline_epoch(kind: str, state: BaselineState, problem: FiniteSumProblem, *,
                   gamma: Schedule, batch_size: int = 1, beta: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8,
                   telemetry_stride: int = 1, detail=None):
    """One epoch of a classical baseline.

    Kinds: "sgd" and "signsgd" sample components uniformly with replacement;
    "rr" reshuffles like the sign methods but takes magnitude steps;
    "signum" is sign of a momentum of with-replacement gradients; "adam"
    uses the standard first/second moment recursion with bias correction
    (``beta`` doubles as its first-moment rate).
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}")
    _check_state(state, problem)
    if telemetry_stride < 1:
        raise ValueError(f"telemetry_stride must be at least 1, got {telemetry_stride}")
    if kind in ("signum", "adam") and not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    t = state.t
    n_iter = _iterations(problem.n, batch_size)
    if kind == "rr":
        batches = _epoch_batches(shuffle(problem.n, t, state.seed).order, batch_size)
    else:
        draws = streams.derive(state.seed, streams.SAMPLE, 0, t).integers(
            0, problem.n, size=(n_iter, batch_size))
    x = state.x
    records = []
    for i in range(n_iter):
        lr = gamma.value_at(t, i, n_iter)
        if kind == "rr":
            batch = batches[i]
            g = problem.component_grad(int(batch), x) if batch_size == 1 \
                else problem.batch_grad(batch, x)
        else:
            batch = draws[i]
            g = problem.component_grad(int(batch[0]), x) if batch_size == 1 \
                else problem.batch_grad(batch, x)
        direction = None
        if kind in ("sgd", "rr"):
            step = lr * g
        elif kind == "signsgd":
            direction = sign(g)
            step = lr * direction
        elif kind == "signum":
            if state.m is None:
                state.m = np.zeros_like(x)
            state.m = beta * state.m + (1.0 - beta) * g
            direction = sign(state.m)
            step = lr * direction
        else:  # adam
            if state.m is None:
                state.m = np.zeros_like(x)
                state.v = np.zeros_like(x)
            state.m = beta * state.m + (1.0 - beta) * g
            state.v = beta2 * state.v + (1.0 - beta2) * g * g
            state.steps += 1
            m_hat = state.m / (1.0 - beta ** state.steps)
            v_hat = state.v / (1.0 - beta2 ** state.steps)
            step = lr * m_hat / (np.sqrt(v_hat) + eps)
        want_record = i % telemetry_stride == 0
        if want_record or detail is not None:
            fx, grad_full, l1, l2 = _probe(problem, x)
            if want_record:
                records.append(TraceRecord(t, i, fx, l1, l2, True, lr, 0.0))
        x_next = x - step
        if detail is not None:
            detail.append(StepDetail(t, i, True, lr, 0.0, 0.0, fx, problem.value(x_next),
                                     grad_full, g, direction,
                                     None if state.m is None else state.m, x, None))
        x = x_next
    state.x = x
    state.t = t + 1
    return state, records
