"""End-to-end increment pipeline: fold, truncate, correct, solve, reduce.

Increments are indexed over the correlated occupied orbitals (those left
after any frozen core), so increment ``(0,)`` is the lowest correlated
occupied orbital. For each increment the occupied orbitals outside it are
folded into a mean field, the virtual space is truncated to frozen natural
orbitals, the lost second-order energy is added back, and the truncated
problem is handed to the solver.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

from mifno.config import RunConfig
from mifno.errors import ConfigError, DependencyError, IncompleteExpansion, OrderError
from mifno.fci import solve_increment_fci
from mifno.increments import (
    FAILED,
    SCREENED,
    SOLVED,
    Increment,
    IncrementLedger,
    increment_epsilon,
    increments_of_order,
    reconstruct,
    screen,
)
from mifno.integrals import ActiveSpaceHamiltonian, IntegralStore, build_fock, fold_spatial, read_fcidump
from mifno.ledger_store import LedgerFile, file_digest
from mifno.mp2_fno import FnoSubspace, delta_mp2, fno_decompose, fno_truncate, mp2_energy, transform_virtuals, vv_density
from mifno.qubit.resources import estimate_gates
from mifno.qubit.vqe import VqeOptions, vqe_minimize

log = logging.getLogger(__name__)

RETRIES = 2


@dataclass
class RunContext:
    """Everything an increment solve needs, rebuilt identically in each worker."""

    cfg: RunConfig
    store: IntegralStore
    core: list
    correlated: list
    virtuals: list
    e_hf: float
    e_mp2: float
    global_fno: Optional[FnoSubspace] = None

    @property
    def n_expansion(self) -> int:
        return len(self.correlated)

    def full_hamiltonian(self) -> ActiveSpaceHamiltonian:
        return fold_spatial(self.store, self.core, self.correlated + self.virtuals)


def build_context(cfg: RunConfig, store: IntegralStore | None = None) -> RunContext:
    store = store if store is not None else read_fcidump(cfg.fcidump_path)
    if store.n_electrons % 2 or store.ms2:
        raise ConfigError("only closed-shell references are supported")
    n_occ = store.n_occupied
    if cfg.frozen_core > n_occ:
        raise ConfigError(f"frozen_core {cfg.frozen_core} exceeds {n_occ} occupied orbitals")
    ctx = RunContext(cfg=cfg, store=store, core=list(range(cfg.frozen_core)),
                     correlated=list(range(cfg.frozen_core, n_occ)),
                     virtuals=list(range(n_occ, store.n_spatial)),
                     e_hf=build_fock(store, store.occupied_spin_orbitals()).e_hf, e_mp2=0.0)
    full = ctx.full_hamiltonian()
    occ, virt = full.occ_spin_orbitals(), full.virt_spin_orbitals()
    ctx.e_mp2 = mp2_energy(full, occ, virt).e2 if occ and virt else 0.0
    if cfg.fno_scope == "global" and cfg.policy_tag != "none" and virt:
        s = fno_truncate(fno_decompose(vv_density(full, occ, virt)), cfg.fno_policy)
        # the virtual set of each increment sits at different positions
        ctx.global_fno = replace(s, virt=())
    return ctx


def increment_hamiltonian(ctx: RunContext, subset) -> ActiveSpaceHamiltonian:
    orbs = [ctx.correlated[i] for i in subset]
    frozen = ctx.core + [o for o in ctx.correlated if o not in orbs]
    return fold_spatial(ctx.store, frozen, orbs + ctx.virtuals)


def truncate_increment(ctx: RunContext, ham: ActiveSpaceHamiltonian):
    """(truncated Hamiltonian, Delta E_MP2, FNO subspace or None)."""
    if ctx.cfg.policy_tag == "none" or ham.n_virtual == 0:
        return ham, 0.0, None
    if ctx.global_fno is not None:
        s = ctx.global_fno
    else:
        occ, virt = ham.occ_spin_orbitals(), ham.virt_spin_orbitals()
        s = fno_truncate(fno_decompose(vv_density(ham, occ, virt)), ctx.cfg.fno_policy)
    if s.kept == s.dim:
        # nothing discarded: keep the original orbitals and add no correction
        return ham, 0.0, s
    ham_t = transform_virtuals(ham, s)
    return ham_t, delta_mp2(ham, ham_t), s


def solve_increment(ctx: RunContext, subset) -> list[dict]:
    """Ledger records (one per configured solver) for one increment."""
    cfg = ctx.cfg
    subset = Increment(subset)
    t0 = time.perf_counter()
    ham = increment_hamiltonian(ctx, subset)
    ham_t, d_mp2, s = truncate_increment(ctx, ham)
    res = estimate_gates(ham_t)
    base = {
        "subset": list(subset),
        "order": subset.order,
        "orbitals": [ctx.correlated[i] for i in subset],
        "fno_policy": cfg.policy_tag,
        "delta_mp2": d_mp2,
        "n_occupied": ham_t.n_occupied,
        "n_kept_virtual": ham_t.n_virtual,
        "n_discarded_virtual": ham.n_virtual - ham_t.n_virtual,
        "occupancy_fraction": s.occupancy_fraction if s is not None else 1.0,
        "resources": res.to_dict(),
    }
    out = []
    for solver in cfg.solvers:
        t1 = time.perf_counter()
        extra = {}
        if solver == "fci":
            e = solve_increment_fci(ham_t)
        else:
            if ham_t.n_virtual == 0:
                e = 0.0
                extra = {"iterations": 0, "converged": True}
            else:
                o = vqe_minimize(ham_t, opts=VqeOptions(backend=cfg.vqe_backend))
                e = o.energy - ham_t.hf_energy()
                extra = {"iterations": o.iterations, "converged": o.converged}
        rec = dict(base, solver=solver, e_solver=e, e_c=e + d_mp2,
                   wall_time=round(time.perf_counter() - t1 + (t1 - t0) / len(cfg.solvers), 6))
        rec.update(extra)
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# worker pool

_WORKER_CTX: Optional[RunContext] = None


def _init_worker(cfg: RunConfig) -> None:
    global _WORKER_CTX
    _WORKER_CTX = build_context(cfg)


def _attempt(ctx: RunContext, subset):
    err = None
    for k in range(1 + RETRIES):
        try:
            return subset, solve_increment(ctx, subset), None
        except Exception as exc:  # retried, then reported as a failed increment
            err = f"{type(exc).__name__}: {exc}"
            log.warning("increment %s attempt %d failed: %s", tuple(subset), k + 1, err)
    return subset, None, err


def _worker_task(subset):
    return _attempt(_WORKER_CTX, subset)


class Scheduler:
    """Runs increments inline or on a process pool; results come back in submission order."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.pool = None
        if ctx.cfg.workers > 1:
            self.pool = ProcessPoolExecutor(max_workers=ctx.cfg.workers, initializer=_init_worker,
                                            initargs=(ctx.cfg,))

    def map(self, subsets):
        if self.pool is None:
            return (_attempt(self.ctx, s) for s in subsets)
        return self.pool.map(_worker_task, subsets)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# driver


@dataclass
class RunState:
    ctx: RunContext
    ledgers: dict
    records: dict
    failures: dict
    expansions: dict
    missing: dict


def _reduce(ledger: IncrementLedger, order: int) -> list:
    """eps for every solved increment of ``order`` whose dependencies are available."""
    done = []
    for s in sorted(k for k, st in ledger.status.items() if st == SOLVED and len(k) == order):
        try:
            increment_epsilon(ledger, s)
            done.append(s)
        except DependencyError:
            pass
    return done


def _work_list(state: RunState, order: int) -> list:
    cfg = state.ctx.cfg
    primary = state.ledgers[cfg.solvers[0]]
    if order == 1 or not cfg.screen_threshold:
        return increments_of_order(state.ctx.n_expansion, order)
    try:
        kept = screen(primary, cfg.screen_threshold, order)
    except DependencyError:
        log.warning("order %d not screened: lower-order increments missing", order)
        return increments_of_order(state.ctx.n_expansion, order)
    for solver in cfg.solvers[1:]:
        for s, st in primary.status.items():
            if st == SCREENED:
                state.ledgers[solver].mark_screened(s)
    return kept


def execute(cfg: RunConfig) -> RunState:
    ctx = build_context(cfg)
    n = cfg.order
    if n > ctx.n_expansion:
        raise ConfigError(str(OrderError(f"order {n} exceeds {ctx.n_expansion} correlated occupied orbitals")))
    digest = file_digest(cfg.fcidump_path)
    sink = LedgerFile.open(cfg.ledger_path, digest, cfg.resume)
    tag = cfg.policy_tag
    state = RunState(ctx=ctx, ledgers={s: IncrementLedger(ctx.n_expansion) for s in cfg.solvers},
                     records={}, failures={}, expansions={}, missing={})
    with Scheduler(ctx) as sched:
        for m in range(1, n + 1):
            work = _work_list(state, m)
            todo = [s for s in work if any(sink.get(s, sv, tag) is None for sv in cfg.solvers)]
            log.info("order %d: %d increments, %d to solve", m, len(work), len(todo))
            for subset, recs, err in sched.map(todo):
                if recs is None:
                    state.failures[Increment(subset)] = err
                    continue
                for rec in recs:
                    sink.write_ec(rec)
            for s in work:
                for sv in cfg.solvers:
                    rec = sink.get(s, sv, tag)
                    if rec is None:
                        state.ledgers[sv].mark(s, FAILED)
                        continue
                    state.records[(s, sv)] = rec
                    state.ledgers[sv].record_ec(s, rec["e_c"])
            fresh = set(todo)
            for sv in cfg.solvers:
                for s in _reduce(state.ledgers[sv], m):
                    if s in fresh:
                        sink.write_eps(s, sv, tag, state.ledgers[sv].eps[s])
    for sv in cfg.solvers:
        try:
            state.expansions[sv] = reconstruct(state.ledgers[sv], n, e_hf=ctx.e_hf)
        except IncompleteExpansion as exc:
            state.missing[sv] = [list(s) for s in exc.missing]
    return state
