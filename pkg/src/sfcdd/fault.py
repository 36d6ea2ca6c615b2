"""Simulated processors with local stores, Bernoulli faults and overlap recovery.

Every virtual processor keeps its own copies of the iteration vectors on its
window, of the matrix rows it owns, of its local factorization and of the
partition bounds. Faults strike during the local solve of a cycle: the
failed processor contributes no correction and its store is wiped. A
processor that failed in the previous cycle and is healthy again first
rebuilds its data from the first processor (in curve order) that still holds
each entry. The global vectors handed to the solver are gathered from the
valid stores, so an entry whose copies were all wiped in the same cycle is
truly lost and the run stops.

A shadow copy of the last committed global state is kept only to assert that
every local copy is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConsistencyError, InvalidInputError, RecoveryFailedError
from .partition import Partition
from .schwarz import SchwarzPreconditioner, SubdomainSolver


def draw_fault_pattern(P: int, p_fault: float, rng: np.random.Generator) -> np.ndarray:
    """Ids of the processors that fail in one cycle (independent Bernoulli draws)."""
    if not 0.0 <= p_fault <= 1.0:
        raise InvalidInputError(f"fault probability must lie in [0, 1], got {p_fault}")
    return np.flatnonzero(rng.random(P) < p_fault)


@dataclass
class FaultSchedule:
    """Per-cycle failure sets drawn from one generator."""

    P: int
    p_fault: float
    rng: np.random.Generator | None
    history: list = field(default_factory=list)
    script: dict | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_fault <= 1.0:
            raise InvalidInputError(f"fault probability must lie in [0, 1], got {self.p_fault}")

    @classmethod
    def from_seed(cls, P: int, p_fault: float, seed) -> "FaultSchedule":
        return cls(P, p_fault, np.random.default_rng(seed))

    @classmethod
    def scripted(cls, P: int, script: dict) -> "FaultSchedule":
        """Deterministic failure sets ``{cycle: ids}``; cycles not listed are fault free."""
        return cls(P, 0.0, None, script={int(k): sorted(int(i) for i in v) for k, v in script.items()})

    def draw(self) -> np.ndarray:
        if self.script is not None:
            failed = np.array(self.script.get(len(self.history), []), dtype=np.int64)
            self.history.append(failed)
            return failed
        failed = draw_fault_pattern(self.P, self.p_fault, self.rng)
        self.history.append(failed)
        return failed

    @property
    def alive_counts(self) -> np.ndarray:
        return np.array([self.P - len(f) for f in self.history], dtype=np.int64)


@dataclass
class VirtualProcessor:
    id: int
    partition: Partition | None
    window: np.ndarray | None
    rows: sp.csr_matrix | None
    store: dict
    solver: SubdomainSolver | None
    coarse: object | None
    valid: bool = True

    def erase(self) -> None:
        for v in self.store.values():
            v.fill(np.nan)
        self.partition = None
        self.window = None
        self.rows = None
        self.solver = None
        self.coarse = None
        self.valid = False


class FaultEngine:
    """Fault hook for the solvers in :mod:`sfcdd.solvers`.

    ``b`` is stored per processor next to the iteration vectors.
    ``check_shadow`` compares every valid local copy against the last
    committed global state at each cycle start.
    """

    def __init__(
        self,
        precond: SchwarzPreconditioner,
        schedule: FaultSchedule,
        b: np.ndarray | None = None,
        check_shadow: bool = True,
    ):
        self.precond = precond
        self.part = precond.part
        self.schedule = schedule
        self.check_shadow = check_shadow
        A = precond.A
        N = self.part.N
        b = np.zeros(N) if b is None else np.asarray(b, dtype=float)
        self.procs = []
        for i in range(self.part.P):
            w = self.part.window(i)
            self.procs.append(
                VirtualProcessor(
                    id=i,
                    partition=self.part,
                    window=w,
                    rows=A[w].tocsr(),
                    store={"b": b[w].copy()},
                    solver=precond.solvers[i],
                    coarse=precond.coarse,
                )
            )
        self._b = b.copy()
        self.shadow: dict = {}
        self.events: list = []

    # -- hook protocol -----------------------------------------------------

    def start(self, vectors: dict) -> None:
        self.commit(vectors)

    def begin_cycle(self, k: int, vectors: dict):
        """Recover last cycle's casualties, gather the vectors, then strike.

        Processors that fail in cycle ``k`` still hold valid data while the
        cycle starts (faults hit the local solve), so they can serve as
        donors. Their stores are wiped right after the gather. If afterwards
        some entry has no valid copy left, it is lost for good and the run
        stops.
        """
        failed = self.schedule.draw()
        event = {"cycle": int(k), "failed": failed.tolist(), "reconstructed": [], "outcome": "ok"}
        self.events.append(event)
        fail_set = set(failed.tolist())
        try:
            for p in self.procs:
                if not p.valid and p.id not in fail_set:
                    self.reconstruct(p.id, k)
                    event["reconstructed"].append(p.id)
            if self.check_shadow:
                self.verify()
            gathered = {name: self.gather(name, k) for name in vectors}
            alive = np.array([p.valid and p.id not in fail_set for p in self.procs], dtype=bool)
            for i in failed:
                self.procs[i].erase()
            self._check_coverage(k)
        except RecoveryFailedError:
            event["outcome"] = "recovery-failed"
            raise
        for p in self.procs:
            self.precond.solvers[p.id] = p.solver
        return gathered, alive, len(failed)

    def commit(self, vectors: dict) -> None:
        self.shadow = {name: np.array(v, copy=True) for name, v in vectors.items()}
        for p in self.procs:
            if p.valid:
                for name, v in vectors.items():
                    p.store[name] = v[p.window].copy()

    def log(self) -> list:
        return list(self.events)

    # -- recovery ----------------------------------------------------------

    def _donors(self, i: int):
        return [p for p in self.procs if p.valid and p.id != i]

    def reconstruct(self, i: int, cycle: int | None = None) -> VirtualProcessor:
        """Rebuild processor ``i`` from surviving overlap copies."""
        proc = self.procs[i]
        donors = self._donors(i)
        if not donors:
            raise RecoveryFailedError(f"no surviving processor to rebuild {i} from", cycle, None)
        part = Partition.from_dict(donors[0].partition.to_dict())
        w = part.window(i)
        src = np.full(len(w), -1, dtype=np.int64)
        for d in donors:
            hit = (src < 0) & part.contains(d.id, w)
            src[hit] = d.id
        lost = w[src < 0]
        if len(lost):
            raise RecoveryFailedError(
                f"processor {i}: {len(lost)} entries have no surviving copy", cycle, lost.tolist()
            )
        names = set(donors[0].store)
        store = {name: np.empty(len(w)) for name in names}
        blocks, order = [], []
        for d in donors:
            sel = np.flatnonzero(src == d.id)
            if not len(sel):
                continue
            loc = part.local_position(d.id, w[sel])
            for name in names:
                store[name][sel] = d.store[name][loc]
            blocks.append(d.rows[loc])
            order.append(sel)
        perm = np.empty(len(w), dtype=np.int64)
        perm[np.concatenate(order)] = np.arange(len(w))
        rows = sp.vstack(blocks, format="csr")[perm]
        rows.sort_indices()
        A_local = rows[:, w].tocsr()
        A_local.sort_indices()
        proc.partition = part
        proc.window = w
        proc.rows = rows
        proc.store = store
        proc.solver = SubdomainSolver(i, w, A_local)
        proc.coarse = donors[0].coarse
        proc.valid = True
        return proc

    def gather(self, name: str, cycle: int | None = None) -> np.ndarray:
        out = np.empty(self.part.N)
        seen = np.zeros(self.part.N, dtype=bool)
        for p in self.procs:
            if p.valid:
                fresh = ~seen[p.window]
                out[p.window[fresh]] = p.store[name][fresh]
                seen[p.window] = True
        if not seen.all():
            lost = np.flatnonzero(~seen)
            raise RecoveryFailedError(f"{len(lost)} entries of {name} have no surviving copy", cycle, lost.tolist())
        return out

    def _check_coverage(self, cycle) -> None:
        seen = np.zeros(self.part.N, dtype=bool)
        for p in self.procs:
            if p.valid:
                seen[p.window] = True
        if not seen.all():
            lost = np.flatnonzero(~seen)
            raise RecoveryFailedError(
                f"all copies of {len(lost)} entries were lost in cycle {cycle}", cycle, lost.tolist()
            )

    def verify(self) -> None:
        """Every valid local copy must equal the shadow state exactly."""
        for p in self.procs:
            if not p.valid:
                continue
            for name, ref in self.shadow.items():
                if not np.array_equal(p.store[name], ref[p.window]):
                    raise ConsistencyError(f"processor {p.id} holds a stale copy of {name}")
            if not np.array_equal(p.store["b"], self._b[p.window]):
                raise ConsistencyError(f"processor {p.id} holds a stale copy of b")

    # -- statistics --------------------------------------------------------

    @property
    def alive_counts(self) -> np.ndarray:
        return self.schedule.alive_counts


def fault_statistics(alive_counts, P: int) -> dict:
    """Average solve rates: ``mean(p_k)/(P+1)`` and ``mean(p_k**2)/P**2``."""
    pk = np.asarray(alive_counts, dtype=float)
    if not len(pk):
        return {"r_p": float("nan"), "r_hat_p": float("nan"), "cycles": 0}
    return {
        "r_p": float(pk.mean() / (P + 1)),
        "r_hat_p": float((pk**2).mean() / P**2),
        "cycles": int(len(pk)),
    }
