"""See-saw search for high-acceptance prover strategies.

Acceptance is ``<psi| A |psi>`` with ``A = sum_q w_q X_q^dag Pi_q X_q`` over the
questions ``q`` (``X_q`` the provers' unitaries, ``Pi_q`` the verifier's accepting
effect). Each sweep

1. replaces ``psi`` by the top eigenvector of ``A`` (exactly optimal), then
2. visits every stored unitary ``W`` in turn. With everything else fixed the
   acceptance is a PSD quadratic form ``vec(W)^dag T vec(W)``; ``T`` is built
   from reduced densities, and ``W`` climbs it by gradient steps retracted onto
   the unitary group with the polar decomposition, halving the step until the
   objective increases.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import code5
from .hamiltonian import HamiltonianInstance
from .protocol import (
    MAX_EXACT_QUBITS,
    CodeTestAll,
    CodeTestMixed,
    EnergyTest,
    accept_probability_exact,
    question_distribution,
)
from .qmath import PureState, apply_op, haar_unitary, polar_unitary, random_state_vector, reduced_density
from .strategy import HaarRule, ProverStrategy, RegisterLayout, TableRule, question_sets

DENSE_EIG_MAX_DIM = 256
EFFECT_CACHE_MAX_QUBITS = 10


@dataclass
class OptimizerConfig:
    max_sweeps: int = 30
    tolerance: float = 1e-9
    seed: int = 0
    step_rule: str = "backtracking"  # or "fixed-step"
    initial_step: float = 0.1
    max_halvings: int = 30
    inner_steps: int = 25
    block_starts: int = 4
    aux_qubits: int = 0
    align_below: float = 1e-2  # sweep gain that triggers the align move
    unitarize_every_step: bool = True

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.step_rule not in ("backtracking", "fixed-step"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not self.unitarize_every_step:
            raise ValueError("unitaries are always re-projected after a step")


@dataclass
class OptimizerTrace:
    acceptance: list
    strategy: ProverStrategy
    converged: bool
    restart: Optional[int] = None
    seed: Optional[int] = None
    restarts_best: list = field(default_factory=list)

    @property
    def final(self) -> float:
        return self.acceptance[-1]


class _Problem:
    """Working copy of a strategy plus the question list, in optimizer form."""

    def __init__(self, instance: HamiltonianInstance, strategy: ProverStrategy):
        self.instance = instance
        self.layout = lay = strategy.layout
        if lay.total_qubits > MAX_EXACT_QUBITS:
            raise MemoryError(f"optimizer limited to {MAX_EXACT_QUBITS} strategy qubits")
        self.N = lay.total_qubits
        self.r = lay.r
        self.k = strategy.k
        self.psi = strategy.shared_state.amplitudes.copy()
        self.unitaries = {}
        for t in range(lay.r):
            for i in range(lay.n):
                self.unitaries[("U", t, i)] = strategy.unitary(t, _single(i)).copy()
        sets = set(question_sets(lay.n, strategy.k) if strategy.k <= lay.n else [])
        sets |= {term.support for term in instance.terms}
        for t in range(lay.r):
            for S in sorted(sets):
                self.unitaries[("V", t, S)] = strategy.unitary(t, _set(S)).copy()
        self.questions = []  # (weight, question, [key per prover], answer qubits)
        for q, w in question_distribution(instance, lay.r):
            self.questions.append((w, q, self._keys(q), self._answers(q)))
        self.by_key: dict = {}
        for idx, (_, _, keys, _) in enumerate(self.questions):
            for key in keys:
                self.by_key.setdefault(key, []).append(idx)
        self._effects: dict = {}

    def _keys(self, q):
        if isinstance(q, EnergyTest):
            S = self.instance.terms[q.j].support
            return [("V", t, S) for t in range(self.r)]
        if isinstance(q, CodeTestAll):
            return [("U", t, q.i) for t in range(self.r)]
        return [("V", t, q.S) if t == q.odd_prover else ("U", t, q.i) for t in range(self.r)]

    def _answers(self, q):
        lay = self.layout
        if isinstance(q, EnergyTest):
            return [s for i in self.instance.terms[q.j].support for s in lay.group(i)]
        return lay.group(q.i)

    # ---- effects

    def apply_effect(self, vec, q, positions, n):
        """Apply ``Pi_q`` to ``vec``; ``positions`` maps global qubit -> local index."""
        lay = self.layout
        if isinstance(q, EnergyTest):
            term = self.instance.terms[q.j]
            dec = code5.decoding_unitary()
            groups = [[positions[s] for s in lay.group(i)] for i in term.support]
            for g in groups:
                vec = apply_op(vec, dec, g, n)
            eye = np.eye(term.matrix.shape[0])
            vec = apply_op(vec, eye - term.matrix, [g[0] for g in groups], n)
            for g in groups:
                vec = apply_op(vec, dec.conj().T, g, n)
            return vec
        return apply_op(vec, code5.check_projector(), [positions[s] for s in lay.group(q.i)], n)

    def effect_on(self, idx, union):
        key = (idx, tuple(union))
        if key not in self._effects:
            _, q, _, _ = self.questions[idx]
            n = len(union)
            pos = {g: a for a, g in enumerate(union)}
            mat = self.apply_effect(np.eye(2**n, dtype=complex), q, pos, n)
            if n > EFFECT_CACHE_MAX_QUBITS:
                return mat
            self._effects[key] = mat
        return self._effects[key]

    # ---- objective pieces

    def _apply_block(self, vec, t, u):
        return apply_op(vec, u, self.layout.block(t), self.N)

    def answered(self, idx, vec=None, skip=None):
        _, _, keys, _ = self.questions[idx]
        vec = self.psi if vec is None else vec
        for t, key in enumerate(keys):
            if t != skip:
                vec = self._apply_block(vec, t, self.unitaries[key])
        return vec

    def objective(self) -> float:
        total = 0.0
        ident = {g: g for g in range(self.N)}
        for idx, (w, q, _, answers) in enumerate(self.questions):
            phi = self.answered(idx)
            total += w * float(np.vdot(phi, self.apply_effect(phi, q, ident, self.N)).real)
        return total

    def test2_locals(self):
        """Per qubit ``i``: ``(U_i frames, [(targets, M_{i,t})])`` where ``M_{i,t}`` sums the
        mixed-question effects with odd prover ``t`` (and, for ``t = 0``, the all-U effect)
        as one operator on ``group(i) + block(t)``."""
        lay = self.layout
        out = []
        for i in range(lay.n):
            us = [self.unitaries[("U", t, i)] for t in range(self.r)]
            ops = []
            for t in range(self.r):
                targets = sorted(set(lay.group(i)) | set(lay.block(t)))
                n = len(targets)
                pos = {g: a for a, g in enumerate(targets)}
                blk = [pos[g] for g in lay.block(t)]
                eye = np.eye(2**n, dtype=complex)
                mat = np.zeros((2**n, 2**n), dtype=complex)
                for w, q, keys, _ in self.questions:
                    if getattr(q, "i", None) != i:
                        continue
                    if isinstance(q, CodeTestAll):
                        if t == 0:
                            mat += w * self.apply_effect(eye, q, pos, n)
                    elif q.odd_prover == t:
                        swap_in = self.unitaries[keys[t]] @ us[t].conj().T
                        chi = apply_op(eye, swap_in, blk, n)
                        chi = self.apply_effect(chi, q, pos, n)
                        mat += w * apply_op(chi, swap_in.conj().T, blk, n)
                ops.append((targets, mat))
            out.append((us, ops))
        return out

    def matvec(self, v, locals_=None):
        """``A v`` for the acceptance operator ``A``."""
        out = np.zeros_like(v)
        ident = {g: g for g in range(self.N)}
        # test 1
        for idx, (w, q, keys, _) in enumerate(self.questions):
            if isinstance(q, EnergyTest):
                phi = self.answered(idx, v)
                phi = self.apply_effect(phi, q, ident, self.N)
                for t, key in enumerate(keys):
                    phi = self._apply_block(phi, t, self.unitaries[key].conj().T)
                out += w * phi
        # test 2, grouped by qubit so the common U_i frame is applied once
        for us, ops in locals_ if locals_ is not None else self.test2_locals():
            phi = v
            for t, u in enumerate(us):
                phi = self._apply_block(phi, t, u)
            acc = np.zeros_like(v)
            for targets, mat in ops:
                acc += apply_op(phi, mat, targets, self.N)
            for t, u in enumerate(us):
                acc = self._apply_block(acc, t, u.conj().T)
            out += acc
        return out

    # ---- steps

    def state_step(self) -> None:
        dim = 2**self.N
        old = self.psi
        loc = self.test2_locals()
        mv = lambda x: self.matvec(x, loc)  # noqa: E731
        old_val = float(np.vdot(old, mv(old)).real)
        if dim <= DENSE_EIG_MAX_DIM:
            a = mv(np.eye(dim, dtype=complex))
            a = (a + a.conj().T) / 2
            w, v = np.linalg.eigh(a)
            new = v[:, -1]
        else:
            op = LinearOperator((dim, dim), matvec=mv, dtype=complex)
            w, v = eigsh(op, k=1, which="LA", v0=old, tol=1e-10, maxiter=20 * dim)
            new = v[:, 0]
        new = new / np.linalg.norm(new)
        new_val = float(np.vdot(new, mv(new)).real)
        if new_val >= old_val:
            self.psi = new

    def quadratic_form(self, key) -> np.ndarray:
        """``T`` with acceptance = ``vec(W)^dag T vec(W) + const`` for the unitary ``key``."""
        t = key[1]
        lay = self.layout
        block = lay.block(t)
        d = 2 ** len(block)
        out = np.zeros((d * d, d * d), dtype=complex)
        for idx in self.by_key.get(key, []):
            w, q, keys, answers = self.questions[idx]
            if keys[t] != key:
                continue
            phi = self.answered(idx, skip=t)
            # the effect acts as identity on block qubits outside the answer
            b_in = [s for s in block if s in answers]
            b_out = [s for s in block if s not in answers]
            others = [s for s in answers if s not in block]
            rho = reduced_density(phi, b_in + b_out + others, self.N)
            pi = self.effect_on(idx, b_in + others)
            di, do, o = 2 ** len(b_in), 2 ** len(b_out), 2 ** len(others)
            p4 = pi.reshape(di, o, di, o)
            r6 = rho.reshape(di, do, o, di, do, o)
            # T[a', b', a, b] = sum_{o, o'} Pi[a', o', a, o] rho[b, o, b', o'], with a = (x, u)
            # and Pi diagonal in the outside part u
            red = np.einsum("xPyO,bcOBCP->xBCybc", p4, r6, optimize=True)
            tq = np.einsum("xBCybc,uv->xuBCyvbc", red, np.eye(do))
            out += w * _to_block_order(tq, len(b_in), len(b_out), [block.index(s) for s in b_in + b_out])
        return (out + out.conj().T) / 2

    def unitary_step(self, key, config: OptimizerConfig, rng: np.random.Generator) -> None:
        """Ascend the quadratic form of one unitary from its current value and from
        ``config.block_starts`` random unitaries; keep the best end point."""
        tmat = self.quadratic_form(key)
        if not np.any(tmat):
            return
        w = self.unitaries[key]
        d = w.shape[0]

        def value(u):
            v = u.reshape(-1)
            return float(np.vdot(v, tmat @ v).real)

        best, best_val = self._ascend(tmat, w, value, config)
        for _ in range(config.block_starts):
            cand, val = self._ascend(tmat, haar_unitary(d, rng), value, config)
            if val > best_val:
                best, best_val = cand, val
        self.unitaries[key] = best

    @staticmethod
    def _ascend(tmat, w, value, config):
        d = w.shape[0]
        cur = value(w)
        scale = np.linalg.norm(tmat, 2)
        for _ in range(config.inner_steps):
            grad = (tmat @ w.reshape(-1)).reshape(d, d) / scale
            # Riemannian gradient on U(d): project onto the tangent space at w
            skew = w.conj().T @ grad
            skew = (skew - skew.conj().T) / 2
            direction = w @ skew
            if np.linalg.norm(direction) < 1e-14:
                break
            step = config.initial_step
            accepted = False
            for _ in range(config.max_halvings if config.step_rule == "backtracking" else 1):
                cand = polar_unitary(w + step * direction)
                val = value(cand)
                if val > cur:
                    accepted = True
                    break
                step /= 2
            if not accepted:
                break
            gain = val - cur
            w, cur = cand, val
            if gain < 1e-15:
                break
        return w, cur

    def align_step(self, current: float) -> float:
        """Escape move for stalled sweeps.

        Coordinate steps rotate one unitary at a time, yet perfect strategies use
        a single frame per prover. The candidate gives every unitary of prover
        ``t`` the value of ``U_0^t`` and re-solves the state. Its value does not
        depend on which unitary is copied: with one frame ``W_t`` per prover the
        optimal state simply absorbs ``(x)_t W_t``. Kept if it beats ``current``.
        """
        saved = dict(self.unitaries), self.psi
        for key in self.unitaries:
            self.unitaries[key] = saved[0][("U", key[1], 0)]
        self.state_step()
        val = self.objective()
        if val > current + 1e-12:
            return val
        self.unitaries, self.psi = saved
        return current

    def to_strategy(self, k: int) -> ProverStrategy:
        lay = self.layout
        singles = {(t, i): self.unitaries[("U", t, i)] for t in range(lay.r) for i in range(lay.n)}
        table = {(t, S): u for (kind, t, S), u in self.unitaries.items() if kind == "V"}
        psi = self.psi / np.linalg.norm(self.psi)
        return ProverStrategy(lay, PureState(lay.total_qubits, psi), singles, TableRule(2**lay.block_size, table), k)


def _to_block_order(tq, n_in, n_out, local):
    """Reorder the four ``2**len(block)`` indices of ``tq`` from the local qubit order
    (``local[a]`` = block position of local qubit ``a``) to block order."""
    nb = n_in + n_out
    d = 2**nb
    t = tq.reshape((2,) * (4 * nb))
    inv = [local.index(p) for p in range(nb)]
    axes = [blk * nb + a for blk in range(4) for a in inv]
    return t.transpose(axes).reshape(d * d, d * d)


def _single(i):
    from .strategy import SingleQubit

    return SingleQubit(i)


def _set(S):
    from .strategy import QubitSet

    return QubitSet(S)


def initial_strategy(instance: HamiltonianInstance, seed, aux: int = 0) -> ProverStrategy:
    """Haar-random state and unitaries; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    layout = RegisterLayout(instance.n, code5.R, aux)
    dim = 2**layout.block_size
    psi = random_state_vector(layout.total_qubits, rng)
    singles = {(t, i): haar_unitary(dim, rng) for t in range(layout.r) for i in range(layout.n)}
    rule = HaarRule(dim, int(rng.integers(2**31)))
    return ProverStrategy(layout, PureState(layout.total_qubits, psi), singles, rule, instance.k)


def optimize(instance: HamiltonianInstance, initial: ProverStrategy, config: OptimizerConfig) -> OptimizerTrace:
    prob = _Problem(instance, initial)
    history = [prob.objective()]
    if not np.isfinite(history[0]):
        raise FloatingPointError("non-finite objective")
    converged = False
    rng = np.random.default_rng([config.seed, 7])
    for _ in range(config.max_sweeps):
        prob.state_step()
        for key in list(prob.unitaries):
            prob.unitary_step(key, config, rng)
        val = prob.objective()
        if val - history[-1] < config.align_below:
            val = prob.align_step(val)
        if not np.isfinite(val):
            raise FloatingPointError("non-finite objective")
        history.append(val)
        if history[-1] - history[-2] < config.tolerance:
            converged = True
            break
    return OptimizerTrace(history, prob.to_strategy(instance.k), converged)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LHMIP_THREADS", "1")))
    except ValueError:
        return 1


def _run_restart(instance, config, child, index):
    start = initial_strategy(instance, child, config.aux_qubits)
    trace = optimize(instance, start, config)
    trace.restart = index
    return trace


def restart_sweep(instance: HamiltonianInstance, config: OptimizerConfig, num_restarts: int) -> OptimizerTrace:
    """Best of ``num_restarts`` optimizations from seeded random starts.

    Restart ``j`` always starts from child ``j`` of ``SeedSequence(config.seed)``, so
    a larger restart count only adds candidates. Ties go to the lowest index.
    """
    if num_restarts < 1:
        raise ValueError("need at least one restart")
    children = np.random.SeedSequence(config.seed).spawn(num_restarts)
    jobs = _threads()
    if jobs > 1:
        from joblib import Parallel, delayed

        traces = Parallel(n_jobs=jobs)(
            delayed(_run_restart)(instance, config, c, j) for j, c in enumerate(children)
        )
    else:
        traces = [_run_restart(instance, config, c, j) for j, c in enumerate(children)]
    best = max(traces, key=lambda tr: (tr.final, -tr.restart))
    best.seed = config.seed
    best.restarts_best = [tr.final for tr in traces]
    return best


def verify_trace(instance: HamiltonianInstance, trace: OptimizerTrace) -> float:
    """Recompute the final acceptance through the protocol module."""
    return accept_probability_exact(instance, trace.strategy).p_overall
