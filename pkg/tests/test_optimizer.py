import numpy as np
import pytest

from lhmip import hamiltonian as H
from lhmip import protocol as P
from lhmip import strategy as S
from lhmip.optimizer import (
    OptimizerConfig,
    _Problem,
    initial_strategy,
    optimize,
    restart_sweep,
    verify_trace,
)
from lhmip.qmath import PureState


def unitarity_error(strategy):
    lay = strategy.layout
    worst = 0.0
    qs = [S.SingleQubit(i) for i in range(lay.n)] + [S.QubitSet(s) for s in S.question_sets(lay.n, strategy.k)]
    for t in range(lay.r):
        for q in qs:
            u = strategy.unitary(t, q)
            worst = max(worst, np.abs(u @ u.conj().T - np.eye(len(u))).max())
    return worst


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        OptimizerConfig(tolerance=0)
    with pytest.raises(ValueError):
        OptimizerConfig(step_rule="newton")
    with pytest.raises(ValueError):
        OptimizerConfig(unitarize_every_step=False)


def test_honest_is_fixed_point():
    inst = H.single_qubit_terms(2)
    honest = S.honest(inst, PureState.from_bits("00"))
    tr = optimize(inst, honest, OptimizerConfig(max_sweeps=2))
    assert all(a == pytest.approx(1.0, abs=1e-12) for a in tr.acceptance)


def test_single_projector_reaches_one():
    # H = |1><1| on one qubit: honest on |0> is accepted with certainty
    inst = H.single_qubit_terms(1)
    assert H.ground(inst)[0] == pytest.approx(0.0, abs=1e-12)
    tr = optimize(inst, initial_strategy(inst, 3), OptimizerConfig(seed=3))
    assert tr.final >= 1 - 1e-6


@pytest.mark.parametrize("seed", [0, 1])
def test_trace_invariants(seed):
    inst = H.gen_random(2, 2, 2, seed)
    tr = optimize(inst, initial_strategy(inst, seed), OptimizerConfig(max_sweeps=3, seed=seed))
    assert all(b >= a - 1e-9 for a, b in zip(tr.acceptance, tr.acceptance[1:]))
    assert unitarity_error(tr.strategy) <= 1e-10
    assert verify_trace(inst, tr) == pytest.approx(tr.final, abs=1e-10)


def test_aux_qubits_supported():
    inst = H.single_qubit_terms(1)
    cfg = OptimizerConfig(max_sweeps=2, aux_qubits=1)
    tr = restart_sweep(inst, cfg, 1)
    assert tr.strategy.layout.aux == 1
    assert verify_trace(inst, tr) == pytest.approx(tr.final, abs=1e-10)


def test_matvec_and_objective_agree_with_protocol():
    inst = H.gen_epr_chain(2)
    strat = S.random_strategy(2, 2, 9)
    prob = _Problem(inst, strat)
    exact = P.accept_probability_exact(inst, strat).p_overall
    assert prob.objective() == pytest.approx(exact, abs=1e-12)
    assert np.vdot(prob.psi, prob.matvec(prob.psi)).real == pytest.approx(exact, abs=1e-12)


def test_quadratic_form_predicts_objective_changes():
    from lhmip.qmath import haar_unitary

    inst = H.gen_random(2, 2, 3, 1)
    prob = _Problem(inst, S.random_strategy(2, 2, 2, aux=1))
    rng = np.random.default_rng(0)
    for key in list(prob.unitaries)[::4]:
        tmat = prob.quadratic_form(key)
        w0 = prob.unitaries[key]
        f0 = prob.objective()
        w1 = haar_unitary(len(w0), rng)
        prob.unitaries[key] = w1
        f1 = prob.objective()
        prob.unitaries[key] = w0
        quad = [np.vdot(w.reshape(-1), tmat @ w.reshape(-1)).real for w in (w0, w1)]
        assert f1 - f0 == pytest.approx(quad[1] - quad[0], abs=1e-12)


def test_deterministic_in_seed():
    inst = H.single_qubit_terms(1)
    cfg = OptimizerConfig(max_sweeps=2, seed=4)
    a = restart_sweep(inst, cfg, 2)
    b = restart_sweep(inst, cfg, 2)
    assert a.acceptance == b.acceptance
    assert np.array_equal(a.strategy.shared_state.amplitudes, b.strategy.shared_state.amplitudes)


def test_single_restart_equals_optimize():
    inst = H.single_qubit_terms(1)
    cfg = OptimizerConfig(max_sweeps=3, seed=11)
    swept = restart_sweep(inst, cfg, 1)
    child = np.random.SeedSequence(11).spawn(1)[0]
    direct = optimize(inst, initial_strategy(inst, child), cfg)
    assert swept.acceptance == direct.acceptance
    assert swept.restart == 0


def test_prefix_property():
    inst = H.gen_random(2, 2, 2, 5)
    cfg = OptimizerConfig(max_sweeps=2, seed=2)
    few = restart_sweep(inst, cfg, 2)
    more = restart_sweep(inst, cfg, 4)
    assert more.restarts_best[:2] == few.restarts_best
    assert more.final >= few.final


def test_restart_count_checked():
    with pytest.raises(ValueError):
        restart_sweep(H.single_qubit_terms(1), OptimizerConfig(), 0)


def test_threads_env_gives_same_result(monkeypatch):
    pytest.importorskip("joblib")
    inst = H.single_qubit_terms(1)
    cfg = OptimizerConfig(max_sweeps=2, seed=6)
    serial = restart_sweep(inst, cfg, 2)
    monkeypatch.setenv("LHMIP_THREADS", "2")
    parallel = restart_sweep(inst, cfg, 2)
    assert parallel.restarts_best == serial.restarts_best


@pytest.mark.slow
@pytest.mark.parametrize("inst", [H.gen_epr_chain(2), H.single_qubit_terms(2)], ids=["epr2", "single2"])
def test_satisfiable_two_qubit_instances(inst):
    assert H.ground(inst)[0] == pytest.approx(0.0, abs=1e-10)
    tr = restart_sweep(inst, OptimizerConfig(seed=0), 10)
    assert tr.final >= 1 - 1e-4
