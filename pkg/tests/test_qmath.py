import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhmip.qmath import (
    SWAP,
    X,
    DimensionError,
    MixedState,
    PureState,
    QubitOperator,
    apply,
    fidelity,
    haar_unitary,
    kron,
    partial_trace,
    permute_qubits,
    random_density,
    random_state_vector,
    tensor,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def full_operator(mat, targets, n):
    """Brute-force oracle: build the 2^n matrix by explicit Kronecker products and a permutation."""
    a = len(targets)
    rest = [q for q in range(n) if q not in targets]
    big = kron(mat, np.eye(2 ** len(rest)))
    # big acts on qubit order targets + rest; conjugate by the permutation into natural order
    order = list(targets) + rest
    dim = 2**n
    perm = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        new = 0
        for q in order:
            new = (new << 1) | bits[q]
        perm[new, idx] = 1
    return perm.T @ big @ perm


def naive_partial_trace(rho, keep, n):
    keep = sorted(keep)
    rest = [q for q in range(n) if q not in keep]
    dk = 2 ** len(keep)
    out = np.zeros((dk, dk), dtype=complex)
    for a in range(dk):
        for b in range(dk):
            for e in range(2 ** len(rest)):
                def index(kbits, ebits):
                    bits = [0] * n
                    for pos, q in enumerate(keep):
                        bits[q] = (kbits >> (len(keep) - 1 - pos)) & 1
                    for pos, q in enumerate(rest):
                        bits[q] = (ebits >> (len(rest) - 1 - pos)) & 1
                    return int("".join(map(str, bits)), 2)

                out[a, b] += rho[index(a, e), index(b, e)]
    return out


def test_x_flips_zero():
    out = apply(QubitOperator(X, [0], unitary=True), PureState.from_bits("0"))
    assert np.allclose(out.amplitudes, [0, 1])


def test_swap_01():
    out = apply(QubitOperator(SWAP, [0, 1], unitary=True), PureState.from_bits("01"))
    assert np.allclose(out.amplitudes, PureState.from_bits("10").amplitudes)


def test_projector_application_matches_full_matrix():
    rng = np.random.default_rng(3)
    psi = PureState(3, random_state_vector(3, rng))
    v = random_state_vector(2, rng)
    proj = np.outer(v, v.conj())
    out = apply(QubitOperator(proj, [2, 0]), psi)
    big = full_operator(proj, [2, 0], 3)
    assert np.allclose(out.amplitudes, big @ psi.amplitudes, atol=1e-12)
    assert out.norm**2 == pytest.approx(np.vdot(psi.amplitudes, big @ psi.amplitudes).real, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.permutations([0, 1, 2, 3]))
def test_apply_matches_oracle_and_relabelling(seed, order):
    rng = np.random.default_rng(seed)
    vec = random_state_vector(4, rng)
    u = haar_unitary(4, rng)
    targets = order[:2]
    out = apply(QubitOperator(u, targets, unitary=True), PureState(4, vec))
    assert np.allclose(out.amplitudes, full_operator(u, targets, 4) @ vec, atol=1e-12)
    # permute labels: qubit q of the new state is old qubit perm[q]
    perm = list(order)
    inv = [perm.index(q) for q in range(4)]
    moved = PureState(4, permute_qubits(vec, perm, 4))
    moved_out = apply(QubitOperator(u, [inv[t] for t in targets], unitary=True), moved)
    assert np.allclose(moved_out.amplitudes, permute_qubits(out.amplitudes, perm, 4), atol=1e-12)
    assert out.norm == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_swap_is_self_inverse(seed):
    rng = np.random.default_rng(seed)
    psi = PureState(3, random_state_vector(3, rng))
    op = QubitOperator(SWAP, [2, 0], unitary=True)
    assert np.allclose(apply(op, apply(op, psi)).amplitudes, psi.amplitudes, atol=1e-12)


def test_apply_to_mixed_state():
    rng = np.random.default_rng(0)
    rho = MixedState(3, random_density(3, rng))
    u = haar_unitary(4, rng)
    out = apply(QubitOperator(u, [1, 2], unitary=True), rho)
    big = full_operator(u, [1, 2], 3)
    assert np.allclose(out.matrix, big @ rho.matrix @ big.conj().T, atol=1e-12)


@pytest.mark.parametrize(
    "matrix, targets, exc",
    [
        (np.eye(4), [0], DimensionError),
        (np.eye(2), [5], IndexError),
        (np.eye(4), [1, 1], ValueError),
    ],
)
def test_apply_errors(matrix, targets, exc):
    with pytest.raises(exc):
        apply(QubitOperator(matrix, targets), PureState.from_bits("000"))


def test_partial_trace_product_state():
    out = partial_trace(PureState.from_bits("00").density(), [0])
    assert np.allclose(out.matrix, [[1, 0], [0, 0]])


def test_partial_trace_epr_marginal():
    epr = PureState(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.allclose(partial_trace(epr, [0]).matrix, np.eye(2) / 2)
    assert np.allclose(partial_trace(epr.density(), [1]).matrix, np.eye(2) / 2)


def test_partial_trace_matches_naive_summation():
    rho = random_density(4, np.random.default_rng(11))
    out = partial_trace(MixedState(4, rho), [3, 1])
    assert np.allclose(out.matrix, naive_partial_trace(rho, [1, 3], 4), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sets(st.integers(0, 3)))
def test_partial_trace_preserves_trace(seed, keep):
    rho = MixedState(4, random_density(4, np.random.default_rng(seed)))
    if not keep:
        keep = {0}
    assert partial_trace(rho, keep).trace == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(partial_trace(rho, range(4)).matrix, rho.matrix)


def test_tensor():
    out = tensor(PureState.from_bits("0"), PureState.from_bits("1"))
    assert np.allclose(out.amplitudes, PureState.from_bits("01").amplitudes)
    mixed = tensor(MixedState(1, np.eye(2) / 2), MixedState(1, np.eye(2) / 2))
    assert np.allclose(mixed.matrix, np.eye(4) / 4)


def test_tensor_norms_multiply():
    rng = np.random.default_rng(5)
    a = PureState(2, 0.6 * random_state_vector(2, rng), subnormalized=True)
    b = PureState(1, 0.5 * random_state_vector(1, rng), subnormalized=True)
    assert tensor(a, b).norm == pytest.approx(a.norm * b.norm, abs=1e-12)


def test_fidelity_values():
    zero = PureState.from_bits("0").density()
    one = PureState.from_bits("1").density()
    mixed = MixedState(1, np.eye(2) / 2)
    rho = MixedState(2, random_density(2, np.random.default_rng(2)))
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)
    assert fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
    # closed form <0| Id/2 |0>
    assert fidelity(zero, mixed) == pytest.approx(0.5, abs=1e-12)
    assert fidelity(mixed, zero) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DimensionError):
        fidelity(zero, rho)


def test_state_validation():
    with pytest.raises(ValueError):
        PureState(1, [1, 1])
    with pytest.raises(ValueError):
        MixedState(1, [[1, 0.2], [0, 0]])
    with pytest.raises(ValueError):
        MixedState(1, [[1.5, 0], [0, -0.5]])
    MixedState(1, [[0.3, 0], [0, 0.2]], subnormalized=True)
    with pytest.raises(ValueError):
        QubitOperator(np.array([[1, 1], [0, 1]]), [0], unitary=True)

