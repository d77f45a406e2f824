from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhmip import code5
from lhmip.qmath import PureState, apply_op, partial_trace, pauli_string, random_state_vector, trace_distance


def stabilizer_group():
    """All 16 products of the generators, as matrices (oracle for the codespace)."""
    gens = [pauli_string(g) for g in code5.GENERATORS]
    out = []
    for bits in product([0, 1], repeat=4):
        m = np.eye(32, dtype=complex)
        for b, g in zip(bits, gens):
            if b:
                m = m @ g
        out.append(m)
    return out


def random_logical(rng):
    return PureState(1, random_state_vector(1, rng))


def test_generators_commute_and_square_to_identity():
    gens = [pauli_string(g) for g in code5.GENERATORS]
    for a in gens:
        assert np.allclose(a @ a, np.eye(32))
        for b in gens:
            assert np.allclose(a @ b, b @ a)


def test_check_projector_is_group_average():
    group_avg = sum(stabilizer_group()) / 16
    assert np.allclose(code5.check_projector(), group_avg, atol=1e-12)
    assert np.trace(code5.check_projector()).real == pytest.approx(2.0)


def test_codewords():
    iso = code5.code_spec().encoding_isometry
    assert np.allclose(iso.conj().T @ iso, np.eye(2), atol=1e-12)
    zl, xl = pauli_string(code5.LOGICAL_Z), pauli_string(code5.LOGICAL_X)
    assert np.allclose(zl @ iso[:, 0], iso[:, 0])
    assert np.allclose(zl @ iso[:, 1], -iso[:, 1])
    assert np.allclose(xl @ iso[:, 0], iso[:, 1])
    # |0_L> is proportional to the stabilizer-group sum applied to |00000>
    zero = np.zeros(32)
    zero[0] = 1
    ref = sum(g @ zero for g in stabilizer_group())
    ref /= np.linalg.norm(ref)
    assert abs(np.vdot(ref, iso[:, 0])) == pytest.approx(1.0, abs=1e-12)
    for g in stabilizer_group():
        assert np.allclose(g @ iso, iso, atol=1e-12)


def test_syndromes_of_single_errors_are_distinct_and_nonzero():
    synd = [code5.syndrome_of(p) for p in code5.weight_one_paulis()]
    assert len(synd) == 15
    assert len(set(synd)) == 15
    assert "0000" not in synd


def test_syndrome_of_matches_measurement():
    iso = code5.code_spec().encoding_isometry
    for p in code5.weight_one_paulis():
        err = PureState(5, pauli_string(p) @ iso[:, 0])
        assert code5.syndrome(err) == pytest.approx({code5.syndrome_of(p): 1.0})


@pytest.mark.parametrize("pauli", list(code5.weight_one_paulis()))
def test_single_errors_corrected(pauli):
    rng = np.random.default_rng(abs(hash(pauli)) % 2**32)
    for _ in range(3):
        logical = random_logical(rng)
        phys = PureState(5, pauli_string(pauli) @ code5.encode(logical).amplitudes)
        out = code5.decode(phys)
        assert np.allclose(out.matrix, logical.density().matrix, atol=1e-10)


def test_weight_two_errors_detected():
    iso = code5.code_spec().encoding_isometry
    chk = code5.check_projector()
    paulis = list(code5.weight_two_paulis())
    assert len(paulis) == 90
    for p in paulis:
        assert np.linalg.norm(chk @ pauli_string(p) @ iso) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_encode_decode_roundtrip(seed):
    logical = random_logical(np.random.default_rng(seed))
    out = code5.decode(code5.encode(logical))
    assert np.allclose(out.matrix, logical.density().matrix, atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_single_share_marginal_is_maximally_mixed(seed, share):
    phys = code5.encode(random_logical(np.random.default_rng(seed)))
    marg = partial_trace(phys, [share])
    assert trace_distance(marg.matrix, np.eye(2) / 2) < 1e-10


def test_decoding_unitary_matches_channel():
    rng = np.random.default_rng(4)
    u = code5.decoding_unitary()
    assert np.allclose(u @ u.conj().T, np.eye(32), atol=1e-12)
    vec = random_state_vector(5, rng)
    out = u @ vec
    rho = np.outer(out, out.conj()).reshape(2, 16, 2, 16)
    logical = np.einsum("asbs->ab", rho)
    assert np.allclose(logical, code5.decode(PureState(5, vec)).matrix, atol=1e-12)


def test_decode_groups_two_logical_qubits():
    rng = np.random.default_rng(8)
    vec = random_state_vector(2, rng)
    enc = vec.reshape(2, 2)
    iso = code5.code_spec().encoding_isometry
    phys = np.einsum("pa,qb,ab->pq", iso, iso, enc).reshape(-1)
    # apply a weight-one error on each block
    phys = apply_op(phys, pauli_string("IXIII"), range(5), 10)
    phys = apply_op(phys, pauli_string("IIIIY"), range(5, 10), 10)
    rho = np.outer(phys, phys.conj())
    out = code5.decode_groups(rho, 2)
    assert np.allclose(out, np.outer(vec, vec.conj()), atol=1e-10)


def test_tables():
    tab = code5.tables()
    assert tab["r"] == 5
    assert len(tab["correction_table"]) == 16
    weights = [sum(c != "I" for c in row["correction"]) for row in tab["correction_table"]]
    assert sorted(weights) == [0] + [1] * 15


def test_decode_rejects_wrong_size():
    with pytest.raises(ValueError):
        code5.decode(PureState.from_bits("0000"))
