import numpy as np
import pytest

from qecsense import fisher as F
from qecsense.exceptions import SizeLimitError
from qecsense.field import MagneticField
from qecsense.oracle import (
    build_decoding_table,
    corrected_states,
    format_table,
    ghz_state,
    oracle_qfim,
    simulate_protocol,
    stabilizer_expectations,
)
from qecsense.protocol import ProbeSpec, outcome_model, pec_state_ancilla_free, syndrome_distribution

F0 = MagneticField(0.3, 0.4)


def test_ghz_preparation():
    z = ghz_state(3)
    assert abs(z[0]) == pytest.approx(2**-0.5) and abs(z[7]) == pytest.approx(2**-0.5)
    x = ghz_state(3, "X")
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-12)
    # |+++> + |---> has support only on even-parity strings
    odd = [i for i in range(8) if bin(i).count("1") % 2]
    np.testing.assert_allclose(x[odd], 0.0, atol=1e-15)


def test_decoding_table_rows():
    assisted = build_decoding_table(5, "Z", ancilla_assisted=True)
    free = build_decoding_table(5, "Z", ancilla_assisted=False)
    assert len(assisted) == len(free) == 16
    assert assisted.correction((-1, 1, 1, 1)) == (1, 2, 3, 4)
    assert free.correction((-1, 1, 1, 1)) == (0,)
    for n in (2, 3, 6):
        assert build_decoding_table(n, "Z", True).correction((1,) * (n - 1)) == ()


def test_paired_corrections_differ_by_logical_flip():
    assisted = build_decoding_table(5, "Z", True)
    free = build_decoding_table(5, "Z", False)
    for s, a in assisted.entries.items():
        b = free.entries[s]
        if a != b:
            assert sorted(set(a) ^ set(b)) == [0, 1, 2, 3, 4]


def test_even_n_tie_break():
    # syndrome of X1X2 on 4 qubits is shared with X3X4; the lower first index wins
    free = build_decoding_table(4, "Z", False)
    assert free.correction((1, -1, 1)) == (0, 1)


def test_table_text_shape():
    lines = format_table(5).splitlines()
    assert len(lines) == 17
    assert lines[0].split() == ["Z1Z2", "Z2Z3", "Z3Z4", "Z4Z5", "Ancilla-free", "Ancilla-assisted"]
    assert len(format_table(3).splitlines()) == 5


def test_size_limit():
    with pytest.raises(SizeLimitError):
        simulate_protocol(ProbeSpec(14), F0, 1.0)
    with pytest.raises(SizeLimitError):
        oracle_qfim("Z", 13, F0, 1.0)


def test_two_qubit_class_probabilities():
    sim = simulate_protocol(ProbeSpec(2), F0, 1.0)
    _, p = syndrome_distribution(ProbeSpec(2), F0, 1.0)
    np.testing.assert_allclose([c.probability for c in sim], p, atol=1e-14)


def test_no_suppressed_component():
    n, f = 3, MagneticField(0.0, 0.5)
    sim = simulate_protocol(ProbeSpec(n), f, 1.0)
    assert sim[0].probability == pytest.approx(1.0)
    expected = np.array([1.0, np.exp(2j * 0.5 * n)]) / np.sqrt(2)
    np.testing.assert_allclose(sim[0].amplitudes, expected, atol=1e-12)


def test_equal_probabilities_within_class():
    for c in simulate_protocol(ProbeSpec(5, ancilla_assisted=False), MagneticField(0.7, 0.2), 1.0):
        np.testing.assert_allclose(c.syndrome_probabilities, c.syndrome_probabilities[0], atol=1e-15)


@pytest.mark.parametrize("probe", [ProbeSpec(4, "Z"), ProbeSpec(3, "X"), ProbeSpec(5, "Z", ancilla_assisted=False),
                                   ProbeSpec(4, "X", ancilla_assisted=False)])
def test_corrected_states_in_codespace(probe):
    for _, state in corrected_states(probe, MagneticField(0.5, -0.8), 1.0):
        np.testing.assert_allclose(stabilizer_expectations(state, probe.total_qubits, probe.basis), 1.0, atol=1e-12)


def test_states_match_phase_and_amplitude_formulas():
    f = MagneticField(0.6, 0.25)
    for n in range(1, 7):
        model = outcome_model(ProbeSpec(n), f, 1.0)
        for c in simulate_protocol(ProbeSpec(n), f, 1.0):
            np.testing.assert_allclose(c.amplitudes, np.array([1, np.exp(1j * model.phi[c.k])]) / np.sqrt(2), atol=1e-10)
    probe = ProbeSpec(5, ancilla_assisted=False)
    for c in simulate_protocol(probe, f, 1.0):
        c0, c1 = pec_state_ancilla_free(probe, f, 1.0, c.k)
        ref = np.array([c0, c1]) / np.hypot(abs(c0), abs(c1))
        ref = ref * np.exp(-1j * np.angle(ref[0]))
        np.testing.assert_allclose(c.amplitudes, ref, atol=1e-10)


def test_naive_ancilla_free_amplitude_is_inconsistent():
    # the naive c1 = u01^(N-k) u11^k + u01^k u11^(N-k) does not match the
    # simulated corrected state; u00^k u01^(N-k) + u01^k u11^(N-k) does
    probe, f, k = ProbeSpec(3, ancilla_assisted=False), MagneticField(0.3, 0.4), 1
    from qecsense.field import single_qubit_unitary

    u = single_qubit_unitary(f, 1.0)
    naive_c1 = u.u01 ** 2 * u.u11 + u.u01 * u.u11**2
    c0, c1 = pec_state_ancilla_free(probe, f, 1.0, k)
    sim = [c for c in simulate_protocol(probe, f, 1.0) if c.k == k][0]
    ratio = sim.amplitudes[1] / sim.amplitudes[0]
    assert ratio == pytest.approx(c1 / c0, abs=1e-12)
    assert abs(ratio - naive_c1 / c0) > 1e-3


def test_oracle_qfim_examples():
    q = oracle_qfim("Z", 1, MagneticField(0.0, 0.5), 1.0)
    assert q[1, 1] == pytest.approx(4.0, abs=1e-5)
    a, b = F.qfim("Z", 4, F0, 1.0), oracle_qfim("Z", 4, F0, 1.0)
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) < 1e-5
    a, b = F.qfim("Z", 4, F0, 1.0, ancilla=True), oracle_qfim("Z", 4, F0, 1.0, ancilla=True)
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) < 1e-5
    x = oracle_qfim("X", 3, MagneticField(0.4, 0.3), 1.0)
    z = oracle_qfim("Z", 3, F0, 1.0)
    np.testing.assert_allclose(x, z[::-1, ::-1], rtol=1e-6)
