import numpy as np
import pytest

from wdmd_sysid.domain.errors import NyquistViolation, ShapeMismatch, SingularResolvent
from wdmd_sysid.domain.lti import (
    discretize_zoh,
    extract_modes,
    frf_continuous,
    frf_discrete,
    simulate,
    spectral_radius,
)
from wdmd_sysid.domain.models import ContinuousStateSpace, DiscreteStateSpace


@pytest.fixture
def first_order():
    return DiscreteStateSpace(A=[[0.5]], B=[[1.0]], C=[[1.0]], D=[[0.0]], dt=0.1)


@pytest.fixture
def oscillator():
    # 10 rad/s, 10% damping
    return ContinuousStateSpace(
        A=[[0.0, 1.0], [-100.0, -2.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]], D=[[0.0]]
    )


def rotation(theta: float, rho: float = 1.0, dt: float = 0.01) -> DiscreteStateSpace:
    c, s = np.cos(theta), np.sin(theta)
    return DiscreteStateSpace(
        A=rho * np.array([[c, -s], [s, c]]),
        B=np.zeros((2, 1)),
        C=np.eye(2),
        D=np.zeros((2, 1)),
        dt=dt,
    )


def test_impulse_response(first_order):
    run = simulate(first_order, np.array([[1.0, 0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(run.outputs, [[0.0, 1.0, 0.5, 0.25]])
    assert run.terminal_state == pytest.approx([0.125])


def test_zero_input_from_rest_stays_at_rest(stable_system):
    run = simulate(stable_system, np.zeros((1, 50)))
    assert not np.any(run.outputs)
    assert not np.any(run.states)


def test_chained_simulation_equals_one_run(stable_system):
    U = np.random.default_rng(4).standard_normal((1, 120))
    whole = simulate(stable_system, U)
    first = simulate(stable_system, U[:, :70])
    second = simulate(stable_system, U[:, 70:], first.terminal_state)
    np.testing.assert_allclose(
        np.hstack([first.outputs, second.outputs]), whole.outputs, atol=1e-12
    )


def test_simulate_rejects_wrong_input_count(first_order):
    with pytest.raises(ShapeMismatch):
        simulate(first_order, np.zeros((2, 5)))
    with pytest.raises(ShapeMismatch):
        simulate(first_order, np.zeros((1, 5)), z0=np.zeros(3))


def test_discrete_frf_of_first_order(first_order):
    omegas = np.array([0.0, 1.0, 10.0])
    H = frf_discrete(first_order, omegas)
    expected = 1.0 / (np.exp(1j * omegas * 0.1) - 0.5)
    assert H.shape == (3, 1, 1)
    np.testing.assert_allclose(H[:, 0, 0], expected)


def test_frf_at_an_eigenvalue_is_singular():
    sys = DiscreteStateSpace(A=[[1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]], dt=1.0)
    with pytest.raises(SingularResolvent):
        frf_discrete(sys, [0.0])


def test_frf_above_nyquist(first_order):
    with pytest.raises(NyquistViolation):
        frf_discrete(first_order, [40.0])


def test_zoh_of_scalar_system():
    sys = ContinuousStateSpace(A=[[-2.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
    sysd = discretize_zoh(sys, 0.1)
    assert sysd.A[0, 0] == pytest.approx(np.exp(-0.2))
    assert sysd.B[0, 0] == pytest.approx((1 - np.exp(-0.2)) / 2)
    assert sysd.dt == 0.1


def test_zoh_maps_poles_through_the_exponential(oscillator):
    sysd = discretize_zoh(oscillator, 1e-3)
    continuous = np.sort_complex(np.linalg.eigvals(oscillator.A))
    discrete = np.sort_complex(np.linalg.eigvals(sysd.A))
    np.testing.assert_allclose(discrete, np.sort_complex(np.exp(continuous * 1e-3)))


def test_zoh_frf_tracks_the_continuous_frf(oscillator):
    sysd = discretize_zoh(oscillator, 1e-3)
    omegas = np.logspace(-2, 1.7, 60)
    H = frf_continuous(oscillator, omegas)
    Hd = frf_discrete(sysd, omegas)
    np.testing.assert_allclose(np.abs(Hd), np.abs(H), rtol=1e-3)
    low = omegas <= 0.1
    np.testing.assert_allclose(Hd[low], H[low], rtol=1e-4)


def test_undamped_rotation_modes():
    modes = extract_modes(rotation(0.3))
    assert len(modes) == 1
    assert modes.frequencies[0] == pytest.approx(0.3 / (2 * np.pi * 0.01))
    assert modes.damping[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(np.linalg.norm(modes.shapes, axis=0), 1.0)


def test_damped_rotation_modes():
    modes = extract_modes(rotation(0.3, rho=0.9))
    mu = (np.log(0.9) + 0.3j) / 0.01
    assert modes.frequencies[0] == pytest.approx(abs(mu) / (2 * np.pi))
    assert modes.damped_frequencies[0] == pytest.approx(0.3 / (2 * np.pi * 0.01))
    assert modes.damping[0] == pytest.approx(-mu.real / abs(mu))


def test_real_eigenvalues_have_no_damped_frequency():
    sys = DiscreteStateSpace(
        A=np.diag([0.5, 0.8]),
        B=np.zeros((2, 1)),
        C=np.eye(2),
        D=np.zeros((2, 1)),
        dt=1.0,
    )
    modes = extract_modes(sys)
    assert len(modes) == 2
    np.testing.assert_allclose(modes.damped_frequencies, 0.0)
    np.testing.assert_allclose(modes.damping, 1.0)
    # sorted by natural frequency: |log 0.8| < |log 0.5|
    np.testing.assert_allclose(modes.eigenvalues.real, [0.8, 0.5])


def test_zero_eigenvalues_are_dropped():
    sys = DiscreteStateSpace(
        A=np.diag([0.0, 0.5]),
        B=np.zeros((2, 1)),
        C=np.eye(2),
        D=np.zeros((2, 1)),
        dt=1.0,
    )
    modes = extract_modes(sys)
    assert len(modes) == 1
    assert modes.eigenvalues[0] == pytest.approx(0.5)


def test_simulation_is_linear(stable_system):
    rng = np.random.default_rng(9)
    U1, U2 = rng.standard_normal((1, 60)), rng.standard_normal((1, 60))
    z1, z2 = rng.standard_normal(4), rng.standard_normal(4)
    combined = simulate(stable_system, 2.0 * U1 - U2, 2.0 * z1 - z2).outputs
    separate = (
        2.0 * simulate(stable_system, U1, z1).outputs
        - simulate(stable_system, U2, z2).outputs
    )
    np.testing.assert_allclose(combined, separate, atol=1e-12)


def test_frf_matches_the_steady_state_sine_response(first_order):
    omega = 7.0
    k = np.arange(300)
    run = simulate(first_order, np.sin(omega * first_order.dt * k)[None, :])
    H = frf_discrete(first_order, [omega])[0, 0, 0]
    steady = np.abs(H) * np.sin(omega * first_order.dt * k + np.angle(H))
    np.testing.assert_allclose(run.outputs[0, 200:], steady[200:], rtol=1e-3, atol=1e-9)


def test_modes_are_invariant_under_a_change_of_basis():
    blocks = [rotation(0.3, rho=0.95).A, rotation(0.8, rho=0.9).A]
    sys = DiscreteStateSpace(
        A=np.block([[blocks[0], np.zeros((2, 2))], [np.zeros((2, 2)), blocks[1]]]),
        B=np.ones((4, 1)),
        C=np.eye(4)[:2],
        D=np.zeros((2, 1)),
        dt=0.01,
    )
    T = np.random.default_rng(10).standard_normal((4, 4)) + 4 * np.eye(4)
    T_inv = np.linalg.inv(T)
    transformed = DiscreteStateSpace(
        A=T @ sys.A @ T_inv,
        B=T @ sys.B,
        C=sys.C @ T_inv,
        D=sys.D,
        dt=sys.dt,
    )
    original, moved = extract_modes(sys), extract_modes(transformed)
    np.testing.assert_allclose(moved.frequencies, original.frequencies, rtol=1e-10)
    np.testing.assert_allclose(moved.damping, original.damping, atol=1e-10)


def test_spectral_radius():
    assert spectral_radius(rotation(0.3, rho=0.8)) == pytest.approx(0.8)
    assert spectral_radius(rotation(0.3, rho=1.05)) > 1.0
