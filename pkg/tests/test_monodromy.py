"""Transfer-matrix integrator and circle monodromies.

The two mollifier tests at the bottom pin down the delta-function
conventions: they integrate a smoothed version of the singular ODE with a
generic solver and check convergence to the jump-composed monodromy.
"""

import numpy as np
import pytest
from scipy.linalg import expm

from caloron import monodromy as mon
from caloron import nahm, oracle, spin
from caloron.errors import IntegrationError

from conftest import zero_mat

TWO_PI = 2.0 * np.pi


# ------------------------------------------------------------ integrator

def test_transfer_constant_coefficient():
    rng = np.random.default_rng(3)
    C = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    got = mon.transfer(lambda s: C, 0.0, 1.7, tol=1e-12)
    assert np.max(np.abs(got - expm(1.7 * C))) < 1e-10


def test_transfer_scalar_oracle():
    # y' = i s y  =>  y(s1)/y(s0) = exp(i (s1^2 - s0^2) / 2)
    got = mon.transfer(lambda s: np.array([[1j * s]]), 0.3, 2.1, tol=1e-12)
    want = np.exp(0.5j * (2.1 ** 2 - 0.3 ** 2))
    assert abs(got[0, 0] - want) < 1e-11


def test_transfer_composition_and_inverse():
    rng = np.random.default_rng(4)
    C = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))

    def coeff(s):
        return C * np.cos(s)

    full = mon.transfer(coeff, 0.0, 2.0, tol=1e-12)
    half = mon.transfer(coeff, 1.0, 2.0, tol=1e-12) @ mon.transfer(
        coeff, 0.0, 1.0, tol=1e-12)
    assert np.max(np.abs(full - half)) < 1e-10
    # backwards integration inverts the forward map
    back = mon.transfer(coeff, 2.0, 0.0, tol=1e-12)
    assert np.max(np.abs(back @ full - np.eye(3))) < 1e-10


def test_transfer_tolerance_scaling():
    C = np.array([[0.0, 1.0], [-4.0, 0.0]], dtype=complex)

    def coeff(s):
        return C * (1.0 + 0.5 * np.sin(3 * s))

    ref = mon.transfer(coeff, 0.0, TWO_PI, tol=1e-13)
    e_loose = np.max(np.abs(mon.transfer(coeff, 0.0, TWO_PI, tol=1e-6) - ref))
    e_tight = np.max(np.abs(mon.transfer(coeff, 0.0, TWO_PI, tol=1e-10) - ref))
    assert e_tight < e_loose
    assert e_tight < 1e-8


def test_transfer_step_limit(monkeypatch):
    monkeypatch.setattr(mon, "_MAX_STEPS", 3)
    with pytest.raises(IntegrationError):
        mon.transfer(lambda s: np.array([[1j * np.cos(s)]]), 0.0, TWO_PI,
                     tol=1e-12)


# ------------------------------------------------- first-order monodromy

def test_free_first_order_monodromy(free_data):
    # constant coefficient: the loop is a matrix exponential
    t = np.array([0.35, 0.2, -0.4, 0.1])
    loop = mon.circle_monodromy_first_order(free_data, t, s0=0.0,
                                            tol=1e-12).matrix
    M = np.kron(np.eye(2), 1j * t[0] * np.eye(1))
    for j in (1, 2, 3):
        M = M - np.kron(spin.pauli(j), t[j] * np.eye(1))
    assert np.max(np.abs(loop - expm(TWO_PI * M))) < 1e-9
    # eigenvalues e^{2 pi (i t0 +/- r)}
    r = np.linalg.norm(t[1:])
    eig = np.sort_complex(np.linalg.eigvals(loop))
    want = np.sort_complex(np.array([
        np.exp(TWO_PI * (1j * t[0] - r)),
        np.exp(TWO_PI * (1j * t[0] + r))]))
    assert np.max(np.abs(eig - want)) < 1e-9


def test_first_order_base_point_conjugation(reference):
    t = np.array([0.25, 0.15, -0.2, 0.3])
    m1 = mon.circle_monodromy_first_order(reference, t, s0=0.3).matrix
    m2 = mon.circle_monodromy_first_order(reference, t, s0=2.9).matrix
    e1 = np.sort_complex(np.linalg.eigvals(m1))
    e2 = np.sort_complex(np.linalg.eigvals(m2))
    assert np.max(np.abs(e1 - e2)) < 1e-8


def test_phase_law_spot():
    rng = np.random.default_rng(11)
    for _ in range(2):
        data = oracle.random_valid_data(rng, k=1, n=2, magnitude=0.25)
        tvec = np.concatenate([[0.0], rng.uniform(-0.3, 0.3, size=3)])
        t0 = 0.7
        base = mon.circle_monodromy_first_order(data, tvec, tol=1e-12).matrix
        shifted = mon.circle_monodromy_first_order(
            data, tvec + np.array([t0, 0, 0, 0]), tol=1e-12).matrix
        defect = np.max(np.abs(shifted - np.exp(TWO_PI * 1j * t0) * base))
        assert defect < 1e-9


# ------------------------------------------------ second-order structure

def test_companion_shapes(reference):
    t = np.zeros(4)
    s = 2.0
    cf = mon.second_order_coefficient(reference, t, s, "finv")
    cd = mon.second_order_coefficient(reference, t, s, "ddagd")
    assert cf.shape == (2, 2)
    assert cd.shape == (4, 4)
    with pytest.raises(ValueError):
        mon.second_order_coefficient(reference, t, s, "bogus")


def test_jump_lift_identity():
    # kron(id2, J_finv) = J_ddagd + Q Q^dag, blockwise on the companion
    rng = np.random.default_rng(5)
    for k, n in ((1, 2), (2, 2)):
        data = oracle.random_valid_data(rng, k=k, n=n)
        t = np.zeros(4)
        for alpha in range(n):
            jf = mon.second_order_jump(data, t, alpha, "finv")[k:, :k]
            jd = mon.second_order_jump(data, t, alpha, "ddagd")[2 * k:, :2 * k]
            q = data.Q[alpha]
            assert np.allclose(np.kron(np.eye(2), jf), jd + q @ q.conj().T,
                               atol=1e-13)


def test_regularity_report(reference, free_data):
    rep = mon.regularity(reference, np.array([0.25, 0.15, -0.2, 0.3]))
    assert rep.is_regular
    assert rep.gap_ddag > 0.1 and rep.gap_d > 0.1
    # the free field at t = 0 is the canonical irregular point
    rep0 = mon.regularity(free_data, np.zeros(4))
    assert not rep0.is_regular
    assert rep0.gap_ddag < 1e-8


# ------------------------------------------------------- mollifier tests

def _logistic(u):
    return 1.0 / (1.0 + np.exp(-np.clip(u, -60.0, 60.0)))


def _step_data():
    """k=1, n=2 dataset: T_3 = -1/4 then +1/4, unit boundary vectors."""
    z = zero_mat(1)
    return nahm.from_dict({
        "k": 1,
        "lambdas": [float(np.pi / 2), float(3 * np.pi / 2)],
        "intervals": [
            {"degree": 0, "T": {"0": [z], "1": [z], "2": [z],
                                "3": [[[[-0.25, 0.0]]]]}},
            {"degree": 0, "T": {"0": [z], "1": [z], "2": [z],
                                "3": [[[[0.25, 0.0]]]]}},
        ],
        "Q": [[[[1.0, 0.0]], [[0.0, 0.0]]],
              [[[0.0, 0.0]], [[1.0, 0.0]]]],
    })


def test_delta_potential_against_gaussian_mollifier():
    """finv jump convention: a narrow Gaussian potential converges to it.

    Dataset with T == 0 and Q Q^dag = c id2: no jump in T, but a
    delta potential of weight c in the scalar second-order operator.
    """
    c = 0.6
    q = float(np.sqrt(c))
    data = nahm.from_dict({
        "k": 1,
        "lambdas": [float(np.pi)],
        "intervals": [{"degree": 0,
                       "T": {str(mu): [zero_mat(1)] for mu in range(4)}}],
        "Q": [[[[q, 0.0], [0.0, 0.0]], [[0.0, 0.0], [q, 0.0]]]],
    })
    assert np.max(np.abs(nahm.matching_residual(data, 0))) < 1e-14
    t = np.array([0.3, 0.2, -0.1, 0.15])
    exact = mon.circle_monodromy_second_order(data, t, s0=0.0,
                                              operator_tag="finv").matrix
    base = t[0] ** 2 + t[1] ** 2 + t[2] ** 2 + t[3] ** 2

    def mollified(width):
        def coeff(s):
            bump = np.exp(-0.5 * ((s - np.pi) / width) ** 2) \
                / (width * np.sqrt(TWO_PI))
            C = base + c * bump
            return np.array([[0.0, 1.0], [C, 2j * t[0]]], dtype=complex)
        return mon.transfer(coeff, 0.0, TWO_PI, tol=1e-11)

    mats = [mollified(w) for w in (0.2, 0.1, 0.05)]
    errs = [np.max(np.abs(m - exact)) for m in mats]
    # first-order convergence in the width ...
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert 1.6 < errs[0] / errs[1] < 2.6
    assert 1.6 < errs[1] / errs[2] < 2.6
    # ... towards this limit and no other: Richardson kills the O(w) term
    rich = 2.0 * mats[2] - mats[1]
    assert np.max(np.abs(rich - exact)) < 0.2 * errs[2]
    # sanity: the jump actually matters (dropping it moves the answer a lot)
    no_jump = mon.transfer(
        lambda s: np.array([[0.0, 1.0], [base, 2j * t[0]]], dtype=complex),
        0.0, TWO_PI, tol=1e-11)
    assert np.max(np.abs(no_jump - exact)) > 10 * errs[2]


def test_matching_sign_against_smooth_step():
    """ddagd jump convention: smooth-step data converges to the jump map.

    The smoothed T_3 makes i T_3' a narrow bump whose integral is the
    matching jump; the full (off-shell) coefficient then converges to the
    on-shell jump composition as the step sharpens.
    """
    data = _step_data()
    for alpha in range(2):
        assert np.max(np.abs(nahm.matching_residual(data, alpha))) < 1e-14
    t = np.array([0.3, 0.2, -0.1, 0.15])
    exact = mon.circle_monodromy_second_order(data, t, s0=0.0,
                                              operator_tag="ddagd").matrix
    E3 = spin.e_unit(3)
    id2 = np.eye(2)

    def mollified(eps):
        def t3(s):
            return 0.25 - 0.5 * (_logistic((s - np.pi / 2) / eps)
                                 - _logistic((s - 3 * np.pi / 2) / eps))

        def dt3(s):
            e1 = _logistic((s - np.pi / 2) / eps)
            e2 = _logistic((s - 3 * np.pi / 2) / eps)
            return -0.5 * (e1 * (1 - e1) - e2 * (1 - e2)) / eps

        def coeff(s):
            C = (t[0] ** 2 + t[1] ** 2 + t[2] ** 2
                 + (t3(s) + t[3]) ** 2) * id2 + 1j * dt3(s) * E3
            M = np.zeros((4, 4), dtype=complex)
            M[:2, 2:] = id2
            M[2:, :2] = C
            M[2:, 2:] = 2j * t[0] * id2
            return M
        return mon.transfer(coeff, 0.0, TWO_PI, tol=1e-11)

    errs = [np.max(np.abs(mollified(e) - exact)) for e in (0.08, 0.04, 0.02)]
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert errs[2] < 5e-3
    # zeroing the boundary vectors (wrong jump maps for this T) lands far
    # away, so the convergence above really tests the jump composition
    cfg = nahm.to_dict(data)
    cfg["Q"] = [[[[0.0, 0.0]], [[0.0, 0.0]]],
                [[[0.0, 0.0]], [[0.0, 0.0]]]]
    nojump = mon.circle_monodromy_second_order(
        nahm.from_dict(cfg), t, s0=0.0, operator_tag="ddagd").matrix
    assert np.max(np.abs(nojump - exact)) > 10 * errs[2]
