"""Transfer matrices and circle monodromies of the kernel ODEs.

First-order flows come from the two Weyl operators: solutions of
D^dagger f = 0 satisfy f' = M(s) f with M = weyl_coefficient(..., 'ddag'),
and likewise for D.  First-order solutions are continuous across marked
points, so the circle monodromy is a plain product of interval transfers.

Second-order flows belong to the two laplacians built from the data:

* operator_tag='finv'  : k-dimensional,
      f'' = [i T_0' + (T_0+t_0)^2 + sum_j (T_j+t_j)^2] f + 2i (T_0+t_0) f'
* operator_tag='ddagd' : 2k-dimensional, the same coefficients lifted by
      kron(id2, .), spin-diagonal in the interval interiors.

Both are integrated as companion systems on the state (f, f'); at a
marked point the state jumps by [[id, 0], [J, id]] (the value stays
continuous, the derivative picks up J times the value):

* finv  : J = i Delta T_0 + (1/2) spin_trace(Q Q^dagger)
* ddagd : J = kron(id2, i Delta T_0) - sum_j kron(E[j], (Q Q^dagger)_j)

A full loop based at s0 multiplies the interval transfers in order and
applies the jump of every marked point crossed, i.e. those in
(s0, s0 + 2*pi]; a base point sitting on a marked point gets its own
jump applied once, at the end of the loop.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev

from . import nahm
from .errors import IntegrationError
from .nahm import TWO_PI, eval_T, eval_T_deriv, locate, marked_index, q_spin_parts
from .spin import E, kron_spin, pauli

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b - bhat: weights of the embedded 4th-order error estimate
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])

_MIN_STEP_FACTOR = 1e-14
_MAX_STEPS = 1_000_000


def transfer(coeff, s0, s1, tol=1e-10):
    """Transfer matrix of Y' = coeff(s) Y from s0 to s1 (Y(s0) = id).

    coeff maps s to a square complex matrix.  Adaptive Dormand-Prince 5(4)
    with mixed absolute/relative per-step error control at tol.
    """
    span = s1 - s0
    C0 = np.asarray(coeff(s0), dtype=complex)
    m = C0.shape[0]
    Y = np.eye(m, dtype=complex)
    if span == 0.0:
        return Y
    direction = 1.0 if span > 0 else -1.0
    scale = np.max(np.abs(C0)) + 1e-30
    h = direction * min(abs(span), max(0.1 / scale, 1e-6 * abs(span)))
    s = s0
    K1 = C0.copy()  # f(s0, id)
    steps = 0
    while (s1 - s) * direction > 0:
        if abs(h) < _MIN_STEP_FACTOR * max(1.0, abs(s)):
            raise IntegrationError(
                f"step size underflow at s = {s:.6g}", location=s)
        steps += 1
        if steps > _MAX_STEPS:
            raise IntegrationError(
                f"step limit exceeded near s = {s:.6g}", location=s)
        if (s + h - s1) * direction > 0:
            h = s1 - s
        K = [K1]
        for i in range(1, 7):
            Zi = Y + h * sum(a * Kj for a, Kj in zip(_DP_A[i], K))
            K.append(np.asarray(coeff(s + _DP_C[i] * h), dtype=complex) @ Zi)
        Ynew = Y + h * sum(b * Kj for b, Kj in zip(_DP_B, K) if b != 0.0)
        err = h * sum(e * Kj for e, Kj in zip(_DP_E, K) if e != 0.0)
        sc = tol + tol * max(np.max(np.abs(Y)), np.max(np.abs(Ynew)))
        enorm = np.max(np.abs(err)) / sc
        if enorm <= 1.0:
            s = s + h
            Y = Ynew
            K1 = K[6]  # FSAL: stage 7 was evaluated at (s+h, Ynew)
            grow = 5.0 if enorm == 0.0 else min(5.0, 0.9 * enorm ** -0.2)
            h *= grow
        else:
            h *= max(0.2, 0.9 * enorm ** -0.2)
            K1 = K[0]
    return Y


@dataclass(frozen=True)
class Monodromy:
    """Full-circle transfer matrix with its base point and provenance."""
    matrix: np.ndarray
    base_point: float
    operator_tag: str
    t: tuple


def second_order_coefficient(data, t, s, operator_tag="finv", side="right"):
    """Companion matrix [[0, id], [C(s), B(s)]] of the interval ODE.

    C = i T_0' + (T_0+t_0)^2 + sum_j (T_j+t_j)^2 and B = 2i (T_0+t_0),
    lifted by kron(id2, .) for operator_tag='ddagd'.
    """
    _check_tag(operator_tag)
    t = np.asarray(t, dtype=float)
    idk = np.eye(data.k)
    T = [eval_T(data, mu, s, side) for mu in range(4)]
    A0 = T[0] + t[0] * idk
    C = 1j * eval_T_deriv(data, 0, s, side) + A0 @ A0
    for j in (1, 2, 3):
        Tj = T[j] + t[j] * idk
        C = C + Tj @ Tj
    B = 2j * A0
    if operator_tag == "ddagd":
        C = kron_spin(np.eye(2), C)
        B = kron_spin(np.eye(2), B)
    return _companion(C, B)


def _companion(C, B):
    m = C.shape[0]
    M = np.zeros((2 * m, 2 * m), dtype=complex)
    M[:m, m:] = np.eye(m)
    M[m:, :m] = C
    M[m:, m:] = B
    return M


def _check_tag(operator_tag):
    if operator_tag not in ("finv", "ddagd"):
        raise ValueError(
            f"operator_tag must be 'finv' or 'ddagd', got {operator_tag!r}")


def second_order_jump(data, t, alpha, operator_tag="finv"):
    """Marked-point jump map [[id, 0], [J, id]] on the companion state.

    J is t-independent: crossing lambda_alpha, the derivative of a kernel
    element jumps by J times its (continuous) value.
    """
    _check_tag(operator_tag)
    dT0 = nahm.jump_T(data, alpha, 0)
    parts = q_spin_parts(data, alpha)
    if operator_tag == "finv":
        J = 1j * dT0 + parts[0]  # (1/2) spin_trace(QQ^dag) = parts[0]
    else:
        J = kron_spin(np.eye(2), 1j * dT0)
        for j in (1, 2, 3):
            J = J - kron_spin(E[j], parts[j])
    m = J.shape[0]
    out = np.eye(2 * m, dtype=complex)
    out[m:, :m] = J
    return out


def _interval_frame(data, a, b):
    """Interval index and its bounds shifted into the frame of segment (a, b)."""
    mid = 0.5 * (a + b)
    i, su = locate(data, mid)
    ai, bi = data.interval_bounds(i)
    shift = TWO_PI * round((mid - su) / TWO_PI)
    return i, ai + shift, bi + shift


def _first_order_coeff(data, t, i, A, B, which):
    """Flow matrix closure on interval i with loop-frame bounds (A, B)."""
    cs = data.intervals[i].coeffs
    t = np.asarray(t, dtype=float)
    idk = np.eye(data.k)
    sign = -1.0 if which == "ddag" else 1.0
    if which not in ("ddag", "d"):
        raise ValueError(f"which must be 'ddag' or 'd', got {which!r}")

    def coeff(s):
        u = min(1.0, max(-1.0, (2.0 * s - A - B) / (B - A)))
        M = kron_spin(np.eye(2), 1j * (chebyshev.chebval(u, cs[0]) + t[0] * idk))
        for j in (1, 2, 3):
            M = M + sign * kron_spin(pauli(j), chebyshev.chebval(u, cs[j]) + t[j] * idk)
        return M

    return coeff


def _second_order_coeff(data, t, i, A, B, operator_tag):
    """Companion-matrix closure on interval i with loop-frame bounds (A, B)."""
    cs = data.intervals[i].coeffs
    dc0 = chebyshev.chebder(cs[0], m=1, axis=0)
    dscale = 2.0 / (B - A)
    t = np.asarray(t, dtype=float)
    idk = np.eye(data.k)
    zero = np.zeros((data.k, data.k), dtype=complex)
    lifted = operator_tag == "ddagd"

    def coeff(s):
        u = min(1.0, max(-1.0, (2.0 * s - A - B) / (B - A)))
        A0 = chebyshev.chebval(u, cs[0]) + t[0] * idk
        dT0 = chebyshev.chebval(u, dc0) * dscale if dc0.shape[0] else zero
        C = 1j * dT0 + A0 @ A0
        for j in (1, 2, 3):
            Tj = chebyshev.chebval(u, cs[j]) + t[j] * idk
            C = C + Tj @ Tj
        B2 = 2j * A0
        if lifted:
            C = kron_spin(np.eye(2), C)
            B2 = kron_spin(np.eye(2), B2)
        return _companion(C, B2)

    return coeff


def interval_transfers_first_order(data, t, which="ddag", tol=1e-10):
    """Transfer matrices over each closed interval [lambda_i, lambda_{i+1}]."""
    out = []
    for i in range(data.n):
        a, b = data.interval_bounds(i)
        out.append(transfer(_first_order_coeff(data, t, i, a, b, which), a, b, tol))
    return out


def interval_transfers_second_order(data, t, operator_tag="finv", tol=1e-10):
    """Companion-system transfers over each closed interval."""
    _check_tag(operator_tag)
    out = []
    for i in range(data.n):
        a, b = data.interval_bounds(i)
        out.append(transfer(_second_order_coeff(data, t, i, a, b, operator_tag),
                            a, b, tol))
    return out


def _loop_segments(data, s0):
    """Segments and crossed marked points of the loop s0 -> s0 + 2*pi.

    Returns (points, crossed): points is the increasing sequence
    s0 = p_0 < ... < p_m = s0 + 2*pi, and crossed[i] is the marked-point
    index jumped at p_{i+1} (None for the final partial segment).
    """
    alpha0 = marked_index(data, s0)
    if alpha0 is not None:
        base = float(data.lambdas[alpha0])
        points = [base]
        crossed = []
        for i in range(data.n):
            idx = (alpha0 + 1 + i) % data.n
            lam = float(data.lambdas[idx])
            while lam <= points[-1]:
                lam += TWO_PI
            points.append(lam)
            crossed.append(idx)
        return points, crossed
    i0, su = locate(data, s0)
    points = [su]
    crossed = []
    for i in range(data.n):
        idx = (i0 + 1 + i) % data.n
        lam = float(data.lambdas[idx])
        while lam <= points[-1]:
            lam += TWO_PI
        points.append(lam)
        crossed.append(idx)
    points.append(su + TWO_PI)
    crossed.append(None)
    return points, crossed


def circle_monodromy_first_order(data, t, s0=None, which="ddag", tol=1e-10):
    """Monodromy of the first-order flow around the full circle from s0."""
    if s0 is None:
        s0 = float(data.lambdas[0])
    points, _ = _loop_segments(data, s0)
    M = np.eye(2 * data.k, dtype=complex)
    for a, b in zip(points[:-1], points[1:]):
        i, A, B = _interval_frame(data, a, b)
        M = transfer(_first_order_coeff(data, t, i, A, B, which), a, b, tol) @ M
    return Monodromy(matrix=M, base_point=float(s0), operator_tag=which,
                     t=tuple(float(x) for x in np.asarray(t, dtype=float)))


def circle_monodromy_second_order(data, t, s0=None, operator_tag="finv",
                                  tol=1e-10):
    """Companion-system monodromy around the full circle from s0, with the
    marked-point jump maps composed in."""
    _check_tag(operator_tag)
    if s0 is None:
        s0 = float(data.lambdas[0])
    points, crossed = _loop_segments(data, s0)
    m = data.k if operator_tag == "finv" else 2 * data.k
    M = np.eye(2 * m, dtype=complex)
    for (a, b), idx in zip(zip(points[:-1], points[1:]), crossed):
        i, A, B = _interval_frame(data, a, b)
        M = transfer(_second_order_coeff(data, t, i, A, B, operator_tag),
                     a, b, tol) @ M
        if idx is not None:
            M = second_order_jump(data, t, idx, operator_tag) @ M
    return Monodromy(matrix=M, base_point=float(s0), operator_tag=operator_tag,
                     t=tuple(float(x) for x in np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class RegularityReport:
    gap_ddag: float
    gap_d: float
    is_regular: bool
    threshold: float


def regularity(data, t, tol=1e-10, threshold=1e-6):
    """Distance of the first-order monodromy spectra from 1.

    The Green's functions exist iff neither first-order monodromy has a
    unit eigenvalue; is_regular requires both gaps to exceed threshold.
    """
    gaps = {}
    for which in ("ddag", "d"):
        mon = circle_monodromy_first_order(data, t, which=which, tol=tol)
        eig = np.linalg.eigvals(mon.matrix)
        gaps[which] = float(np.min(np.abs(eig - 1.0)))
    return RegularityReport(gap_ddag=gaps["ddag"], gap_d=gaps["d"],
                            is_regular=min(gaps.values()) > threshold,
                            threshold=threshold)
