"""Nahm data on the circle: types, JSON loading, evaluation, residuals.

The circle has circumference 2*pi.  A dataset consists of

* marked points ``lambdas`` (strictly increasing, in [0, 2*pi)),
* on each open interval between consecutive marked points (the last one
  wraps around), four k x k hermitian matrix functions T_0..T_3 given by
  Chebyshev coefficients in the affine coordinate of that interval,
* at each marked point, a boundary matrix Q of shape (2k, w) whose
  columns live in C^2 (x) C^k (spin factor outermost).

JSON schema (all complex numbers are [re, im] pairs)::

    {
      "k": int,
      "lambdas": [float, ...],
      "intervals": [
        {"degree": int,
         "T": {"0": [[[re,im], ...], ...],   # [p][row][col], p = 0..degree
               "1": ..., "2": ..., "3": ...}},
        ...
      ],
      "Q": [ [[ [re,im], ... ], ...], ... ],  # per marked point, 2k rows x w cols
      "description": str
    }

Interval i runs from lambdas[i] to lambdas[i+1] (the last from
lambdas[n-1] to lambdas[0] + 2*pi); its Chebyshev coefficients are in the
variable u = (2*s - a - b)/(b - a) mapping [a, b] -> [-1, 1].
"""

import json
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev

from .errors import ConfigError
from .spin import kron_spin, pauli, spin_decompose

TWO_PI = 2.0 * np.pi

# absolute tolerance for "s sits exactly on a marked point"
_MARKED_ATOL = 1e-12

# allowed anti-hermitian defect in input coefficient matrices
_HERM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class IntervalModel:
    """Chebyshev model of (T_0..T_3) on one interval.

    coeffs has shape (4, degree+1, k, k), complex, hermitian in the last
    two axes for every (mu, p).
    """

    degree: int
    coeffs: np.ndarray


@dataclass(frozen=True, eq=False)
class NahmData:
    k: int
    lambdas: np.ndarray          # (n,) increasing, in [0, 2*pi)
    intervals: tuple             # n IntervalModel, intervals[i] on (lambdas[i], lambdas[i+1])
    Q: tuple                     # n arrays of shape (2k, w_alpha)
    description: str = ""

    @property
    def n(self):
        return len(self.lambdas)

    @property
    def widths(self):
        return tuple(q.shape[1] for q in self.Q)

    @property
    def total_width(self):
        """N = sum of the w_alpha: dimension of the boundary space."""
        return sum(self.widths)

    def interval_bounds(self, i):
        """Endpoints (a, b) of interval i, with b unwrapped (a < b)."""
        a = self.lambdas[i]
        b = self.lambdas[i + 1] if i + 1 < self.n else self.lambdas[0] + TWO_PI
        return a, b


def _as_complex_matrix(entry, rows, cols, where):
    try:
        arr = np.asarray(entry, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric array ({exc})") from None
    if arr.shape != (rows, cols, 2):
        raise ConfigError(
            f"{where}: expected shape {(rows, cols)} of [re,im] pairs, "
            f"got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: non-finite entry")
    return arr[..., 0] + 1j * arr[..., 1]


def _check_hermitian(mat, where):
    defect = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if defect > _HERM_TOL:
        raise ConfigError(f"{where}: not hermitian (defect {defect:.3e})")
    return 0.5 * (mat + mat.conj().T)


def from_dict(cfg):
    """Build NahmData from a schema dict.  Raises ConfigError on any defect."""
    if not isinstance(cfg, dict):
        raise ConfigError("top level: expected an object")
    for key in ("k", "lambdas", "intervals", "Q"):
        if key not in cfg:
            raise ConfigError(f"missing required key '{key}'")
    k = cfg["k"]
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ConfigError(f"k: expected a positive integer, got {k!r}")

    lambdas = np.asarray(cfg["lambdas"], dtype=float)
    if lambdas.ndim != 1 or lambdas.size < 1:
        raise ConfigError("lambdas: expected a non-empty list of reals")
    if not np.all(np.isfinite(lambdas)):
        raise ConfigError("lambdas: non-finite entry")
    if np.any(lambdas < 0.0) or np.any(lambdas >= TWO_PI):
        raise ConfigError("lambdas: entries must lie in [0, 2*pi)")
    if np.any(np.diff(lambdas) <= 0.0):
        raise ConfigError("lambdas: entries must be strictly increasing")
    n = lambdas.size

    raw_intervals = cfg["intervals"]
    if not isinstance(raw_intervals, list) or len(raw_intervals) != n:
        raise ConfigError(f"intervals: expected a list of length {n}")
    intervals = []
    for i, item in enumerate(raw_intervals):
        where = f"intervals[{i}]"
        if not isinstance(item, dict) or "degree" not in item or "T" not in item:
            raise ConfigError(f"{where}: expected an object with 'degree' and 'T'")
        deg = item["degree"]
        if not isinstance(deg, int) or isinstance(deg, bool) or deg < 0:
            raise ConfigError(f"{where}.degree: expected a non-negative integer")
        tdict = item["T"]
        if not isinstance(tdict, dict) or set(tdict) != {"0", "1", "2", "3"}:
            raise ConfigError(f"{where}.T: expected keys '0','1','2','3'")
        coeffs = np.zeros((4, deg + 1, k, k), dtype=complex)
        for mu in range(4):
            arr = tdict[str(mu)]
            if not isinstance(arr, list) or len(arr) != deg + 1:
                raise ConfigError(
                    f"{where}.T['{mu}']: expected {deg + 1} coefficient matrices")
            for p in range(deg + 1):
                mat = _as_complex_matrix(arr[p], k, k, f"{where}.T['{mu}'][{p}]")
                coeffs[mu, p] = _check_hermitian(mat, f"{where}.T['{mu}'][{p}]")
        coeffs.setflags(write=False)
        intervals.append(IntervalModel(degree=deg, coeffs=coeffs))

    raw_q = cfg["Q"]
    if not isinstance(raw_q, list) or len(raw_q) != n:
        raise ConfigError(f"Q: expected a list of length {n}")
    qs = []
    for alpha, entry in enumerate(raw_q):
        where = f"Q[{alpha}]"
        if not isinstance(entry, list) or len(entry) != 2 * k:
            raise ConfigError(f"{where}: expected 2k = {2 * k} rows")
        widths = {len(row) if isinstance(row, list) else -1 for row in entry}
        if len(widths) != 1 or -1 in widths:
            raise ConfigError(f"{where}: rows must be lists of equal length")
        w = widths.pop()
        if w < 1:
            raise ConfigError(f"{where}: width must be at least 1")
        mat = _as_complex_matrix(entry, 2 * k, w, where)
        mat.setflags(write=False)
        qs.append(mat)

    desc = cfg.get("description", "")
    if not isinstance(desc, str):
        raise ConfigError("description: expected a string")

    lambdas.setflags(write=False)
    return NahmData(k=k, lambdas=lambdas, intervals=tuple(intervals),
                    Q=tuple(qs), description=desc)


def load(source):
    """Load NahmData from a JSON file path, a JSON string, or a dict."""
    if isinstance(source, dict):
        return from_dict(source)
    text = None
    s = str(source)
    if s.lstrip().startswith("{"):
        text = s
    else:
        try:
            with open(s, "r") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return from_dict(cfg)


def _complex_to_pairs(mat):
    out = np.empty(mat.shape + (2,), dtype=float)
    out[..., 0] = mat.real
    out[..., 1] = mat.imag
    return out.tolist()


def to_dict(data):
    """Serialize NahmData back to the JSON schema dict."""
    return {
        "k": data.k,
        "lambdas": [float(x) for x in data.lambdas],
        "intervals": [
            {"degree": iv.degree,
             "T": {str(mu): _complex_to_pairs(iv.coeffs[mu]) for mu in range(4)}}
            for iv in data.intervals
        ],
        "Q": [_complex_to_pairs(q) for q in data.Q],
        "description": data.description,
    }


def _circular_gap(s, lam):
    d = abs((s - lam) % TWO_PI)
    return min(d, TWO_PI - d)


def marked_index(data, s):
    """Index alpha if s sits on a marked point (circularly), else None."""
    for alpha, lam in enumerate(data.lambdas):
        if _circular_gap(s, lam) < _MARKED_ATOL:
            return alpha
    return None


def locate(data, s, side="right"):
    """Interval index and unwrapped coordinate for the point s.

    Returns (i, s_unwrapped) with s_unwrapped in [a_i, b_i].  On a marked
    point, side='right' picks the interval starting there and side='left'
    the one ending there.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    lambdas = data.lambdas
    n = data.n
    alpha = marked_index(data, s)
    if alpha is not None:
        if side == "right":
            return alpha, lambdas[alpha]
        i = (alpha - 1) % n
        return i, data.interval_bounds(i)[1]
    sm = s % TWO_PI
    if sm < lambdas[0]:
        return n - 1, sm + TWO_PI
    i = bisect_right(lambdas, sm) - 1
    return i, sm


def eval_T(data, mu, s, side="right"):
    """T_mu(s) as a k x k array.  side resolves marked-point ambiguity."""
    i, su = locate(data, s, side)
    a, b = data.interval_bounds(i)
    u = (2.0 * su - a - b) / (b - a)
    return chebyshev.chebval(u, data.intervals[i].coeffs[mu])


def eval_T_deriv(data, mu, s, side="right"):
    """dT_mu/ds at s (one-sided on marked points)."""
    i, su = locate(data, s, side)
    a, b = data.interval_bounds(i)
    u = (2.0 * su - a - b) / (b - a)
    dc = chebyshev.chebder(data.intervals[i].coeffs[mu], m=1, axis=0)
    if dc.shape[0] == 0:
        return np.zeros((data.k, data.k), dtype=complex)
    return chebyshev.chebval(u, dc) * (2.0 / (b - a))


def jump_T(data, alpha, mu):
    """Discontinuity T_mu(lambda_alpha^+) - T_mu(lambda_alpha^-)."""
    lam = data.lambdas[alpha]
    return eval_T(data, mu, lam, side="right") - eval_T(data, mu, lam, side="left")


def nahm_residual(data, s, t=None):
    """Interior Nahm-equation residual at s, shape (3, k, k).

    R_j = i T_j' + [T_0, T_j] + [T_{j+1}, T_{j+2}] (indices cyclic in 1..3).
    Vanishes identically for valid data.  s must not be a marked point.
    """
    if marked_index(data, s) is not None:
        raise ValueError(
            f"s = {s} is a marked point; use matching_residual there")
    T = [eval_T(data, mu, s) for mu in range(4)]
    dT = [eval_T_deriv(data, j, s) for j in (1, 2, 3)]
    out = np.empty((3, data.k, data.k), dtype=complex)
    for j in (1, 2, 3):
        jp, jpp = 1 + (j % 3), 1 + ((j + 1) % 3)
        out[j - 1] = (1j * dT[j - 1]
                      + T[0] @ T[j] - T[j] @ T[0]
                      + T[jp] @ T[jpp] - T[jpp] @ T[jp])
    return out


def q_spin_parts(data, alpha):
    """Spin components (M_0..M_3) of Q_alpha Q_alpha^dagger, each k x k."""
    q = data.Q[alpha]
    return spin_decompose(q @ q.conj().T)


def matching_residual(data, alpha):
    """Defect of the matching condition at marked point alpha, shape (3, k, k).

    R_j = Delta T_j(lambda_alpha) - i (Q_alpha Q_alpha^dagger)_j.
    Vanishes for valid data.
    """
    if not 0 <= alpha < data.n:
        raise IndexError(f"marked-point index {alpha} out of range (n = {data.n})")
    parts = q_spin_parts(data, alpha)
    out = np.empty((3, data.k, data.k), dtype=complex)
    for j in (1, 2, 3):
        out[j - 1] = jump_T(data, alpha, j) - 1j * parts[j]
    return out


def weyl_coefficient(data, t, s, side="right", which="ddag"):
    """First-order flow matrix M(s) of the kernel ODE f' = M f, (2k x 2k).

    For which='ddag' (operator D^dagger):
        M = kron(id2, i (T_0 + t_0)) - sum_j kron(sigma_j, T_j + t_j)
    For which='d' (operator D) the sign of the sum flips.
    """
    if which not in ("ddag", "d"):
        raise ValueError(f"which must be 'ddag' or 'd', got {which!r}")
    t = np.asarray(t, dtype=float)
    if t.shape != (4,):
        raise ValueError("t must be a 4-vector (t0, t1, t2, t3)")
    idk = np.eye(data.k)
    T = [eval_T(data, mu, s, side) for mu in range(4)]
    M = kron_spin(np.eye(2), 1j * (T[0] + t[0] * idk))
    sign = -1.0 if which == "ddag" else 1.0
    for j in (1, 2, 3):
        M += sign * kron_spin(pauli(j), T[j] + t[j] * idk)
    return M
