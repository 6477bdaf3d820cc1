"""Independent cross-checks: closed forms, a dense discretization of the
second-order operator, reference datasets, and the classical (integral)
route to the gauge potential through the normalized zero modes.

Everything here deliberately avoids the monodromy machinery wherever an
independent method exists, so agreement is meaningful.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import connection, greens, monodromy, nahm
from .errors import ConfigError, IntegrationError
from .nahm import TWO_PI, eval_T
from .spin import E, kron_spin

# ---------------------------------------------------------------------------
# closed form for data with T = 0, Q = 0

def free_field_F(r, x, y):
    """Green's function of -d^2/ds^2 + r^2 on the circle, r > 0.

    Closed form cosh(r*(pi - |d|)) / (2 r sinh(pi r)) with d = x - y
    reduced to [-pi, pi]; the diagonal value is coth(pi r)/(2 r).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    d = math.remainder(x - y, TWO_PI)
    return math.cosh(r * (math.pi - abs(d))) / (2.0 * r * math.sinh(math.pi * r))


# ---------------------------------------------------------------------------
# dense grid discretization

def _node_values(data, t, N):
    """Per-node coefficient blocks, averaging one-sided limits on marked nodes.

    Returns (A0, W, idx_marked): A0[i] = T_0(s_i) + t_0 and
    W[i] = sum_j (T_j + t_j)^2, each k x k; idx_marked maps marked-point
    index -> node index (marked points must sit on grid nodes).
    """
    k = data.k
    h = TWO_PI / N
    t = np.asarray(t, dtype=float)
    idx_marked = {}
    for alpha, lam in enumerate(data.lambdas):
        pos = lam / h
        node = int(round(pos))
        if abs(pos - node) * h > 1e-10:
            raise ValueError(
                f"marked point {lam} does not sit on the N = {N} grid")
        idx_marked[alpha] = node % N
    marked_nodes = {v: a for a, v in idx_marked.items()}
    idk = np.eye(k)
    A0 = np.empty((N, k, k), dtype=complex)
    W = np.empty((N, k, k), dtype=complex)
    for i in range(N):
        s = i * h
        sides = ("left", "right") if i in marked_nodes else ("right",)
        a_acc = np.zeros((k, k), dtype=complex)
        w_acc = np.zeros((k, k), dtype=complex)
        for side in sides:
            a_s = eval_T(data, 0, s, side) + t[0] * idk
            a_acc += a_s
            for j in (1, 2, 3):
                Tj = eval_T(data, j, s, side) + t[j] * idk
                w_acc += Tj @ Tj
        A0[i] = a_acc / len(sides)
        W[i] = w_acc / len(sides)
    return A0, W, idx_marked


def dense_second_order(data, t, N, operator_tag="finv"):
    """Dense hermitian discretization of the second-order operator on an
    N-point periodic grid (marked points must be grid nodes).

    Uses the compact 3-point laplacian, the symmetrized first-order part
    i (A Dc + Dc A) with the central difference Dc, multiplication terms
    averaged at marked nodes, and the marked-point potentials as 1/h
    times the jump coefficient on the node.
    """
    monodromy._check_tag(operator_tag)
    k = data.k
    h = TWO_PI / N
    A0, W, idx_marked = _node_values(data, t, N)
    m = k if operator_tag == "finv" else 2 * k
    dim = N * m
    L = np.zeros((dim, dim), dtype=complex)
    id2 = np.eye(2)

    def lift(M):
        return M if operator_tag == "finv" else kron_spin(id2, M)

    eye_m = np.eye(m)
    for i in range(N):
        ip, im_ = (i + 1) % N, (i - 1) % N
        sl = slice(i * m, (i + 1) * m)
        # compact laplacian -d^2/ds^2
        L[sl, sl] += (2.0 / h ** 2) * eye_m
        L[sl, ip * m:(ip + 1) * m] += (-1.0 / h ** 2) * eye_m
        L[sl, im_ * m:(im_ + 1) * m] += (-1.0 / h ** 2) * eye_m
        # i (A Dc + Dc A), Dc the central difference
        Ai = lift(A0[i])
        Aip = lift(A0[ip])
        Aim = lift(A0[im_])
        L[sl, ip * m:(ip + 1) * m] += 1j * (Ai + Aip) / (2.0 * h)
        L[sl, im_ * m:(im_ + 1) * m] += -1j * (Ai + Aim) / (2.0 * h)
        # multiplication terms A^2 + sum (T_j + t_j)^2
        L[sl, sl] += lift(A0[i] @ A0[i] + W[i])
    for alpha, node in idx_marked.items():
        parts = nahm.q_spin_parts(data, alpha)
        if operator_tag == "finv":
            V = parts[0]
        else:
            V = np.zeros((2 * k, 2 * k), dtype=complex)
            for j in (1, 2, 3):
                V = V - kron_spin(E[j], parts[j])
        sl = slice(node * m, (node + 1) * m)
        L[sl, sl] += V / h
    return L


def dense_greens(data, t, N):
    """Boundary F-blocks from the dense discretization (oracle path).

    Solves the dense system with discrete delta sources at the marked
    nodes and reads off the values there; returns a BoundaryGreens with
    G = None.
    """
    k = data.k
    h = TWO_PI / N
    L = dense_second_order(data, t, N, "finv")
    _, _, idx_marked = _node_values(data, t, N)
    n = data.n
    rhs = np.zeros((N * k, n * k), dtype=complex)
    for alpha in range(n):
        node = idx_marked[alpha]
        for c in range(k):
            rhs[node * k + c, alpha * k + c] = 1.0 / h
    sol = np.linalg.solve(L, rhs)
    F = np.empty((n, n, k, k), dtype=complex)
    for beta in range(n):
        nb = idx_marked[beta]
        for alpha in range(n):
            F[beta, alpha] = sol[nb * k:(nb + 1) * k,
                                 alpha * k:(alpha + 1) * k]
    herm = greens._hermiticity_defect(F)
    return greens.BoundaryGreens(t=tuple(float(x) for x in np.asarray(t, float)),
                                 F=F, G=None, diag_defect=0.0, herm_defect=herm)


# ---------------------------------------------------------------------------
# reference and random datasets

def _bloch_spinor(direction):
    """Unit spinor with Bloch vector along the given 3-direction."""
    nx, ny, nz = direction
    theta = math.acos(max(-1.0, min(1.0, nz)))
    phi = math.atan2(ny, nx)
    return np.array([math.cos(theta / 2.0),
                     complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2.0)],
                    dtype=complex)


def _pairs(x):
    x = complex(x)
    return [x.real, x.imag]


def su2_reference_data(m1=1.0, m2=1.0, n1=(0.0, 0.0, 1.0), n2=(0.0, 0.0, -1.0),
                       lambda1=math.pi / 2.0, lambda2=3.0 * math.pi / 2.0):
    """Two marked points, k = 1: piecewise-constant T_vec with jumps
    m1*n1 at lambda1 and m2*n2 at lambda2, T_0 = 0, and rank-1 Q realizing
    the matching condition at both points.

    The jumps must close up (m1*n1 + m2*n2 = 0) for the interval values
    to be consistent.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    for v, name in ((n1, "n1"), (n2, "n2")):
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ConfigError(f"{name} must be a unit vector")
    if m1 < 0 or m2 < 0:
        raise ConfigError("jump magnitudes must be non-negative")
    d1 = m1 * n1
    d2 = m2 * n2
    if np.max(np.abs(d1 + d2)) > 1e-12:
        raise ConfigError("inconsistent parameters: jumps do not close up "
                          f"(sum {tuple(d1 + d2)})")
    if not 0.0 <= lambda1 < lambda2 < TWO_PI:
        raise ConfigError("need 0 <= lambda1 < lambda2 < 2*pi")

    v_mid = 0.5 * d1          # value on (lambda1, lambda2)
    v_out = -0.5 * d1         # value on the wrapping interval

    def q_for(m, direction):
        if m == 0.0:
            return np.zeros((2, 1), dtype=complex)
        xi = _bloch_spinor(-np.asarray(direction, dtype=float))
        return (math.sqrt(2.0 * m) * xi).reshape(2, 1)

    qs = [q_for(m1, n1), q_for(m2, n2)]
    intervals = []
    for vec in (v_mid, v_out):
        intervals.append({
            "degree": 0,
            "T": {"0": [[[[0.0, 0.0]]]],
                  "1": [[[_pairs(vec[0])]]],
                  "2": [[[_pairs(vec[1])]]],
                  "3": [[[_pairs(vec[2])]]]},
        })
    cfg = {
        "k": 1,
        "lambdas": [lambda1, lambda2],
        "intervals": intervals,
        "Q": [[[_pairs(q[0, 0])], [_pairs(q[1, 0])]] for q in qs],
        "description": "SU(2) reference: opposite scalar jumps, rank-1 Q",
    }
    return nahm.from_dict(cfg)


def random_valid_data(rng, k=1, n=2, magnitude=0.6, min_gap=0.5):
    """Random dataset with vanishing Nahm and matching residuals.

    Block-diagonal superposition of k scalar datasets: piecewise-constant
    T_vec per 1x1 block whose jumps close up around the circle, constant
    T_0, and rank-1 Q columns aligned with each block.  Marked points are
    drawn with a minimum gap; every marked point carries width-1 Q (zero
    for blocks with no jump there).
    """
    k = int(k)
    n = int(n)
    if k < 1 or n < 1:
        raise ValueError("need k >= 1 and n >= 1")
    # marked points with decent spacing
    while True:
        lams = np.sort(rng.uniform(0.0, TWO_PI, size=n))
        gaps = np.diff(np.concatenate([lams, [lams[0] + TWO_PI]]))
        if n == 1 or np.min(gaps) > min_gap:
            break
    owner = rng.integers(0, k, size=n)          # block owning each marked point
    # per block: jump vectors at its points, summing to zero
    jumps = np.zeros((n, 3))
    for b in range(k):
        pts = np.flatnonzero(owner == b)
        if pts.size >= 2:
            d = rng.normal(0.0, magnitude, size=(pts.size, 3))
            d -= d.mean(axis=0)
            jumps[pts] = d
    # interval values per block: start random, add jumps while walking
    t0 = rng.normal(0.0, magnitude, size=k)
    base = rng.normal(0.0, magnitude, size=(k, 3))
    values = np.zeros((n, k, 3))
    values[0] = base
    for i in range(1, n):
        values[i] = values[i - 1]
        values[i, owner[i]] += jumps[i]
    # closure: walking past lambda_0 back to interval 0 must reproduce base
    check = values[n - 1].copy()
    check[owner[0]] += jumps[0]
    assert np.allclose(check, values[0], atol=1e-12)

    intervals = []
    for i in range(n):
        tmats = {"0": [np.diag(t0).astype(complex)]}
        for j in (1, 2, 3):
            tmats[str(j)] = [np.diag(values[i, :, j - 1]).astype(complex)]
        intervals.append({
            "degree": 0,
            "T": {key: [[[_pairs(mat[r, c]) for c in range(k)]
                         for r in range(k)] for mat in mats]
                  for key, mats in tmats.items()},
        })
    qs = []
    for alpha in range(n):
        b = owner[alpha]
        d = jumps[alpha]
        mag = float(np.linalg.norm(d))
        col = np.zeros(2 * k, dtype=complex)
        if mag > 1e-14:
            xi = _bloch_spinor(-d / mag)
            eb = np.zeros(k)
            eb[b] = 1.0
            col = math.sqrt(2.0 * mag) * np.kron(xi, eb)
        qs.append([[_pairs(col[r])] for r in range(2 * k)])
    cfg = {
        "k": k,
        "lambdas": [float(x) for x in lams],
        "intervals": intervals,
        "Q": qs,
        "description": f"random valid block-scalar data (k={k}, n={n})",
    }
    return nahm.from_dict(cfg)


def random_regular_t(data, rng, tol=1e-10, gap=1e-3, tries=50):
    """Draw a t where both first-order monodromies stay away from 1."""
    for _ in range(tries):
        t = np.array([rng.uniform(0.05, 0.95),
                      rng.uniform(-0.8, 0.8),
                      rng.uniform(-0.8, 0.8),
                      rng.uniform(-0.8, 0.8)])
        rep = monodromy.regularity(data, t, tol=tol, threshold=gap)
        if rep.is_regular:
            return t
    raise RuntimeError("no regular t found")


# ---------------------------------------------------------------------------
# zero modes and the classical gauge potential

@dataclass(frozen=True)
class ZeroModeSet:
    """Normalized kernel frame psi of the adjoint Weyl operator at one t.

    psi(s) is (2k, N); the columns satisfy the defining flow between
    marked points and sum the boundary sources against chi.  gram_defect
    is | int psi^dag psi ds + chi^2 - id | from the normalization
    identity.
    """
    t: tuple
    chi: np.ndarray
    gram: np.ndarray
    gram_defect: float
    _bases: tuple
    _evaluator: object

    def psi(self, s):
        ev = self._evaluator
        data = ev.data
        out = np.zeros((2 * data.k, self.chi.shape[0]), dtype=complex)
        for alpha, U in enumerate(self._bases):
            lam = float(data.lambdas[alpha])
            d = (s - lam) % TWO_PI
            P = (np.eye(2 * data.k) if d == 0.0
                 else ev.path_matrix("ddag", lam, lam + d))
            out += P @ U
        return -1j * out


def _zero_mode_bases(ev, chi_mat):
    """Per-marked-point initial data U_alpha = (loop - id)^{-1} Q_alpha chi_alpha."""
    data = ev.data
    offs, N = greens.block_offsets(data)
    bases = []
    for alpha in range(data.n):
        loop = ev.loop_matrix("ddag", alpha)
        rhs = data.Q[alpha] @ chi_mat[offs[alpha]:offs[alpha] + data.Q[alpha].shape[1], :]
        bases.append(ev._checked_inverse_apply(
            loop, rhs, f"ddag loop at marked point {alpha}"))
    return bases


def _psi_on_nodes(ev, bases, nodes_by_interval):
    """psi evaluated on all interval nodes; dict (i, j) -> (2k, N)."""
    data = ev.data
    n = data.n
    vals = {}
    for alpha in range(n):
        state = bases[alpha]
        for step in range(n):
            i = (alpha + step) % n
            a, b = data.interval_bounds(i)
            coeff = monodromy._first_order_coeff(data, ev.t, i, a, b, "ddag")
            pos = a
            for j, s in enumerate(nodes_by_interval[i]):
                state = monodromy.transfer(coeff, pos, s, ev.tol) @ state
                pos = s
                key = (i, j)
                if key in vals:
                    vals[key] += state
                else:
                    vals[key] = state.copy()
            state = monodromy.transfer(coeff, pos, b, ev.tol) @ state
    for key in vals:
        vals[key] *= -1j
    return vals


def _interval_nodes(data, panels, order=12):
    nodes, weights = [], []
    for i in range(data.n):
        a, b = data.interval_bounds(i)
        nd, wt = connection._gl_nodes(a, b, panels, order)
        nodes.append(nd)
        weights.append(wt)
    return nodes, weights


def zero_modes(data, t, quad_tol=1e-8, tol=1e-10, max_panels=64):
    """Zero-mode frame with its Gram matrix over the circle.

    The Gram integral is refined (panel doubling) until it stabilizes
    below quad_tol; the normalization identity gram + chi^2 = id gives
    gram_defect.
    """
    ev = greens.GreensEvaluator(data, t, tol)
    chi_mat = connection.chi_from_boundary(data, ev.boundary())
    bases = _zero_mode_bases(ev, chi_mat)
    N = chi_mat.shape[0]
    prev = None
    panels = 2
    gram = None
    while panels <= max_panels:
        nodes_by_interval, weights_by_interval = _interval_nodes(data, panels)
        vals = _psi_on_nodes(ev, bases, nodes_by_interval)
        gram = np.zeros((N, N), dtype=complex)
        for i in range(data.n):
            for j, w in enumerate(weights_by_interval[i]):
                p = vals[(i, j)]
                gram += w * (p.conj().T @ p)
        if prev is not None and np.max(np.abs(gram - prev)) < quad_tol:
            break
        prev = gram
        panels *= 2
    else:
        raise IntegrationError(
            f"Gram quadrature did not reach {quad_tol:.1e} within "
            f"{max_panels} panels per interval")
    defect = float(np.max(np.abs(gram + chi_mat @ chi_mat - np.eye(N))))
    return ZeroModeSet(t=tuple(float(x) for x in np.asarray(t, float)),
                       chi=chi_mat, gram=gram, gram_defect=defect,
                       _bases=tuple(bases), _evaluator=ev)


def classical_gauge_potential(data, t, h=1e-4, quad_tol=1e-8, tol=1e-10,
                              max_panels=64):
    """Gauge potential by direct integration over the circle:

        A_mu = int psi^dag d_mu psi ds + chi d_mu chi,

    with the t-derivatives by central differences of step h.  This is the
    slow reference route; it must agree with gauge_potential.
    """
    t = np.asarray(t, dtype=float)

    def frame(tp):
        ev = greens.GreensEvaluator(data, tp, tol)
        chi_mat = connection.chi_from_boundary(data, ev.boundary())
        bases = _zero_mode_bases(ev, chi_mat)
        return ev, chi_mat, bases

    ev0, chi0, bases0 = frame(t)
    N = chi0.shape[0]

    # fix the panel structure with the center-point Gram integral
    panels = 2
    prev = None
    while panels <= max_panels:
        nodes_by_interval, weights_by_interval = _interval_nodes(data, panels)
        vals0 = _psi_on_nodes(ev0, bases0, nodes_by_interval)
        gram = np.zeros((N, N), dtype=complex)
        for i in range(data.n):
            for j, w in enumerate(weights_by_interval[i]):
                p = vals0[(i, j)]
                gram += w * (p.conj().T @ p)
        if prev is not None and np.max(np.abs(gram - prev)) < quad_tol:
            break
        prev = gram
        panels *= 2
    else:
        raise IntegrationError(
            f"Gram quadrature did not reach {quad_tol:.1e} within "
            f"{max_panels} panels per interval")

    A = np.zeros((4, N, N), dtype=complex)
    for mu in range(4):
        evp, chip, basesp = frame(t + h * connection._UNIT[mu])
        evm, chim, basesm = frame(t - h * connection._UNIT[mu])
        valsp = _psi_on_nodes(evp, basesp, nodes_by_interval)
        valsm = _psi_on_nodes(evm, basesm, nodes_by_interval)
        acc = np.zeros((N, N), dtype=complex)
        for i in range(data.n):
            for j, w in enumerate(weights_by_interval[i]):
                dpsi = (valsp[(i, j)] - valsm[(i, j)]) / (2.0 * h)
                acc += w * (vals0[(i, j)].conj().T @ dpsi)
        A[mu] = acc + chi0 @ ((chip - chim) / (2.0 * h))
    return connection.GaugePotential(
        t=tuple(float(x) for x in t), A=A, chi=chi0,
        chi_min_eigenvalue=float(np.linalg.eigvalsh(chi0 @ chi0).min()),
        antiherm_defect=float(max(np.max(np.abs(A[mu] + A[mu].conj().T))
                                  for mu in range(4))))
