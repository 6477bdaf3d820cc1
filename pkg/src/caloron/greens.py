"""Green's functions of the kernel flows via monodromy inversion.

For a first-order flow with circle monodromy iota based at y, the
fundamental kernel is

    B(x, y) = iota_{x,y} (iota_{y+2pi,y} - id)^{-1},   x in [y, y + 2*pi),

where iota_{x,y} transports solutions from y to x.  For the second-order
companion flows the Green's function with a unit source insertion at y is

    F(x, y) = pi_2 iota_{x,y} (iota_{y+2pi,y} - id)^{-1} pi_1,

with pi_1 v = (0, v) (a pure derivative kick at the source) and pi_2 the
value block; the source convention matches the sign of the -d^2/ds^2 term
of the operator.  G is the same formula for the 2k-dimensional lifted
flow ('ddagd'), F for the k-dimensional one ('finv').

The boundary Green's matrices collect the blocks F(lambda_beta,
lambda_alpha) and G(lambda_beta, lambda_alpha); sandwiching with the
boundary matrices Q gives the N x N matrices entering the gauge
potential, N = sum of the Q widths.

All evaluations at a fixed (data, t) share one GreensEvaluator, which
caches interval transfers and loop factorizations.
"""

from dataclasses import dataclass

import numpy as np

from . import monodromy
from .errors import IntegrationError, IrregularPointError
from .nahm import TWO_PI, locate, marked_index
from .spin import kron_spin

_COND_LIMIT = 1e12
_DIAG_TOL = 1e-8


def _gap_from_unity(M):
    return float(np.min(np.abs(np.linalg.eigvals(M) - 1.0)))


class GreensEvaluator:
    """Caches interval transfers, jumps and loop inverses for one (data, t)."""

    def __init__(self, data, t, tol=1e-10):
        self.data = data
        self.t = np.asarray(t, dtype=float)
        if self.t.shape != (4,):
            raise ValueError("t must be a 4-vector (t0, t1, t2, t3)")
        self.tol = tol
        self._transfers = {}
        self._jumps = {}
        self._loops = {}
        self._loop_solutions = {}

    # -- cached building blocks ------------------------------------------

    def interval_transfers(self, tag):
        if tag not in self._transfers:
            if tag in ("ddag", "d"):
                self._transfers[tag] = monodromy.interval_transfers_first_order(
                    self.data, self.t, which=tag, tol=self.tol)
            else:
                self._transfers[tag] = monodromy.interval_transfers_second_order(
                    self.data, self.t, operator_tag=tag, tol=self.tol)
        return self._transfers[tag]

    def jumps(self, tag):
        if tag not in self._jumps:
            self._jumps[tag] = [
                monodromy.second_order_jump(self.data, self.t, alpha, tag)
                for alpha in range(self.data.n)]
        return self._jumps[tag]

    def _dim(self, tag):
        k = self.data.k
        return {"ddag": 2 * k, "d": 2 * k, "finv": 2 * k, "ddagd": 4 * k}[tag]

    def loop_matrix(self, tag, alpha=0):
        """Full-circle transfer based at lambda_alpha, from cached pieces."""
        key = (tag, alpha)
        if key not in self._loops:
            n = self.data.n
            T = self.interval_transfers(tag)
            J = self.jumps(tag) if tag in ("finv", "ddagd") else None
            M = np.eye(self._dim(tag), dtype=complex)
            for i in range(n):
                M = T[(alpha + i) % n] @ M
                if J is not None:
                    M = J[(alpha + i + 1) % n] @ M
            self._loops[key] = M
        return self._loops[key]

    def _checked_inverse_apply(self, M, rhs, where):
        A = M - np.eye(M.shape[0])
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise IrregularPointError(
                f"monodromy has a (near-)unit eigenvalue at t = {tuple(self.t)}"
                f" ({where}; cond = {cond:.3e})",
                gap=_gap_from_unity(M), cond=float(cond))
        return np.linalg.solve(A, rhs)

    def loop_solution(self, tag, alpha):
        """(iota - id)^{-1} pi_1: source columns of the based loop, (2m, m)."""
        key = (tag, alpha)
        if key not in self._loop_solutions:
            M = self.loop_matrix(tag, alpha)
            m = M.shape[0] // 2
            P1 = np.zeros((2 * m, m), dtype=complex)
            P1[m:, :] = np.eye(m)
            self._loop_solutions[key] = self._checked_inverse_apply(
                M, P1, f"{tag} loop at marked point {alpha}")
        return self._loop_solutions[key]

    # -- paths ------------------------------------------------------------

    def _segments_from(self, y):
        """Generator of (a, b, interval, crossed) walking forward from y.

        Yields consecutive segments whose union is [y, y + 2*pi]; crossed
        is the marked-point index at the segment's right end (its jump is
        applied there for second-order flows), or None at the loop end.
        """
        points, crossed = monodromy._loop_segments(self.data, y)
        for (a, b), idx in zip(zip(points[:-1], points[1:]), crossed):
            i, A, B = monodromy._interval_frame(self.data, a, b)
            yield a, b, (i, A, B), idx

    def _partial_transfer(self, tag, frame, a, b):
        i, A, B = frame
        if tag in ("ddag", "d"):
            coeff = monodromy._first_order_coeff(self.data, self.t, i, A, B, tag)
        else:
            coeff = monodromy._second_order_coeff(self.data, self.t, i, A, B, tag)
        return monodromy.transfer(coeff, a, b, self.tol)

    def path_matrix(self, tag, y, x):
        """Transport from y to x, x in (y, y + 2*pi] up to winding.

        Second-order tags compose the jump of every marked point in
        (y, x]; returned derivative blocks at a marked x are therefore
        right limits.  Uses cached transfers for fully covered intervals.
        """
        d = (x - y) % TWO_PI
        if d == 0.0 and x != y:
            d = TWO_PI
        target = d
        T = self.interval_transfers(tag)
        J = self.jumps(tag) if tag in ("finv", "ddagd") else None
        M = np.eye(self._dim(tag), dtype=complex)
        if d == 0.0:
            return M
        base = None
        for a, b, frame, idx in self._segments_from(y):
            if base is None:
                base = a
            sa, sb = a - base, b - base
            if sa >= target - 1e-12:
                break
            if sb <= target + 1e-12:
                # full segment
                if sb - sa > 0:
                    i, A, B = frame
                    ai, bi = self.data.interval_bounds(i)
                    if abs((b - a) - (bi - ai)) < 1e-12:
                        M = T[i] @ M
                    else:
                        M = self._partial_transfer(tag, frame, a, b) @ M
                if idx is not None and J is not None and sb <= target + 1e-12:
                    M = J[idx] @ M
                if abs(sb - target) <= 1e-12:
                    break
            else:
                M = self._partial_transfer(tag, frame, a, base + target) @ M
                break
        return M

    # -- kernels -----------------------------------------------------------

    def fundamental_B(self, x, y, which="ddag"):
        """First-order kernel iota_{x,y}(iota_loop - id)^{-1}, (2k x 2k).

        At x = y returns the one-sided (x -> y+) limit (iota_loop - id)^{-1};
        across the diagonal the kernel jumps by the identity.
        """
        loop = self._loop_at(which, y)
        base = self._checked_inverse_apply(
            loop, np.eye(2 * self.data.k, dtype=complex),
            f"{which} loop at s = {y:.6g}")
        d = (x - y) % TWO_PI
        if d == 0.0:
            return base
        return self.path_matrix(which, y, y + d) @ base

    def _loop_at(self, tag, s0):
        alpha = marked_index(self.data, s0)
        if alpha is not None:
            return self.loop_matrix(tag, alpha)
        M = np.eye(self._dim(tag), dtype=complex)
        J = self.jumps(tag) if tag in ("finv", "ddagd") else None
        T = self.interval_transfers(tag)
        for a, b, frame, idx in self._segments_from(s0):
            i, A, B = frame
            ai, bi = self.data.interval_bounds(i)
            if abs((b - a) - (bi - ai)) < 1e-12:
                M = T[i] @ M
            else:
                M = self._partial_transfer(tag, frame, a, b) @ M
            if idx is not None and J is not None:
                M = J[idx] @ M
        return M

    def greens_value(self, tag, x, y):
        """Green's function block: value part of the sourced companion flow."""
        m = self.data.k if tag == "finv" else 2 * self.data.k
        alpha = marked_index(self.data, y)
        if alpha is not None:
            K = self.loop_solution(tag, alpha)
            y = float(self.data.lambdas[alpha])
        else:
            loop = self._loop_at(tag, y)
            P1 = np.zeros((2 * m, m), dtype=complex)
            P1[m:, :] = np.eye(m)
            K = self._checked_inverse_apply(loop, P1, f"{tag} loop at s = {y:.6g}")
        d = (x - y) % TWO_PI
        if d == 0.0:
            return K[:m, :].copy()
        state = self.path_matrix(tag, y, y + d) @ K
        return state[:m, :]

    # -- boundary matrices --------------------------------------------------

    def boundary(self, want_G=False):
        data = self.data
        n, k = data.n, data.k
        F = np.empty((n, n, k, k), dtype=complex)
        diag_defect = 0.0
        for alpha in range(n):
            blocks, defect = self._boundary_sweep("finv", alpha)
            diag_defect = max(diag_defect, defect)
            for beta in range(n):
                F[beta, alpha] = blocks[beta]
        G = None
        if want_G:
            G = np.empty((n, n, 2 * k, 2 * k), dtype=complex)
            for alpha in range(n):
                blocks, defect = self._boundary_sweep("ddagd", alpha)
                diag_defect = max(diag_defect, defect)
                for beta in range(n):
                    G[beta, alpha] = blocks[beta]
        herm = _hermiticity_defect(F)
        scale = max(1.0, float(np.max(np.abs(F))))
        if herm > 1e-8 * scale:
            raise IntegrationError(
                f"boundary Green's matrix lost hermiticity (defect {herm:.3e}); "
                "tighten the integrator tolerance")
        return BoundaryGreens(t=tuple(float(x) for x in self.t), F=F, G=G,
                              diag_defect=diag_defect, herm_defect=herm)

    def _boundary_sweep(self, tag, alpha):
        """Values of the kernel sourced at lambda_alpha, at all marked points.

        Walks once around the circle with the cached interval transfers,
        recording the (continuous) value block at every marked point.  The
        sweep's return to the base point furnishes the left limit of the
        diagonal; it must agree with the right limit from the loop solve.
        """
        data = self.data
        n = data.n
        m = data.k if tag == "finv" else 2 * data.k
        T = self.interval_transfers(tag)
        J = self.jumps(tag)
        K = self.loop_solution(tag, alpha)
        vals = [None] * n
        state = K.copy()
        for i in range(n):
            idx = (alpha + i + 1) % n
            state = T[(alpha + i) % n] @ state
            if idx != alpha:
                vals[idx] = state[:m, :].copy()
            else:
                final_val = state[:m, :]
            state = J[idx] @ state
        right = K[:m, :]
        defect = float(np.max(np.abs(final_val - right)))
        if defect > _DIAG_TOL * max(1.0, float(np.max(np.abs(right)))):
            raise IntegrationError(
                f"diagonal limits of the Green's function disagree at marked "
                f"point {alpha} (defect {defect:.3e}); tighten the tolerance")
        vals[alpha] = 0.5 * (right + final_val)
        return vals, defect


@dataclass(frozen=True)
class BoundaryGreens:
    """Marked-point blocks of the Green's functions at one t.

    F[beta, alpha] is k x k; G[beta, alpha] (if requested) is 2k x 2k.
    diag_defect records the worst left/right diagonal disagreement,
    herm_defect the block-hermiticity defect of F.
    """
    t: tuple
    F: np.ndarray
    G: np.ndarray
    diag_defect: float
    herm_defect: float


def _hermiticity_defect(blocks):
    n = blocks.shape[0]
    worst = 0.0
    for b in range(n):
        for a in range(n):
            worst = max(worst, float(np.max(np.abs(
                blocks[b, a].conj().T - blocks[a, b]))))
    return worst


def block_offsets(data):
    """Start offsets of each marked point's columns in the N-dim boundary space."""
    offs = []
    pos = 0
    for w in data.widths:
        offs.append(pos)
        pos += w
    return offs, pos


def boundary_sandwich(data, blocks, spin_matrix=None):
    """N x N matrix with (beta, alpha) block Q_beta^dag (S (x) blocks[b,a]) Q_alpha.

    blocks has shape (n, n, k, k); spin_matrix S defaults to id2.
    """
    S = np.eye(2, dtype=complex) if spin_matrix is None else spin_matrix
    offs, N = block_offsets(data)
    out = np.zeros((N, N), dtype=complex)
    for b in range(data.n):
        qb = data.Q[b]
        for a in range(data.n):
            qa = data.Q[a]
            blk = qb.conj().T @ kron_spin(S, blocks[b, a]) @ qa
            out[offs[b]:offs[b] + qb.shape[1], offs[a]:offs[a] + qa.shape[1]] = blk
    return out


def boundary_sandwich_full(data, blocks):
    """Same with 2k x 2k blocks sandwiched directly (no spin factor)."""
    offs, N = block_offsets(data)
    out = np.zeros((N, N), dtype=complex)
    for b in range(data.n):
        qb = data.Q[b]
        for a in range(data.n):
            qa = data.Q[a]
            blk = qb.conj().T @ blocks[b, a] @ qa
            out[offs[b]:offs[b] + qb.shape[1], offs[a]:offs[a] + qa.shape[1]] = blk
    return out


def qfq_matrix(data, bg):
    """The N x N matrix with blocks Q_beta^dag (id2 (x) F[beta,alpha]) Q_alpha."""
    return boundary_sandwich(data, bg.F)


def qgq_matrix(data, bg):
    """The N x N matrix with blocks Q_beta^dag G[beta,alpha] Q_alpha."""
    if bg.G is None:
        raise ValueError("boundary data was built without G blocks "
                         "(pass want_G=True)")
    return boundary_sandwich_full(data, bg.G)


# -- convenience wrappers ---------------------------------------------------

def fundamental_B(data, t, x, y, tol=1e-10, which="ddag"):
    """First-order circle kernel at a single point pair."""
    return GreensEvaluator(data, t, tol).fundamental_B(x, y, which)


def greens_F(data, t, x, y, tol=1e-10):
    """k x k Green's function of the scalar-type second-order flow."""
    return GreensEvaluator(data, t, tol).greens_value("finv", x, y)


def greens_G(data, t, x, y, tol=1e-10):
    """2k x 2k Green's function of the lifted second-order flow."""
    return GreensEvaluator(data, t, tol).greens_value("ddagd", x, y)


def boundary_greens(data, t, tol=1e-10, want_G=False):
    """All marked-point blocks F (and optionally G) at one t."""
    return GreensEvaluator(data, t, tol).boundary(want_G)
