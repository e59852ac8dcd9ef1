"""Overlapping additive Schwarz decomposition of the spatial domain.

Used as the per-time-step solver at the fine scale: each sweep solves the
P_s local Dirichlet problems against the current iterate's trace values and
blends them with a Richardson parameter tau.  The full sweep history is
recorded for the a posteriori error split.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .mesh import FormCache, NodalField, assemble_load, project_field
from .timestepping import Trajectory


@dataclass(frozen=True)
class OverlapDecomposition:
    """P_s overlapping element blocks of a 1D mesh."""

    mesh: object
    P_s: int
    beta: float
    tau: float
    ranges: tuple     # per subdomain, (first_element, last_element_exclusive)
    overlaps: dict    # (i, j) -> (first_element, last_element_exclusive)

    def elements(self, i):
        lo, hi = self.ranges[i]
        return range(lo, hi)


def decompose_domain(mesh, P_s, beta, tau=0.4):
    """Equal element blocks, each interior edge extended by round(beta * block)
    elements on both sides and clamped to the domain."""
    N = mesh.n_elements
    if P_s < 1:
        raise ValueError("P_s must be >= 1")
    if N % P_s != 0:
        raise ValueError(f"N_s={N} must be divisible by P_s={P_s}")
    block = N // P_s
    ext = int(round(beta * block))
    if P_s > 1 and ext < 1:
        raise ValueError(
            f"beta={beta} yields no overlap; need beta >= {0.5 / block} "
            f"for at least one overlap element"
        )
    ranges = []
    for i in range(P_s):
        lo = i * block
        hi = (i + 1) * block
        if i > 0:
            lo -= ext
        if i < P_s - 1:
            hi += ext
        ranges.append((max(0, lo), min(N, hi)))
    overlaps = {}
    for i in range(P_s):
        for j in range(P_s):
            lo = max(ranges[i][0], ranges[j][0])
            hi = min(ranges[i][1], ranges[j][1])
            if hi > lo:
                overlaps[(i, j)] = (lo, hi)
    return OverlapDecomposition(mesh, P_s, beta, tau, tuple(ranges), overlaps)


def subdomain_dof_sets(space, decomp, i):
    """(interior, trace, closure) dof indices of subdomain i in a space.

    interior: nodes strictly inside Omega_i (excluding the outer boundary);
    trace: nodes on the internal boundary of Omega_i; closure: both.
    """
    lo, hi = decomp.ranges[i]
    x_lo = space.mesh.boundaries[lo]
    x_hi = space.mesh.boundaries[hi]
    coords = space.dof_coords
    tol = 1e-12 * (space.mesh.b - space.mesh.a)
    inside = (coords > x_lo + tol) & (coords < x_hi - tol)
    on_trace = (np.abs(coords - x_lo) <= tol) | (np.abs(coords - x_hi) <= tol)
    interior = np.nonzero(inside)[0]
    trace = np.nonzero(on_trace)[0]
    closure = np.nonzero(inside | on_trace)[0]
    return interior, trace, closure


@dataclass
class SchwarzSweepRecord:
    """Per-sweep local solutions and blended global iterates for one solve.

    iterates[0] is the initial guess; iterates[k] the blend after sweep k.
    locals_[k-1][i] is the full-length local solution of subdomain i in sweep
    k (iterate values outside the subdomain closure).
    """

    iterates: list
    locals_: list


class AdditiveSchwarz:
    """Additive Schwarz sweeps for a fixed step operator B = M + dt*A."""

    def __init__(self, space, B_dense, decomp):
        self.space = space
        self.B = B_dense
        self.decomp = decomp
        self.sets = [subdomain_dof_sets(space, decomp, i)
                     for i in range(decomp.P_s)]
        self._lu = [sla.cho_factor(B_dense[np.ix_(s[0], s[0])])
                    for s in self.sets]

    def solve(self, rhs, guess, K_s):
        """Run K_s sweeps from the given initial guess; returns the final
        iterate and the full sweep record."""
        if K_s < 1:
            raise ValueError("K_s must be >= 1")
        tau, P_s = self.decomp.tau, self.decomp.P_s
        u = np.array(guess, dtype=float)
        record = SchwarzSweepRecord(iterates=[u.copy()], locals_=[])
        for k in range(K_s):
            locals_k = []
            acc = (1.0 - tau * P_s) * u
            for i in range(P_s):
                interior, trace, closure = self.sets[i]
                r = rhs[interior] - self.B[np.ix_(interior, trace)] @ u[trace]
                try:
                    x = sla.cho_solve(self._lu[i], r)
                except sla.LinAlgError as exc:
                    raise RuntimeError(
                        f"local solve failed at sweep k_s={k + 1}, subdomain i={i}"
                    ) from exc
                u_loc = u.copy()
                u_loc[interior] = x
                locals_k.append(u_loc)
                pi_u = u.copy()
                pi_u[closure] = u_loc[closure]
                acc += tau * pi_u
            u = acc
            record.iterates.append(u.copy())
            record.locals_.append(locals_k)
        return u, record


def propagate_be_schwarz(space, times, ic, f, decomp, K_s, cache=None,
                         initial_guess="zero"):
    """Implicit Euler where each step's SPD system is solved by K_s additive
    Schwarz sweeps.

    initial_guess selects the sweep starting iterate per step: 'zero' or
    'previous' (the previous time step's solution).  Returns a Trajectory
    carrying the per-step sweep records in traj.schwarz_records (index n-1
    for step n).
    """
    if initial_guess not in ("zero", "previous"):
        raise ValueError(f"unknown initial_guess {initial_guess!r}")
    cache = cache or FormCache()
    times = np.asarray(times, dtype=float)
    n_steps = len(times) - 1
    M, _ = cache.operators(space)
    Minc = cache.mass(space, ic.space)
    values = np.zeros((n_steps + 1, space.dof_count))
    prev_m = Minc @ ic.coefficients
    values[0] = M.solve(prev_m)
    records = []
    prev = values[0]
    dt0 = times[1] - times[0]
    sweeper = AdditiveSchwarz(space, cache.step_operator(space, dt0).dense, decomp)
    for n in range(1, n_steps + 1):
        dt = times[n] - times[n - 1]
        if abs(dt - dt0) > 1e-13 * max(abs(dt), 1.0):
            dt0 = dt
            sweeper = AdditiveSchwarz(
                space, cache.step_operator(space, dt).dense, decomp
            )
        rhs = prev_m + dt * assemble_load(space, times[n], f)
        guess = prev if initial_guess == "previous" else np.zeros_like(prev)
        u, rec = sweeper.solve(rhs, guess, K_s)
        values[n] = u
        records.append(rec)
        prev = u
        prev_m = M.dense @ u
    traj = Trajectory(space, times, values, incoming=ic)
    traj.schwarz_records = records
    return traj


def asdd_solve(space, B_op, rhs, decomp, K_s, initial_guess, cache=None):
    """One additive Schwarz solve of B u = rhs (B an AssembledOperator combo).

    Returns (solution NodalField, SchwarzSweepRecord)."""
    sweeper = AdditiveSchwarz(space, B_op.dense, decomp)
    u, rec = sweeper.solve(np.asarray(rhs, dtype=float),
                           initial_guess.coefficients, K_s)
    return NodalField(space, u), rec
