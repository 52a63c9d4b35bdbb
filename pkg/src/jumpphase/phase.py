"""Pancharatnam and geometric phases along jump trajectories.

Conventions used throughout:

* total phase of a trajectory: arg<psi(0)|psi(T)>, reported in (-pi, pi].
* dynamical phase: the positive energy integral int <psi|H|psi> dt summed
  over the no-jump segments (unbounded accumulation, not wrapped).
* geometric phase, assembled as an unwrapped sum so windings stay visible:

      gamma = -dynamical + sum_j arg<psi(t_j)|Gamma_{c_j}|psi(t_j)>
                         + arg<psi(T)|psi(0)>

  For the dephasing benchmark this gives pi(1-cos theta) for any number of
  jumps (mod 2 pi), and pi at the equator for the closed-system precession.

``pancharatnam_discrete`` keeps the classic leading-minus chain form
-arg{<psi_1|psi_2>...<psi_N|psi_1>}, which orients the +z,+x,+y octant chain
to -pi/4.  The two orientations differ by an overall sign mod 2 pi; each is
pinned by its own reference value, and ``discrete_vs_continuous`` accumulates
the chain argument in the trajectory orientation so refinements converge to
``trajectory_phase``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import mat_exp
from .model import LindbladModel, effective_hamiltonian
from .trajectory import (NORM_COLLAPSE_TOL, TrajectoryRecord, _iterated_states,
                         _segment_substeps)

OVERLAP_TOL = 1e-9


class PhaseUndefinedError(RuntimeError):
    """An overlap needed for a phase fell below tolerance (orthogonal states)."""


def wrap_angle(x: float) -> float:
    """Map an angle to the principal branch (-pi, pi]."""
    return float(np.pi - np.mod(np.pi - x, 2.0 * np.pi))


def circular_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle, in [0, pi]."""
    return abs(wrap_angle(a - b))


@dataclass(frozen=True)
class PhaseBreakdown:
    """Phase decomposition of one trajectory.

    ``jump_phases`` pairs each jump event with its arg<psi|Gamma|psi> term;
    ``closure_phase`` is the arg<psi(T)|psi(0)> term that closes the open
    path.  The components satisfy
    geometric = -dynamical + sum(jump) + closure by construction.

    ``geometric_phase`` is the unwrapped accumulation, so a path that winds
    keeps its multiple of 2 pi and 2 pi stays distinguishable from 0;
    ``geometric_phase_wrapped`` folds it onto the principal branch for
    comparisons and serialization.
    """

    total_phase: float
    dynamical_phase: float
    geometric_phase: float
    jump_phases: tuple
    closure_phase: float
    method: str

    @property
    def jump_phase_sum(self) -> float:
        return float(sum(p for _, p in self.jump_phases))

    @property
    def geometric_phase_wrapped(self) -> float:
        return wrap_angle(self.geometric_phase)


def pancharatnam_discrete(states, tol: float = OVERLAP_TOL) -> float:
    """Phase of a discrete state chain: -arg of the closed overlap product.

    The chain is closed through the final overlap <psi_N|psi_1>.  Each factor
    is normalized to unit modulus before multiplying, so arbitrarily long
    chains neither underflow nor lose the argument.  Gauge invariant: phase
    rotations of individual states cancel between adjacent factors.

    Raises
    ------
    PhaseUndefinedError
        If any consecutive overlap (or the closing one) has modulus below
        ``tol``: "Pancharatnam undefined: orthogonal consecutive states".
    """
    chain = [np.asarray(s, dtype=complex) for s in states]
    if len(chain) < 2:
        raise ValueError("need at least 2 states")
    dim = chain[0].shape
    norms = []
    for j, s in enumerate(chain):
        if s.shape != dim:
            raise ValueError("states in the chain have mixed dimensions")
        n = np.linalg.norm(s)
        if n < NORM_COLLAPSE_TOL:
            raise ValueError(f"state {j} in the chain has vanishing norm")
        norms.append(n)
    prod = 1.0 + 0.0j
    n_states = len(chain)
    for j in range(n_states):
        a = chain[j]
        b = chain[(j + 1) % n_states]
        z = np.vdot(a, b) / (norms[j] * norms[(j + 1) % n_states])
        az = abs(z)
        if az < tol:
            raise PhaseUndefinedError(
                f"Pancharatnam undefined: orthogonal consecutive states "
                f"(|<{j}|{(j + 1) % n_states}>| = {az:.3e} < {tol})")
        prod *= z / az
    return float(-np.angle(prod))


def connection_increment(psi, dpsi) -> float:
    """Berry connection one-form on a displacement: Im<psi|dpsi> / <psi|psi>."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.asarray(dpsi, dtype=complex)
    if psi.shape != dpsi.shape:
        raise ValueError(f"dimension mismatch: {psi.shape} vs {dpsi.shape}")
    return float(np.vdot(psi, dpsi).imag / np.vdot(psi, psi).real)


def jump_phase_term(gamma_op, psi_pre, tol: float = OVERLAP_TOL) -> float:
    """arg<psi|Gamma|psi> for the state just before a jump.

    Raises
    ------
    PhaseUndefinedError
        If the matrix element modulus (for the normalized state) is below
        ``tol``; the phase kick of such a jump is genuinely undefined.
    """
    g = np.asarray(gamma_op, dtype=complex)
    psi = np.asarray(psi_pre, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] != psi.shape[0]:
        raise ValueError(f"operator shape {g.shape} does not match state dim {psi.shape}")
    z = np.vdot(psi, g @ psi) / np.vdot(psi, psi).real
    if abs(z) < tol:
        raise PhaseUndefinedError(
            f"jump phase undefined: |<psi|Gamma|psi>| = {abs(z):.3e} < {tol}")
    return float(np.angle(z))


def _segment_dynamical(model, h_eff, psi_start, length, mode, n_sub):
    """One no-jump segment: (energy integral, normalized endpoint state).

    Exact mode propagates node states with the segment exponential and does
    composite Simpson on the real integrand <H>(t); euler mode replays the
    first-order factors and accumulates the per-step overlap arguments, whose
    negated sum is that mode's version of the same integral.
    """
    if length == 0.0 or n_sub == 0:
        return 0.0, psi_start
    h = length / n_sub
    if mode == "exact":
        step = mat_exp(h_eff, -1j * h)
    else:
        step = np.eye(model.dim, dtype=complex) - 1j * h * h_eff
    chain = _iterated_states(step, psi_start, n_sub)
    node_norms = np.linalg.norm(chain, axis=1)
    if node_norms.min() < NORM_COLLAPSE_TOL:
        raise PhaseUndefinedError("state norm collapsed inside a no-jump segment")
    chain = chain / node_norms[:, None]
    if mode == "exact":
        f = np.einsum("ij,jk,ik->i", chain.conj(), model.hamiltonian, chain).real
        # composite Simpson; n_sub is kept even by the caller
        integral = (h / 3.0) * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-2:2].sum())
        return float(integral), chain[-1]
    overlaps = np.einsum("ij,ij->i", chain[:-1].conj(), chain[1:])
    return float(-np.angle(overlaps).sum()), chain[-1]


def _assemble(model, psi0, total_time, jumps, mode, n_total, tol):
    """Common engine behind no_jump_phase and trajectory_phase."""
    h_eff = effective_hamiltonian(model)
    boundaries = [0.0] + [t for t, _ in jumps] + [total_time]
    psi = psi0
    dynamical = 0.0
    jump_args = []
    for i in range(len(boundaries) - 1):
        seg = boundaries[i + 1] - boundaries[i]
        m = _segment_substeps(seg, n_total, total_time)
        if mode == "exact" and m % 2:
            m += 1
        d, psi = _segment_dynamical(model, h_eff, psi, seg, mode, m)
        dynamical += d
        if i < len(jumps):
            t_j, channel = jumps[i]
            g = model.jump_ops[channel - 1]
            try:
                phi = jump_phase_term(g, psi, tol=tol)
            except PhaseUndefinedError as err:
                raise PhaseUndefinedError(f"at t={t_j:.6g}, channel {channel} "
                                          f"({model.labels[channel - 1]}): {err}") from err
            jump_args.append(phi)
            v = g @ psi
            nv = np.linalg.norm(v)
            if nv < NORM_COLLAPSE_TOL:
                raise PhaseUndefinedError(
                    f"jump at t={t_j:.6g} annihilated the state (norm {nv:.3e})")
            psi = v / nv
    z_close = np.vdot(psi, psi0)
    if abs(z_close) < tol:
        raise PhaseUndefinedError(
            f"phase undefined: final state orthogonal to initial "
            f"(|<psi(T)|psi(0)>| = {abs(z_close):.3e} < {tol})")
    closure = float(np.angle(z_close))
    total = float(np.angle(np.vdot(psi0, psi)))
    geometric = -dynamical + sum(jump_args) + closure
    return total, dynamical, geometric, jump_args, closure


def no_jump_phase(model: LindbladModel, psi0, t0: float, t1: float,
                  n_quad: int = 4096, tol: float = OVERLAP_TOL) -> PhaseBreakdown:
    """Geometric phase of the pure no-jump trajectory on [t0, t1].

    Propagates psi0 under the effective Hamiltonian in exact-segment mode and
    evaluates the energy integral by composite Simpson quadrature with
    ``n_quad`` nodes.  For unital models the result coincides with the closed
    system's geometric phase, since the no-jump evolution is then a uniformly
    damped unitary.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    psi = np.asarray(psi0, dtype=complex)
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > 1e-9:
        raise ValueError(f"psi0 norm {n:.12g} is not 1 within 1e-9")
    total, dyn, geo, _, closure = _assemble(
        model, psi / n, t1 - t0, [], "exact", max(2, int(n_quad)), tol)
    return PhaseBreakdown(total_phase=total, dynamical_phase=dyn,
                          geometric_phase=geo, jump_phases=(),
                          closure_phase=closure, method="continuous")


def trajectory_phase(record: TrajectoryRecord, model: LindbladModel,
                     n_quad: int | None = None, tol: float = OVERLAP_TOL) -> PhaseBreakdown:
    """Full phase decomposition of a recorded trajectory.

    Splits [0, T] at the jump times, accumulates the no-jump energy integral
    per segment (in the record's propagation mode), adds arg<psi|Gamma|psi>
    at each jump and the closing arg<psi(T)|psi(0)>.  Quadrature resolution
    defaults to the record's step count.

    Raises
    ------
    PhaseUndefinedError
        With the segment or event location, whenever an overlap or jump
        matrix element is below tolerance.
    """
    n_total = int(n_quad) if n_quad is not None else record.n_steps
    jumps = [(e.time, e.channel) for e in record.events]
    total, dyn, geo, args, closure = _assemble(
        model, record.states[0], record.total_time, jumps, record.mode, n_total, tol)
    return PhaseBreakdown(total_phase=total, dynamical_phase=dyn,
                          geometric_phase=geo,
                          jump_phases=tuple(zip(record.events, args)),
                          closure_phase=closure, method="continuous")


@dataclass(frozen=True)
class DiscreteConvergence:
    """Refinement table from discrete_vs_continuous."""

    chain_steps: np.ndarray
    discrete: np.ndarray
    continuous: float
    errors: np.ndarray

    def __post_init__(self):
        for arr in (self.chain_steps, self.discrete, self.errors):
            arr.setflags(write=False)


def discrete_vs_continuous(record: TrajectoryRecord, model: LindbladModel,
                           n_refinements: int = 3, tol: float = OVERLAP_TOL) -> DiscreteConvergence:
    """Convergence of the discrete chain phase toward the continuous one.

    For each refinement level r the trajectory (same jump times) is rebuilt
    as a first-order chain with 2^r times the record's nominal steps, and the
    closed chain product's argument is accumulated factor by factor, in the
    trajectory orientation (the negative of the principal-branch value that
    ``pancharatnam_discrete`` reports, unwrapped).  The reference is the
    exact-segment ``trajectory_phase``; errors drop as O(1/N) because the
    chain states themselves carry the first-order discretization error.
    """
    jumps = [(e.time, e.channel) for e in record.events]
    ref = _assemble(model, record.states[0], record.total_time, jumps,
                    "exact", max(record.n_steps, 4096), tol)[2]
    h_eff = effective_hamiltonian(model)
    boundaries = [0.0] + [t for t, _ in jumps] + [record.total_time]
    steps_out = []
    values = []
    for r in range(n_refinements):
        n_total = record.n_steps * (1 << r)
        psi = record.states[0]
        acc = 0.0
        actual = 0
        for i in range(len(boundaries) - 1):
            seg = boundaries[i + 1] - boundaries[i]
            m = _segment_substeps(seg, n_total, record.total_time)
            actual += m
            if m > 0:
                step = np.eye(model.dim, dtype=complex) - 1j * (seg / m) * h_eff
                chain = _iterated_states(step, psi, m)
                node_norms = np.linalg.norm(chain, axis=1)
                chain = chain / node_norms[:, None]
                overlaps = np.einsum("ij,ij->i", chain[:-1].conj(), chain[1:])
                if np.abs(overlaps).min() < tol:
                    raise PhaseUndefinedError(
                        "Pancharatnam undefined: orthogonal consecutive states in refinement chain")
                acc += float(np.angle(overlaps).sum())
                psi = chain[-1]
            if i < len(jumps):
                g = model.jump_ops[jumps[i][1] - 1]
                z = np.vdot(psi, g @ psi)
                if abs(z) < tol:
                    raise PhaseUndefinedError(
                        f"jump phase undefined in refinement chain at t={jumps[i][0]:.6g}")
                acc += float(np.angle(z))
                psi = (g @ psi) / np.linalg.norm(g @ psi)
        z_close = np.vdot(psi, record.states[0])
        if abs(z_close) < tol:
            raise PhaseUndefinedError("phase undefined: refinement chain closes orthogonally")
        acc += float(np.angle(z_close))
        steps_out.append(actual)
        values.append(acc)
    values = np.array(values)
    return DiscreteConvergence(chain_steps=np.array(steps_out, dtype=int),
                               discrete=values, continuous=float(ref),
                               errors=np.abs(values - ref))


@dataclass(frozen=True)
class ComponentStats:
    """Circular statistics of one phase component across an ensemble."""

    histogram: np.ndarray
    bin_edges: np.ndarray
    circular_mean: float
    resultant_length: float

    def __post_init__(self):
        self.histogram.setflags(write=False)
        self.bin_edges.setflags(write=False)


@dataclass(frozen=True)
class PhaseStatistics:
    n: int
    geometric: ComponentStats
    dynamical: ComponentStats
    total: ComponentStats


def _component_stats(values, n_bins):
    wrapped = np.array([wrap_angle(v) for v in values])
    hist, edges = np.histogram(wrapped, bins=n_bins, range=(-np.pi, np.pi))
    phasor = np.exp(1j * wrapped).mean()
    return ComponentStats(histogram=hist, bin_edges=edges,
                          circular_mean=float(np.angle(phasor)),
                          resultant_length=float(np.abs(phasor)))


def ensemble_phase_statistics(breakdowns, n_bins: int = 36) -> PhaseStatistics:
    """Histograms, circular means and resultant lengths |<e^{i phi}>|.

    The resultant length is the single dephasing-visibility diagnostic this
    package reports: 1 means the component is sharp across the ensemble, 0
    means fully randomized.
    """
    items = list(breakdowns)
    if not items:
        raise ValueError("need at least one PhaseBreakdown")
    return PhaseStatistics(
        n=len(items),
        geometric=_component_stats([b.geometric_phase for b in items], n_bins),
        dynamical=_component_stats([b.dynamical_phase for b in items], n_bins),
        total=_component_stats([b.total_phase for b in items], n_bins))
