"""Quantum-jump trajectory generation.

A trajectory alternates no-jump evolution under the non-Hermitian effective
Hamiltonian with instantaneous jumps Gamma_k.  At every step of length dt the
channel is drawn from the renormalized first-order probabilities
p_k = ||W_k psi||^2; channel 0 evolves the state (by W_0 in euler mode, by
exp(-i Heff dt) in exact-segment mode) and channel k >= 1 applies Gamma_k and
renormalizes.  States are stored normalized together with the running log of
the squared norm of the unnormalized operator chain, which would otherwise
underflow on long damped stretches.

Reproducibility: each trajectory consumes one uniform block from a Philox
counter-based generator whose seed is a pure function of (base_seed, index),
so results are independent of scheduling and worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import dagger, mat_exp
from .model import LindbladModel, effective_hamiltonian, step_operators

NORM_COLLAPSE_TOL = 1e-14
STATE_NORM_TOL = 1e-9
# above this step count the default state storage is decimated
FULL_STORAGE_STEPS = 100_000


class NormCollapseError(RuntimeError):
    """A jump (or propagation) drove the state norm below NORM_COLLAPSE_TOL."""


def trajectory_seed(base_seed: int, index: int) -> int:
    """Derive the 64-bit seed of trajectory ``index`` from an ensemble seed.

    Pure function: storing (base_seed, index) or the returned value in an
    output row is enough to regenerate the trajectory bit-for-bit.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class JumpEvent:
    """One recorded jump.  ``channel`` is 1-based (0 means "no jump" in the
    sampling alphabet and never appears in an event); ``time`` is the end of
    the step in which the jump was sampled, jumps being instantaneous."""

    step_index: int
    time: float
    channel: int


@dataclass(frozen=True)
class TrajectoryRecord:
    """One realized pure-state trajectory.

    ``states[j]`` is the normalized state at ``times[j]``; ``log_norms[j]``
    is log ||chain||^2 of the unnormalized operator chain at the same time,
    and ``states[0]`` is always the initial state.  At a jump time the stored
    state is the post-jump one (the state going forward).  ``prescribed``
    marks records built from fixed jump times rather than sampling; for those
    ``seed`` is None and jumps enter the norm chain as plain Gamma factors
    (no sqrt(dt) measure weight).
    """

    seed: int | None
    dt: float
    total_time: float
    n_steps: int
    mode: str
    prescribed: bool
    events: tuple
    times: np.ndarray
    states: np.ndarray
    log_norms: np.ndarray
    prob_residual: float

    def __post_init__(self):
        for arr in (self.times, self.states, self.log_norms):
            arr.setflags(write=False)
        if not (len(self.times) == len(self.states) == len(self.log_norms)):
            raise ValueError("times/states/log_norms lengths differ")

    @property
    def norms(self) -> np.ndarray:
        """Squared-norm weights of the unnormalized chain at ``times``."""
        return np.exp(self.log_norms)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_norm(self) -> float:
        """Norm (not squared) of the unnormalized chain at T."""
        return float(np.exp(0.5 * self.log_norms[-1]))

    @property
    def n_jumps(self) -> int:
        return len(self.events)

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])

    @property
    def jump_channels(self) -> np.ndarray:
        return np.array([e.channel for e in self.events], dtype=int)


def _checked_initial_state(model: LindbladModel, psi0) -> np.ndarray:
    psi = np.array(psi0, dtype=complex)
    if psi.shape != (model.dim,):
        raise ValueError(f"initial state has shape {psi.shape}, expected ({model.dim},)")
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > STATE_NORM_TOL:
        raise ValueError(f"initial state norm {n:.12g} is not 1 within {STATE_NORM_TOL}")
    return psi / n


def _normalize_mode(mode: str) -> str:
    m = str(mode).lower().replace("_", "-")
    if m in ("exact", "exact-segment"):
        return "exact"
    if m == "euler":
        return "euler"
    raise ValueError(f"unknown propagation mode {mode!r} (use 'euler' or 'exact')")


def no_jump_propagate(model: LindbladModel, psi, t0: float, t1: float,
                      mode: str = "exact", n_steps: int | None = None) -> np.ndarray:
    """Propagate under Heff from t0 to t1 without jumps.  Never renormalizes.

    Exact-segment mode returns exp(-i Heff (t1-t0)) psi; euler mode returns
    the product of ``n_steps`` factors (1 - i Heff dt), default 1000.
    """
    if t1 < t0:
        raise ValueError(f"t1 = {t1} is earlier than t0 = {t0}")
    psi = np.asarray(psi, dtype=complex)
    if t1 == t0:
        return psi.copy()
    h_eff = effective_hamiltonian(model)
    if _normalize_mode(mode) == "exact":
        return mat_exp(h_eff, -1j * (t1 - t0)) @ psi
    m = 1000 if n_steps is None else int(n_steps)
    if m < 1:
        raise ValueError("n_steps must be >= 1 in euler mode")
    dt = (t1 - t0) / m
    w0 = np.eye(model.dim, dtype=complex) - 1j * dt * h_eff
    return np.linalg.matrix_power(w0, m) @ psi


# ---------------------------------------------------------------------------
# segment helpers shared with the phase module


def _segment_substeps(seg_length: float, n_steps: int, total_time: float) -> int:
    """Substep count for one no-jump segment of a prescribed trajectory.

    Chosen so the local step never exceeds the nominal total_time/n_steps;
    doubling n_steps then halves every local step, which the euler-mode
    convergence contract relies on.  Zero-length segments get zero steps.
    """
    if seg_length <= 0.0:
        return 0
    return max(1, int(np.ceil(seg_length * n_steps / total_time - 1e-12)))


def _iterated_states(step_matrix: np.ndarray, psi_start: np.ndarray, n: int) -> np.ndarray:
    """Chain [psi, M psi, M^2 psi, ..., M^n psi], unnormalized, shape (n+1, dim).

    Diagonalizes M so the whole chain is a couple of array operations; falls
    back to the plain loop when M is defective or badly conditioned.
    """
    dim = psi_start.shape[0]
    out = np.empty((n + 1, dim), dtype=complex)
    out[0] = psi_start
    if n == 0:
        return out
    if n >= 8:
        try:
            w, v = np.linalg.eig(step_matrix)
            vinv = np.linalg.inv(v)
            recon = (v * w) @ vinv
            scale = max(1.0, float(np.max(np.abs(step_matrix))))
            if np.max(np.abs(recon - step_matrix)) <= 1e-13 * scale:
                coeff = vinv @ psi_start
                powers = w[None, :] ** np.arange(n + 1)[:, None]
                return (powers * coeff[None, :]) @ v.T
        except np.linalg.LinAlgError:
            pass
    psi = psi_start
    for j in range(1, n + 1):
        psi = step_matrix @ psi
        out[j] = psi
    return out


def run_prescribed(model: LindbladModel, psi0, total_time: float, jumps,
                   mode: str = "exact", n_steps: int = 1000) -> TrajectoryRecord:
    """Deterministic trajectory with jumps at fixed times.

    Parameters
    ----------
    jumps : sequence of (time, channel)
        Strictly increasing times in [0, total_time]; channels are 1-based.
        Each jump applies Gamma_channel instantaneously (the jump is taken to
        be much faster than every other timescale).
    n_steps : int
        Nominal grid resolution.  Each no-jump segment is sampled with enough
        substeps that the local step is at most total_time/n_steps; in euler
        mode these substeps are also the discretization of the evolution.
    """
    mode = _normalize_mode(mode)
    if not total_time > 0.0:
        raise ValueError("total_time must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    psi = _checked_initial_state(model, psi0)
    jumps = [(float(t), int(c)) for t, c in jumps]
    for (t, c) in jumps:
        if not 0.0 <= t <= total_time:
            raise ValueError(f"jump time {t} outside [0, {total_time}]")
        if not 1 <= c <= model.n_channels:
            raise ValueError(f"jump channel {c} not in 1..{model.n_channels}")
    times_only = [t for t, _ in jumps]
    if any(b <= a for a, b in zip(times_only, times_only[1:])):
        raise ValueError("jump times must be strictly increasing")

    h_eff = effective_hamiltonian(model)
    boundaries = [0.0] + times_only + [total_time]
    times = [0.0]
    states = [psi.copy()]
    log_norms = [0.0]
    events = []
    log_nsq = 0.0
    step_counter = 0

    for i in range(len(boundaries) - 1):
        t_a, t_b = boundaries[i], boundaries[i + 1]
        m = _segment_substeps(t_b - t_a, n_steps, total_time)
        if m > 0:
            h = (t_b - t_a) / m
            if mode == "exact":
                step = mat_exp(h_eff, -1j * h)
            else:
                step = np.eye(model.dim, dtype=complex) - 1j * h * h_eff
            chain = _iterated_states(step, psi, m)
            node_norms = np.linalg.norm(chain, axis=1)
            if node_norms[-1] < NORM_COLLAPSE_TOL:
                raise NormCollapseError(
                    f"norm collapsed to {node_norms[-1]:.3e} during the no-jump "
                    f"segment [{t_a:.6g}, {t_b:.6g}]")
            for j in range(1, m + 1):
                times.append(t_a + j * h)
                states.append(chain[j] / node_norms[j])
                log_norms.append(log_nsq + 2.0 * np.log(node_norms[j]))
            log_nsq += 2.0 * np.log(node_norms[-1])
            psi = chain[m] / node_norms[m]
            step_counter += m
        if i < len(jumps):
            t_j, channel = jumps[i]
            v = model.jump_ops[channel - 1] @ psi
            nv = np.linalg.norm(v)
            if nv < NORM_COLLAPSE_TOL:
                raise NormCollapseError(
                    f"jump at t={t_j:.6g} through channel {channel} "
                    f"({model.labels[channel - 1]}) annihilated the state (norm {nv:.3e})")
            psi = v / nv
            log_nsq += 2.0 * np.log(nv)
            events.append(JumpEvent(step_index=step_counter, time=t_j, channel=channel))
            if t_j > 0.0 and abs(times[-1] - t_j) <= 1e-9 * total_time:
                # the preceding segment ended at the jump time (up to float
                # accumulation): the stored state there is the post-jump one.
                # A jump at t=0 is the exception, slot 0 must stay the
                # configured initial state and the change shows up from the
                # next node on.
                states[-1] = psi.copy()
                log_norms[-1] = log_nsq

    return TrajectoryRecord(
        seed=None, dt=total_time / n_steps, total_time=float(total_time),
        n_steps=int(n_steps), mode=mode, prescribed=True, events=tuple(events),
        times=np.array(times), states=np.array(states),
        log_norms=np.array(log_norms), prob_residual=0.0)


# ---------------------------------------------------------------------------
# stochastic sampling


def _constant_probs(ops, h_eff):
    """Raw step probabilities if they are state-independent, else None.

    That happens exactly when every Gamma^+ Gamma and Heff^+ Heff are
    proportional to the identity (unital models with uniform damping); the
    large dephasing ensembles live here, so this path is worth having.
    Returns (raw probabilities, exact-mode no-jump squared-norm factor).
    """
    dim = h_eff.shape[0]
    eye = np.eye(dim)
    rates = []
    for w in ops.w_jump:
        gg = dagger(w) @ w  # includes the dt factor
        c = float(np.trace(gg).real) / dim
        if np.max(np.abs(gg - c * eye)) > 1e-12 * max(1.0, abs(c)):
            return None
        rates.append(c)
    hh = dagger(h_eff) @ h_eff
    q = float(np.trace(hh).real) / dim
    if np.max(np.abs(hh - q * eye)) > 1e-12 * max(1.0, abs(q)):
        return None
    raw = np.empty(1 + len(rates))
    raw[0] = 1.0 - sum(rates) + ops.dt * ops.dt * q
    raw[1:] = rates
    exact_factor = float(np.exp(-sum(rates)))  # ||exp(-i Heff dt) psi||^2
    return raw, exact_factor


def _power_cache(matrix: np.ndarray, max_steps: int):
    cache = [matrix]
    while (1 << len(cache)) <= max_steps:
        m = cache[-1]
        cache.append(m @ m)
    return cache


def _apply_power(cache, count: int, psi: np.ndarray) -> np.ndarray:
    j = 0
    while count:
        if count & 1:
            psi = cache[j] @ psi
        count >>= 1
        j += 1
    return psi


def _sample_positions(n_steps: int, stride: int | None, extra=None) -> np.ndarray:
    if stride is None:
        stride = 1 if n_steps <= FULL_STORAGE_STEPS else int(np.ceil(n_steps / FULL_STORAGE_STEPS))
    if stride < 1:
        raise ValueError("stride must be >= 1")
    pos = set(range(0, n_steps + 1, stride))
    pos.add(n_steps)
    if extra is not None:
        pos.update(int(p) for p in extra)
    return np.array(sorted(pos), dtype=int)


def run_trajectory(model: LindbladModel, psi0, total_time: float, n_steps: int,
                   seed: int, mode: str = "exact", stride: int | None = None,
                   _sample_steps=None) -> TrajectoryRecord:
    """Sample one stochastic trajectory.

    Deterministic given (seed, model, psi0, total_time, n_steps, mode): the
    per-step uniforms come from Philox seeded with ``seed`` alone.  ``stride``
    controls state storage (every step by default up to 10^5 steps); the
    initial and final states are always stored.  ``_sample_steps`` instead
    pins the exact storage grid (used by ensembles for snapshot times).

    Raises
    ------
    NormCollapseError
        If a sampled jump annihilates the state, with step and channel named.
    """
    mode = _normalize_mode(mode)
    if not total_time > 0.0:
        raise ValueError("total_time must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    psi = _checked_initial_state(model, psi0)
    dt = total_time / n_steps
    ops = step_operators(model, dt)
    h_eff = ops.h_eff
    if _sample_steps is not None:
        sample = np.unique(np.concatenate(([0, n_steps], np.asarray(_sample_steps, dtype=int))))
        if sample[0] < 0 or sample[-1] > n_steps:
            raise ValueError("sample steps outside [0, n_steps]")
    else:
        sample = _sample_positions(n_steps, stride)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    uniforms = rng.random(n_steps)

    const = _constant_probs(ops, h_eff)
    if const is not None:
        times, states, log_norms, events, resid = _run_fast(
            model, ops, h_eff, psi, dt, n_steps, mode, sample, uniforms, const)
    else:
        times, states, log_norms, events, resid = _run_generic(
            model, ops, h_eff, psi, dt, n_steps, mode, sample, uniforms)

    return TrajectoryRecord(
        seed=int(seed), dt=dt, total_time=float(total_time), n_steps=int(n_steps),
        mode=mode, prescribed=False, events=tuple(events), times=times,
        states=states, log_norms=log_norms, prob_residual=resid)


def _run_generic(model, ops, h_eff, psi, dt, n_steps, mode, sample, uniforms):
    """Per-step loop with state-dependent probabilities (any model)."""
    n_ch = model.n_channels
    u_dt = mat_exp(h_eff, -1j * dt) if mode == "exact" else None
    sample_set = set(int(s) for s in sample)
    times = [0.0]
    states = [psi.copy()]
    log_norms = [0.0]
    events = []
    log_nsq = 0.0
    max_resid = 0.0

    for m in range(n_steps):
        hv = h_eff @ psi
        gvecs = []
        raw = np.empty(1 + n_ch)
        for k, g in enumerate(model.jump_ops):
            v = g @ psi
            gvecs.append(v)
            raw[k + 1] = dt * np.vdot(v, v).real
        jump_sum = raw[1:].sum()
        if mode == "euler":
            w0psi = psi - 1j * dt * hv
            raw[0] = np.vdot(w0psi, w0psi).real
        else:
            raw[0] = 1.0 - jump_sum + dt * dt * np.vdot(hv, hv).real
        if raw[0] < -1e-12:
            raise ValueError(f"negative no-jump probability {raw[0]:.3e} at step {m}: dt too large")
        total = raw[0] + jump_sum
        resid = total - 1.0
        if abs(resid) > max_resid:
            max_resid = abs(resid)

        u = uniforms[m]
        acc = 0.0
        channel = n_ch
        for k in range(1 + n_ch):
            acc += raw[k] / total
            if u < acc:
                channel = k
                break

        if channel == 0:
            new = w0psi if mode == "euler" else u_dt @ psi
            factor = raw[0] if mode == "euler" else np.vdot(new, new).real
        else:
            new = gvecs[channel - 1]
            nv = np.sqrt(np.vdot(new, new).real)
            if nv < NORM_COLLAPSE_TOL:
                raise NormCollapseError(
                    f"jump at step {m} through channel {channel} "
                    f"({model.labels[channel - 1]}) annihilated the state (norm {nv:.3e})")
            factor = raw[channel]  # dt * ||Gamma psi||^2, the chain weight
            events.append(JumpEvent(step_index=m, time=(m + 1) * dt, channel=channel))
        nn = np.sqrt(np.vdot(new, new).real)
        psi = new / nn
        log_nsq += np.log(factor)
        if (m + 1) in sample_set:
            times.append((m + 1) * dt)
            states.append(psi.copy())
            log_norms.append(log_nsq)

    return (np.array(times), np.array(states), np.array(log_norms), events, max_resid)


def _run_fast(model, ops, h_eff, psi, dt, n_steps, mode, sample, uniforms, const):
    """Vectorized path for state-independent step probabilities."""
    raw, exact_factor = const
    total = raw.sum()
    resid = abs(total - 1.0)
    cum = np.cumsum(raw / total)
    drawn = np.searchsorted(cum, uniforms, side="right")
    drawn = np.minimum(drawn, len(raw) - 1)
    jump_steps = np.nonzero(drawn > 0)[0]
    jump_channels = drawn[jump_steps]

    if mode == "exact":
        step_m = mat_exp(h_eff, -1j * dt)
        log_f0 = float(np.log(exact_factor))
    else:
        step_m = np.eye(model.dim, dtype=complex) - 1j * dt * h_eff
        log_f0 = float(np.log(raw[0]))
    cache = _power_cache(step_m, n_steps)

    times = [0.0]
    states = [psi.copy()]
    log_norms = [0.0]
    events = []
    log_nsq = 0.0
    pos = 0
    s_idx = 1  # sample[0] == 0 already stored

    def advance_to(target, psi, log_nsq, pos, s_idx):
        # no-jump evolution from pos to target, storing sampled positions
        while s_idx < len(sample) and sample[s_idx] <= target:
            nxt = int(sample[s_idx])
            psi = _apply_power(cache, nxt - pos, psi)
            psi = psi / np.linalg.norm(psi)
            log_nsq += (nxt - pos) * log_f0
            times.append(nxt * dt)
            states.append(psi)
            log_norms.append(log_nsq)
            pos = nxt
            s_idx += 1
        if target > pos:
            psi = _apply_power(cache, target - pos, psi)
            psi = psi / np.linalg.norm(psi)
            log_nsq += (target - pos) * log_f0
            pos = target
        return psi, log_nsq, pos, s_idx

    for m, channel in zip(jump_steps, jump_channels):
        m = int(m)
        channel = int(channel)
        psi, log_nsq, pos, s_idx = advance_to(m, psi, log_nsq, pos, s_idx)
        v = model.jump_ops[channel - 1] @ psi
        nv = np.linalg.norm(v)
        if nv < NORM_COLLAPSE_TOL:
            raise NormCollapseError(
                f"jump at step {m} through channel {channel} "
                f"({model.labels[channel - 1]}) annihilated the state (norm {nv:.3e})")
        psi = v / nv
        log_nsq += float(np.log(raw[channel]))
        pos = m + 1
        events.append(JumpEvent(step_index=m, time=(m + 1) * dt, channel=channel))
        if s_idx < len(sample) and sample[s_idx] == pos:
            times.append(pos * dt)
            states.append(psi.copy())
            log_norms.append(log_nsq)
            s_idx += 1
    psi, log_nsq, pos, s_idx = advance_to(n_steps, psi, log_nsq, pos, s_idx)

    return (np.array(times), np.array(states), np.array(log_norms), events, resid)


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class TrajectorySummary:
    """Per-trajectory row of an ensemble run."""

    trajectory_id: int
    seed: int
    n_jumps: int
    jump_times: tuple
    jump_channels: tuple
    final_norm: float
    phases: object  # PhaseBreakdown or None
    status: str


@dataclass(frozen=True)
class EnsembleResult:
    """Seeded ensemble: averaged density snapshots plus per-trajectory rows.

    ``snapshots[i]`` is the average projector over normalized trajectory
    states at ``snapshot_times[i]`` (trace exactly 1 by construction, since
    sampling frequency already carries the path weights).  When requested,
    ``projector_stack`` keeps the per-trajectory projectors, shape
    (n_traj, n_times, dim, dim), for subset convergence studies.
    """

    n_traj: int
    base_seed: int
    mode: str
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    trajectories: tuple
    projector_stack: np.ndarray | None = None

    def __post_init__(self):
        self.snapshot_times.setflags(write=False)
        self.snapshots.setflags(write=False)
        if self.projector_stack is not None:
            self.projector_stack.setflags(write=False)


def resolve_workers(workers: int | None, n_tasks: int) -> int:
    """Explicit argument, else the JUMPPHASE_THREADS environment cap, else 1."""
    if workers is None:
        env = os.environ.get("JUMPPHASE_THREADS", "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ValueError(f"JUMPPHASE_THREADS={env!r} is not an integer")
        else:
            workers = 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return min(workers, max(1, n_tasks))


def _ensemble_chunk(args):
    (h, gs, labels, psi0, total_time, n_steps, mode, base_seed,
     j_start, j_stop, snapshot_steps, compute_phases, n_quad) = args
    model = LindbladModel(hamiltonian=h, jump_ops=tuple(gs), labels=labels)
    if compute_phases:
        from .phase import PhaseUndefinedError, trajectory_phase
    n_snap = len(snapshot_steps)
    dim = model.dim
    stack = np.empty((j_stop - j_start, n_snap, dim, dim), dtype=complex)
    rows = []
    for j in range(j_start, j_stop):
        seed = trajectory_seed(base_seed, j)
        try:
            rec = run_trajectory(model, psi0, total_time, n_steps, seed,
                                 mode=mode, _sample_steps=snapshot_steps)
        except NormCollapseError as err:
            raise NormCollapseError(f"trajectory {j}: {err}") from err
        positions = np.rint(rec.times / rec.dt).astype(int)
        idx = np.searchsorted(positions, snapshot_steps)
        sel = rec.states[idx]
        stack[j - j_start] = sel[:, :, None] * sel[:, None, :].conj()
        phases = None
        status = "ok"
        if compute_phases:
            try:
                phases = trajectory_phase(rec, model, n_quad=n_quad)
            except PhaseUndefinedError as err:
                status = f"phase-undefined: {err}"
        rows.append(TrajectorySummary(
            trajectory_id=j, seed=seed, n_jumps=rec.n_jumps,
            jump_times=tuple(float(t) for t in rec.jump_times),
            jump_channels=tuple(int(c) for c in rec.jump_channels),
            final_norm=rec.final_norm, phases=phases, status=status))
    return stack, rows


def run_ensemble(model: LindbladModel, psi0, total_time: float, n_steps: int,
                 n_traj: int, base_seed: int, snapshot_times=(),
                 mode: str = "exact", workers: int | None = None,
                 compute_phases: bool = False, n_quad: int | None = None,
                 retain_projectors: bool = False) -> EnsembleResult:
    """Run ``n_traj`` independent trajectories and average their projectors.

    Trajectory j is seeded by ``trajectory_seed(base_seed, j)``, so the result
    is identical for any worker count; the snapshot reduction concatenates
    per-trajectory projectors in index order before a single sum, which keeps
    even the floating-point rounding independent of the chunking.

    ``snapshot_times`` must lie on the step grid.  Phase computation is off by
    default (ensemble comparisons only need the density snapshots); with
    ``compute_phases=True``, per-trajectory undefined-phase conditions are
    recorded in the row status instead of aborting the run.
    """
    mode = _normalize_mode(mode)
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    psi = _checked_initial_state(model, psi0)
    dt = total_time / n_steps
    snapshot_times = np.asarray(list(snapshot_times), dtype=float)
    snapshot_steps = np.array([], dtype=int)
    if snapshot_times.size:
        snapshot_steps = np.rint(snapshot_times / dt).astype(int)
        if np.max(np.abs(snapshot_steps * dt - snapshot_times)) > 1e-9 * total_time:
            raise ValueError("snapshot times must lie on the step grid n*dt")
        if snapshot_steps.min() < 0 or snapshot_steps.max() > n_steps:
            raise ValueError("snapshot times outside [0, total_time]")
    n_workers = resolve_workers(workers, n_traj)

    bounds = np.linspace(0, n_traj, n_workers + 1).astype(int)
    tasks = [(model.hamiltonian, model.jump_ops, model.labels, psi, total_time,
              n_steps, mode, int(base_seed), int(a), int(b), snapshot_steps,
              compute_phases, n_quad)
             for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    if n_workers == 1:
        results = [_ensemble_chunk(tasks[0])]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_ensemble_chunk, tasks))

    stack = np.concatenate([r[0] for r in results], axis=0)
    rows = tuple(row for r in results for row in r[1])
    # order-stable reduction: one pairwise sum over the id-ordered stack
    snaps = stack.sum(axis=0) / n_traj
    return EnsembleResult(
        n_traj=int(n_traj), base_seed=int(base_seed), mode=mode,
        snapshot_times=snapshot_steps * dt, snapshots=snaps, trajectories=rows,
        projector_stack=stack if retain_projectors else None)
