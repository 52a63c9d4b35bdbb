"""Direct density-matrix integration, the reference the ensembles must match.

The generator is trace-free, so fixed-step RK4 conserves the trace to solver
rounding; Hermiticity is re-symmetrized every step, while positivity is only
monitored (a genuine violation signals a too-large step and must surface, not
be clipped away).
"""

from __future__ import annotations

import numpy as np

from .linalg import dagger
from .model import LindbladModel

HERM_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8


def check_density(rho, trace_tol: float = TRACE_TOL,
                  positivity_tol: float = POSITIVITY_TOL) -> np.ndarray:
    """Validate a density matrix; returns it as a complex array.

    Raises
    ------
    ValueError
        If rho is not square Hermitian within 1e-10, unit trace within
        ``trace_tol``, or has an eigenvalue below -``positivity_tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - dagger(rho))) > HERM_TOL:
        raise ValueError("density matrix is not Hermitian within 1e-10")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr:.12g} differs from 1 beyond {trace_tol}")
    lo = float(np.linalg.eigvalsh(rho).min())
    if lo < -positivity_tol:
        raise ValueError(f"density matrix has eigenvalue {lo:.3e} below -{positivity_tol}")
    return rho


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """-i[H, rho] - (1/2) sum_k {G^+G rho + rho G^+G - 2 G rho G^+}."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for g in model.jump_ops:
        gdg = dagger(g) @ g
        out += g @ rho @ dagger(g) - 0.5 * (gdg @ rho + rho @ gdg)
    return out


def integrate(model: LindbladModel, rho0, total_time: float, n_steps: int,
              snapshot_times=(0.0, None)):
    """Fixed-step RK4 integration of the master equation.

    ``snapshot_times`` must lie on the step grid; ``None`` in the tuple is
    shorthand for the final time.  Returns (times, stack of density matrices).

    Raises
    ------
    RuntimeError
        If the trace drifts beyond 1e-9 anywhere, or any snapshot develops an
        eigenvalue below -1e-6 (both signal a too-large step).
    """
    if not total_time > 0.0:
        raise ValueError("total_time must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rho = check_density(rho0)
    if rho.shape[0] != model.dim:
        raise ValueError(f"density matrix dim {rho.shape[0]} != model dim {model.dim}")
    dt = total_time / n_steps
    times = np.array([total_time if t is None else float(t) for t in snapshot_times])
    snap_steps = np.rint(times / dt).astype(int)
    if np.max(np.abs(snap_steps * dt - times)) > 1e-9 * total_time:
        raise ValueError("snapshot times must lie on the step grid n*dt")
    if snap_steps.min() < 0 or snap_steps.max() > n_steps:
        raise ValueError("snapshot times outside [0, total_time]")

    wanted = {}
    for i, s in enumerate(snap_steps):
        wanted.setdefault(int(s), []).append(i)
    out = np.empty((len(times), model.dim, model.dim), dtype=complex)

    def record(step, rho):
        for i in wanted.get(step, ()):
            lo = float(np.linalg.eigvalsh(rho).min())
            if lo < -1e-6:
                raise RuntimeError(
                    f"positivity violated at t={step * dt:.6g} (eigenvalue {lo:.3e}); "
                    f"reduce the integration step")
            out[i] = rho

    record(0, rho)
    for m in range(n_steps):
        k1 = lindblad_rhs(model, rho)
        k2 = lindblad_rhs(model, rho + 0.5 * dt * k1)
        k3 = lindblad_rhs(model, rho + 0.5 * dt * k2)
        k4 = lindblad_rhs(model, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + dagger(rho))
        drift = abs(np.trace(rho).real - 1.0)
        if drift > TRACE_TOL:
            raise RuntimeError(f"trace drifted by {drift:.3e} at step {m + 1}")
        record(m + 1, rho)
    return times, out


def trace_distance(rho_a, rho_b) -> float:
    """(1/2) ||rho_a - rho_b||_1 via the eigenvalues of the Hermitian difference."""
    diff = np.asarray(rho_a, dtype=complex) - np.asarray(rho_b, dtype=complex)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + dagger(diff)))).sum())


def compare_ensemble(master_times, master_snaps, ensemble) -> np.ndarray:
    """Trace distance per snapshot between the RK4 reference and an ensemble.

    Raises
    ------
    ValueError
        If the two snapshot time grids do not coincide.
    """
    master_times = np.asarray(master_times, dtype=float)
    ens_times = ensemble.snapshot_times
    if master_times.shape != ens_times.shape or np.max(
            np.abs(master_times - ens_times)) > 1e-9 * max(1.0, float(master_times.max(initial=0.0))):
        raise ValueError("snapshot time grids differ between master and ensemble")
    return np.array([trace_distance(a, b)
                     for a, b in zip(master_snaps, ensemble.snapshots)])
