"""Open-system model definition and discrete step operators.

A :class:`LindbladModel` bundles a Hermitian Hamiltonian H with a list of jump
operators Gamma_k.  The master equation

    drho/dt = -i[H, rho] - (1/2) sum_k {G_k^+ G_k rho + rho G_k^+ G_k - 2 G_k rho G_k^+}

is unraveled into discrete steps with one no-jump operator and one operator
per channel,

    W_0 = 1 - i Heff dt,      W_k = sqrt(dt) Gamma_k,

where Heff = H - (i/2) sum_k Gamma_k^+ Gamma_k.  The set {W_0, W_k} satisfies
sum W^+ W = 1 + dt^2 Heff^+ Heff, so the completeness defect shrinks as dt^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import IDENTITY2, as_operator, dagger  # noqa: F401  (IDENTITY2 re-exported for presets)

HERMITICITY_TOL = 1e-10


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus ordered jump operators, immutable after construction.

    Parameters
    ----------
    hamiltonian : array_like
        Hermitian matrix in units of angular frequency (hbar = 1).
    jump_ops : sequence of array_like
        Jump operators, each carrying units of sqrt(rate).  May be empty
        (closed system).
    labels : sequence of str, optional
        One name per channel, used in output tables.  Defaults to op1, op2, ...
    """

    hamiltonian: np.ndarray
    jump_ops: tuple = ()
    labels: tuple = None

    def __post_init__(self):
        h = as_operator(self.hamiltonian)
        if np.max(np.abs(h - dagger(h))) > HERMITICITY_TOL:
            raise ValueError("hamiltonian is not Hermitian within 1e-10")
        ops = tuple(as_operator(g, dim=h.shape[0]) for g in self.jump_ops)
        labels = self.labels
        if labels is None:
            labels = tuple(f"op{k + 1}" for k in range(len(ops)))
        else:
            labels = tuple(str(s) for s in labels)
            if len(labels) != len(ops):
                raise ValueError(f"{len(labels)} labels for {len(ops)} jump operators")
        h.setflags(write=False)
        for g in ops:
            g.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", ops)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.jump_ops)


def effective_hamiltonian(model: LindbladModel) -> np.ndarray:
    """Heff = H - (i/2) sum_k Gamma_k^+ Gamma_k (non-Hermitian for open systems)."""
    h = model.hamiltonian.astype(complex)
    acc = np.zeros_like(h)
    for g in model.jump_ops:
        acc += dagger(g) @ g
    return h - 0.5j * acc


@dataclass(frozen=True)
class StepOperators:
    """The discrete operator set {W_0, W_k} at a fixed time step.

    ``completeness_residual`` is the max-norm of sum_k W_k^+ W_k - 1, which
    equals dt^2 * max|Heff^+ Heff| by construction and is recorded so callers
    can verify the dt^2 scaling without recomputing.
    """

    dt: float
    w0: np.ndarray
    w_jump: tuple
    h_eff: np.ndarray
    completeness_residual: float = field(default=0.0)

    def __post_init__(self):
        for arr in (self.w0, self.h_eff, *self.w_jump):
            arr.setflags(write=False)

    @property
    def n_channels(self) -> int:
        return len(self.w_jump)


def step_operators(model: LindbladModel, dt: float) -> StepOperators:
    """Build W_0 = 1 - i*Heff*dt and W_k = sqrt(dt)*Gamma_k.

    Raises
    ------
    ValueError
        If dt <= 0.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    h_eff = effective_hamiltonian(model)
    eye = np.eye(model.dim, dtype=complex)
    w0 = eye - 1j * h_eff * dt
    w_jump = tuple(np.sqrt(dt) * g for g in model.jump_ops)
    total = dagger(w0) @ w0
    for w in w_jump:
        total = total + dagger(w) @ w
    residual = float(np.max(np.abs(total - eye)))
    return StepOperators(dt=float(dt), w0=w0, w_jump=w_jump, h_eff=h_eff,
                         completeness_residual=residual)


def is_unital(model: LindbladModel, tol: float = 1e-10):
    """Check whether sum_k Gamma_k^+ Gamma_k is proportional to the identity.

    When it is, the no-jump evolution is a uniformly damped unitary and the
    identity matrix is a fixed point of the map.  Returns ``(flag, c)`` where
    c = trace(sum Gamma^+ Gamma) / dim is the proportionality constant (the
    total rate), reported whether or not the flag is true.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    acc = np.zeros((model.dim, model.dim), dtype=complex)
    for g in model.jump_ops:
        acc += dagger(g) @ g
    c = float(np.trace(acc).real) / model.dim
    flag = bool(np.max(np.abs(acc - c * np.eye(model.dim))) <= tol)
    return flag, c


def jump_probabilities(ops: StepOperators, psi: np.ndarray, norm_tol: float = 1e-9):
    """Per-step channel probabilities for a normalized state.

    Returns ``(probs, residual)``: ``probs[0]`` is the no-jump probability
    ||W_0 psi||^2 and ``probs[k]`` = ||W_k psi||^2 = dt <psi|G_k^+ G_k|psi>,
    renormalized to sum exactly to 1 for sampling.  ``residual`` is the raw
    sum minus 1, an O(dt^2) discretization diagnostic that the caller should
    log rather than discard.

    Raises
    ------
    ValueError
        If psi is not normalized within ``norm_tol``, or any raw probability
        is below -1e-12 (which signals an invalid model or too-large dt; with
        exact arithmetic every p_k is a squared norm and cannot be negative).
    """
    psi = np.asarray(psi, dtype=complex)
    nsq = np.vdot(psi, psi).real
    if abs(nsq - 1.0) > norm_tol:
        raise ValueError(f"state norm^2 = {nsq:.12g}, not normalized within {norm_tol}")
    raw = np.empty(1 + ops.n_channels)
    raw[0] = np.vdot(ops.w0 @ psi, ops.w0 @ psi).real
    for k, w in enumerate(ops.w_jump):
        v = w @ psi
        raw[k + 1] = np.vdot(v, v).real
    if np.any(raw < -1e-12):
        raise ValueError(f"negative jump probability {raw.min():.3e}: dt too large or model invalid")
    np.clip(raw, 0.0, None, out=raw)
    total = raw.sum()
    return raw / total, float(total - 1.0)
