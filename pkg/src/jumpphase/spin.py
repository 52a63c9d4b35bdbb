"""Spin-1/2 presets and geometric oracles.

Conventions: basis index 0 is the excited state at +z, index 1 the ground
state at -z, so sigma_- = |1><0| lowers the excited state and its no-jump
drift pulls the Bloch vector toward the south pole.  The initial state is
psi0 = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>, whose Bloch vector is
(sin theta cos phi, sin theta sin phi, cos theta).

The oracles here are deliberately independent of the generic pipeline: the
dephasing value pi(1-cos theta) is a formula, the decay reference propagates
a hand-solved diagonal evolution, and the solid-angle routine reduces paths
to spherical polygon areas so phases can be cross-checked against half the
enclosed area.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import SIGMA_MINUS, SIGMA_X, SIGMA_Y, SIGMA_Z
from .model import LindbladModel
from .trajectory import TrajectoryRecord

log = logging.getLogger(__name__)

PRESETS = ("dephasing", "decay", "dephasing+decay", "spinflip")


@dataclass(frozen=True)
class SpinHalfConfig:
    """Parameters of the H = (omega/2) sigma_z family of models.

    ``lambda_dephase`` multiplies sigma_z (jump rate lambda^2),
    ``alpha_decay`` multiplies sigma_- (decay rate alpha^2), and
    ``flip_axis``/``flip_strength`` define an optional sigma_n flip channel.
    theta/phi fix the initial state.
    """

    omega: float = 1.0
    lambda_dephase: float = 0.0
    alpha_decay: float = 0.0
    flip_axis: tuple | None = None
    flip_strength: float = 1.0
    theta: float = np.pi / 3
    phi: float = 0.0

    def __post_init__(self):
        if self.lambda_dephase < 0 or self.alpha_decay < 0:
            raise ValueError("coupling strengths must be non-negative")
        if self.flip_axis is not None:
            axis = tuple(float(a) for a in self.flip_axis)
            if len(axis) != 3:
                raise ValueError("flip_axis must be a 3-vector")
            if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
                raise ValueError("flip_axis must have unit norm within 1e-12")
            object.__setattr__(self, "flip_axis", axis)
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta = {self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2.0 * np.pi:
            raise ValueError(f"phi = {self.phi} outside [0, 2 pi)")

    @property
    def period(self) -> float:
        """One precession period 2 pi / omega."""
        if self.omega == 0.0:
            raise ValueError("period undefined for omega = 0")
        return 2.0 * np.pi / self.omega


def preset(name: str, **overrides) -> SpinHalfConfig:
    """Named configurations; keyword overrides win over the preset values.

    dephasing        lambda^2 = 0.1 omega
    decay            alpha = 0.05
    dephasing+decay  both of the above
    spinflip         sigma_x channel with unit strength
    """
    base = {
        "dephasing": dict(lambda_dephase=np.sqrt(0.1)),
        "decay": dict(alpha_decay=0.05),
        "dephasing+decay": dict(lambda_dephase=np.sqrt(0.1), alpha_decay=0.05),
        "spinflip": dict(flip_axis=(1.0, 0.0, 0.0), flip_strength=1.0),
    }
    if name not in base:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    params = dict(base[name])
    params.update(overrides)
    return SpinHalfConfig(**params)


def sigma_axis(axis) -> np.ndarray:
    """n . sigma for a unit 3-vector n."""
    n = np.asarray(axis, dtype=float)
    return n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z


def build_model(cfg: SpinHalfConfig) -> LindbladModel:
    """Assemble the LindbladModel: channels in the order dephase, decay, flip."""
    h = 0.5 * cfg.omega * SIGMA_Z
    ops = []
    labels = []
    if cfg.lambda_dephase > 0:
        ops.append(cfg.lambda_dephase * SIGMA_Z)
        labels.append("dephase")
    if cfg.alpha_decay > 0:
        ops.append(cfg.alpha_decay * SIGMA_MINUS)
        labels.append("decay")
    if cfg.flip_axis is not None:
        ops.append(cfg.flip_strength * sigma_axis(cfg.flip_axis))
        labels.append("flip")
    if not ops and cfg.omega == 0.0:
        log.warning("degenerate model: H = 0 and no jump channels")
    return LindbladModel(hamiltonian=h, jump_ops=tuple(ops), labels=tuple(labels))


def initial_state(cfg: SpinHalfConfig) -> np.ndarray:
    return np.array([np.cos(0.5 * cfg.theta),
                     np.exp(1j * cfg.phi) * np.sin(0.5 * cfg.theta)], dtype=complex)


def bloch_from_state(psi) -> tuple:
    """(<sigma_x>, <sigma_y>, <sigma_z>) of a (renormalized) qubit state."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2,):
        raise ValueError("Bloch mapping requires dimension 2")
    nsq = np.vdot(psi, psi).real
    a, b = psi
    xy = 2.0 * (np.conj(a) * b) / nsq
    z = (abs(a) ** 2 - abs(b) ** 2) / nsq
    return (float(xy.real), float(xy.imag), float(z))


@dataclass(frozen=True)
class BlochPath:
    """Time-stamped path on (or inside) the unit sphere."""

    times: np.ndarray
    points: np.ndarray  # shape (n, 3)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.points.setflags(write=False)
        if len(self.times) != len(self.points):
            raise ValueError("times and points lengths differ")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("path times must be strictly increasing")
        r = np.linalg.norm(self.points, axis=1)
        if np.any(r > 1.0 + 1e-9):
            raise ValueError("path points leave the unit ball")


def bloch_path_from_record(record: TrajectoryRecord) -> BlochPath:
    if record.states.shape[1] != 2:
        raise ValueError("Bloch export requires dimension 2")
    pts = np.array([bloch_from_state(s) for s in record.states])
    return BlochPath(times=record.times.copy(), points=pts)


def solid_angle(path, close_geodesically: bool = True) -> float:
    """Signed spherical area enclosed by a path of Bloch points.

    The polygon through the (radially projected) samples is fanned into
    spherical triangles from the first vertex, and the signed excesses are
    summed; a counterclockwise circuit seen from outside the enclosed region
    is positive (the +z,+x,+y octant corner gives +pi/2).  The fan implicitly
    closes the polygon with the shortest geodesic from the last sample back
    to the first, which is the requested behavior when
    ``close_geodesically`` is set; otherwise the path must already return to
    its start.

    A closed spherical curve only pins down its signed area modulo 4*pi
    (the two sides of the curve differ by the full sphere).  The fan result
    agrees with the intuitive enclosed area modulo 4*pi; for a simple
    circuit it lands in (-2*pi, 2*pi], so a cap larger than a hemisphere
    comes back as the negatively oriented complement cap.  Geometric phases
    are half-areas compared modulo 2*pi, so the ambiguity drops out of
    every phase check.

    Raises
    ------
    ValueError
        For fewer than 3 samples, for consecutive samples that are antipodal
        (ambiguous geodesic), or for an antipodal closure.  A path that does
        not end near its start with ``close_geodesically=False`` is also
        rejected.
    """
    pts = path.points if isinstance(path, BlochPath) else np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise ValueError("need at least 3 samples of shape (n, 3)")
    r = np.linalg.norm(pts, axis=1)
    if np.any(r < 1e-12):
        raise ValueError("cannot project a zero Bloch vector to the sphere")
    v = pts / r[:, None]
    dots = np.einsum("ij,ij->i", v[:-1], v[1:])
    if np.any(dots <= -1.0 + 1e-12):
        raise ValueError("consecutive path points are antipodal; solid angle ambiguous")
    closing = float(v[-1] @ v[0])
    if closing <= -1.0 + 1e-12:
        raise ValueError("antipodal closure: shortest geodesic is ambiguous")
    if not close_geodesically and closing < 1.0 - 1e-6:
        raise ValueError("path does not return to its start and geodesic closure was disabled")
    a = v[0]
    b = v[1:-1]
    c = v[2:]
    triple = np.einsum("j,ij->i", a, np.cross(b, c))
    denom = 1.0 + (b @ a) + np.einsum("ij,ij->i", b, c) + (c @ a)
    return float(2.0 * np.arctan2(triple, denom).sum())


def dephasing_phase(theta: float) -> float:
    """pi(1-cos theta): the jump-count-independent value over one period."""
    if not 0.0 <= theta <= np.pi:
        raise ValueError(f"theta = {theta} outside [0, pi]")
    return float(np.pi * (1.0 - np.cos(theta)))


def decay_no_jump_reference(cfg: SpinHalfConfig, total_time: float,
                            n_quad: int = 40960) -> float:
    """High-accuracy decay-model no-jump geometric phase, independently coded.

    For H = (omega/2) sigma_z with the single channel alpha sigma_-, the
    effective Hamiltonian is diagonal and the no-jump state is known in
    closed form:

        psi(t) = (c e^{-i omega t/2} e^{-alpha^2 t/2},  s e^{i phi} e^{+i omega t/2})

    This routine evaluates the energy integral of that solution by composite
    Simpson quadrature with ``n_quad`` intervals (10 times the generic
    pipeline's default) and assembles
    gamma = -integral + arg<psi(T)|psi(0)>.  It shares no propagation code
    with the trajectory modules, which is what makes it usable as an oracle.
    """
    if cfg.alpha_decay <= 0 or cfg.lambda_dephase != 0 or cfg.flip_axis is not None:
        raise ValueError("reference is defined for the pure decay model (alpha > 0 only)")
    if not total_time > 0:
        raise ValueError("total_time must be positive")
    n = int(n_quad)
    if n < 2:
        raise ValueError("n_quad must be >= 2")
    if n % 2:
        n += 1
    rate = cfg.alpha_decay ** 2
    c2 = np.cos(0.5 * cfg.theta) ** 2
    s2 = np.sin(0.5 * cfg.theta) ** 2
    t = np.linspace(0.0, total_time, n + 1)
    pe = c2 * np.exp(-rate * t)
    f = 0.5 * cfg.omega * (pe - s2) / (pe + s2)
    h = total_time / n
    integral = (h / 3.0) * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-2:2].sum())
    z = (c2 * np.exp(-0.5 * rate * total_time) * np.exp(0.5j * cfg.omega * total_time)
         + s2 * np.exp(-0.5j * cfg.omega * total_time))
    if abs(z) < 1e-9:
        raise ValueError("closure overlap vanished; reference phase undefined")
    return float(-integral + np.angle(z))


@dataclass(frozen=True)
class AreaDecomposition:
    """Per-lobe signed solid angles of a jump-segmented Bloch path."""

    segment_areas: tuple
    signed_sum: float
    half_sum: float


def flip_partial_areas(record: TrajectoryRecord) -> AreaDecomposition:
    """Split the Bloch path at the jump times and add up the lobe areas.

    Each lobe is closed with the shortest geodesic back to its first point;
    the signed sum over lobes, halved, is the area prediction for the
    geometric phase (mod 2 pi).  Lobes with fewer than 3 stored samples
    contribute zero.  The stored sample at a jump time is the post-jump
    state, so it opens the following lobe.
    """
    path = bloch_path_from_record(record)
    cuts = [e.time for e in record.events]
    edges = np.searchsorted(path.times, cuts)
    areas = []
    start = 0
    for edge in list(edges) + [len(path.times)]:
        pts = path.points[start:edge]
        areas.append(solid_angle(pts) if len(pts) >= 3 else 0.0)
        start = edge
    total = float(sum(areas))
    return AreaDecomposition(segment_areas=tuple(areas), signed_sum=total,
                             half_sum=0.5 * total)
