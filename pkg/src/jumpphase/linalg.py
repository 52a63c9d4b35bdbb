"""Small dense linear-algebra helpers shared across the package.

Everything operates on plain numpy arrays with dtype complex128.  States are
1-D vectors, operators are square 2-D matrices.  The inner product follows the
physics convention: the first argument is conjugated.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def as_state(vec) -> np.ndarray:
    """Coerce ``vec`` to a 1-D complex128 array (copy).

    Raises
    ------
    ValueError
        If the input is not one-dimensional or has zero length.
    """
    arr = np.array(vec, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"state must be a nonempty 1-D vector, got shape {arr.shape}")
    return arr


def as_operator(mat, dim: int | None = None) -> np.ndarray:
    """Coerce ``mat`` to a square complex128 matrix, optionally checking its size."""
    arr = np.array(mat, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"operator must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"operator has dimension {arr.shape[0]}, expected {dim}")
    return arr


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """<a|b> with the first argument conjugated.

    Raises
    ------
    ValueError
        If the vectors have different lengths.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def norm(psi: np.ndarray) -> float:
    return float(np.linalg.norm(psi))


def normalize(psi: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Return psi / ||psi||.

    Raises
    ------
    ValueError
        If the norm is at or below ``tol``; normalizing a collapsed vector
        silently would mask an upstream problem.
    """
    n = np.linalg.norm(psi)
    if n <= tol:
        raise ValueError(f"cannot normalize state with norm {n:.3e}")
    return psi / n


def expectation(op: np.ndarray, psi: np.ndarray) -> complex:
    """<psi|op|psi> / <psi|psi>.

    The ratio makes the result independent of the state's normalization, so
    unnormalized vectors from damped evolution can be used directly.  Hermitian
    ``op`` gives a real result up to rounding; take ``.real`` at the call site.
    """
    op = np.asarray(op)
    psi = np.asarray(psi)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    if op.shape[0] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: operator {op.shape[0]}, state {psi.shape[0]}")
    nsq = np.vdot(psi, psi).real
    if nsq <= 0.0:
        raise ValueError("expectation undefined for the zero vector")
    return complex(np.vdot(psi, op @ psi) / nsq)


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def _exp_2x2(a: np.ndarray) -> np.ndarray:
    # exp(alpha*I + B) = e^alpha (cosh(mu) I + sinh(mu)/mu * B) for traceless
    # B with mu^2 = -det(B).  Exact for any 2x2 matrix, Hermitian or not;
    # subsumes the Pauli identity exp(-i t n.sigma) = cos t - i sin t n.sigma.
    alpha = 0.5 * (a[0, 0] + a[1, 1])
    b = a - alpha * IDENTITY2
    mu2 = b[0, 1] * b[1, 0] - b[0, 0] * b[1, 1]
    mu = np.sqrt(mu2)
    if abs(mu) < 1e-6:
        # series for cosh(mu) and sinh(mu)/mu; truncation error ~1e-38 here
        sinhc = 1.0 + mu2 / 6.0 + mu2 * mu2 / 120.0
        cosh = 1.0 + mu2 / 2.0 + mu2 * mu2 / 24.0
    else:
        sinhc = np.sinh(mu) / mu
        cosh = np.cosh(mu)
    return np.exp(alpha) * (cosh * IDENTITY2 + sinhc * b)


def mat_exp(m: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * m) for a square matrix.

    A closed form handles 2x2 input (the common case here); anything larger
    falls back to scipy's scaling-and-squaring Pade implementation.

    Raises
    ------
    ValueError
        If ``m`` is not square.
    """
    a = as_operator(m) * scale
    if a.shape == (2, 2):
        return _exp_2x2(a)
    return scipy.linalg.expm(a)


def complex_to_pair(z: complex) -> list[float]:
    """[re, im] encoding used in JSON output."""
    return [float(np.real(z)), float(np.imag(z))]


def array_to_pairs(arr: np.ndarray) -> list:
    """Nested [re, im] encoding of a complex array, row-major."""
    arr = np.asarray(arr)
    if arr.ndim == 0:
        return complex_to_pair(complex(arr))
    return [array_to_pairs(sub) for sub in arr]


def pairs_to_array(data) -> np.ndarray:
    """Inverse of :func:`array_to_pairs`."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValueError("expected nested [re, im] pairs")
    return (arr[..., 0] + 1j * arr[..., 1]).astype(complex)
