"""Dense complex linear algebra for small Hilbert spaces.

Everything downstream runs on spaces of dimension 16 or below, so the
solvers here favour determinism over asymptotic speed.  The Hermitian
eigensolver is a cyclic complex Jacobi iteration with a fixed sweep
order and a fixed eigenvector gauge, which makes every decomposition
reproducible bit for bit across runs and across the numba/numpy
backends.  ``numpy.linalg.eigh`` would be faster on large matrices but
its eigenvector phases are LAPACK-implementation details; it is used
only as an independent oracle in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import njit_or_python
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    NotHermitianError,
    WrongDimensionError,
)

#: Largest matrix the dense solvers accept (system x detector worst case).
MAX_DIM = 16

#: Default absolute scale-relative tolerance for Hermiticity checks.
HERMITICITY_TOL = 1e-12

#: Off-diagonal convergence target for the Jacobi sweep, relative to the
#: Frobenius norm of the input.
_JACOBI_TOL = 1e-14

_MAX_SWEEPS = 60


def as_complex_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a square, C-contiguous complex128 array.

    Raises :class:`WrongDimensionError` if the input is not a square
    2-D array of dimension at least 1 and at most :data:`MAX_DIM`.
    """
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise WrongDimensionError(f"{name} must be square 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[0] > MAX_DIM:
        raise WrongDimensionError(
            f"{name} dimension {a.shape[0]} outside supported range 1..{MAX_DIM}"
        )
    return np.ascontiguousarray(a, dtype=np.complex128)


def require_hermitian(m, tol: float = HERMITICITY_TOL, name: str = "matrix") -> np.ndarray:
    """Validate Hermiticity and return the coerced matrix.

    The deviation ``max|m - m^H|`` is compared against ``tol`` scaled by
    ``max(1, max|m|)`` so the check is meaningful for both tiny and
    order-unity operators.
    """
    a = as_complex_matrix(m, name)
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    deviation = float(np.max(np.abs(a - a.conj().T)))
    if deviation > tol * scale:
        raise NotHermitianError(
            f"{name} deviates from Hermiticity by {deviation:.3e}"
            f" (tolerance {tol * scale:.3e})"
        )
    return a


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    ``values`` are real and ascending; ``vectors`` holds the matching
    eigenvectors as columns, unitary as a matrix, each gauged so its
    largest-magnitude component is real and positive.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Return ``V diag(values) V^H``."""
        return (self.vectors * self.values) @ self.vectors.conj().T


@njit_or_python(cache=True)
def _jacobi_cycles(a, v, tol, max_sweeps):  # pragma: no cover - thin jit body
    """Cyclic complex Jacobi diagonalization, in place.

    ``a`` is destroyed (driven to diagonal), ``v`` accumulates the
    rotations.  Returns the number of sweeps used, or -1 when the
    off-diagonal norm failed to reach ``tol``.
    """
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += abs(a[p, q]) ** 2
        if np.sqrt(off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                # Unitary phase that makes the (p, q) element real, then a
                # real Givens rotation that kills it.
                u = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                uc = np.conj(u)
                # Columns p and q of a and v: right-multiply by J where
                # J[p,p]=c, J[p,q]=s, J[q,p]=-s*conj(u), J[q,q]=c*conj(u).
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * uc * aiq
                    a[i, q] = s * aip + c * uc * aiq
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * uc * viq
                    v[i, q] = s * vip + c * uc * viq
                # Rows p and q: left-multiply by J^H.
                for j in range(n):
                    apj = a[p, j]
                    aqj = a[q, j]
                    a[p, j] = c * apj - s * u * aqj
                    a[q, j] = s * apj + c * u * aqj
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = complex(a[p, p].real, 0.0)
                a[q, q] = complex(a[q, q].real, 0.0)
    return -1


def hermitian_eig(h, tol: float = HERMITICITY_TOL) -> HermitianEig:
    """Eigendecompose a Hermitian matrix deterministically.

    The input must be Hermitian within ``tol`` (scale relative).  The
    result satisfies ``V diag(w) V^H == h`` to roughly 1e-13 times the
    matrix scale, with eigenvalues ascending and a fixed per-column
    phase gauge: the component of largest magnitude (lowest index on
    ties) is rotated onto the positive real axis.
    """
    m = require_hermitian(h, tol)
    n = m.shape[0]
    # Work on the Hermitian average so the iteration sees an exactly
    # Hermitian operand regardless of roundoff in the input.
    a = 0.5 * (m + m.conj().T)
    v = np.eye(n, dtype=np.complex128)
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return HermitianEig(values=np.zeros(n), vectors=v)
    sweeps = _jacobi_cycles(a, v, _JACOBI_TOL * scale, _MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi iteration did not converge in {_MAX_SWEEPS} sweeps (dim {n})"
        )
    values = np.diag(a).real.copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    pivot_rows = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[pivot_rows, np.arange(n)]
    phases = pivots / np.abs(pivots)
    vectors = vectors * phases.conj()[np.newaxis, :]
    return HermitianEig(values=values, vectors=np.ascontiguousarray(vectors))


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product of two operators, first factor slowest.

    Both operands must be square; the product dimension must stay
    within :data:`MAX_DIM`.
    """
    am = np.asarray(a, dtype=np.complex128)
    bm = np.asarray(b, dtype=np.complex128)
    if am.ndim != 2 or am.shape[0] != am.shape[1]:
        raise WrongDimensionError(f"first factor must be square 2-D, got {am.shape}")
    if bm.ndim != 2 or bm.shape[0] != bm.shape[1]:
        raise WrongDimensionError(f"second factor must be square 2-D, got {bm.shape}")
    if am.shape[0] * bm.shape[0] > MAX_DIM:
        raise DimensionMismatchError(
            f"product dimension {am.shape[0] * bm.shape[0]} exceeds {MAX_DIM}"
        )
    return np.kron(am, bm)


def expm_hermitian(h, t: float) -> np.ndarray:
    """Unitary ``exp(-i t h)`` for Hermitian ``h``.

    Built on :func:`hermitian_eig` so repeated calls inherit the same
    deterministic gauge.  The result is unitary to the accuracy of the
    eigendecomposition (about 1e-14 in max norm for well-scaled input).
    """
    eig = hermitian_eig(h)
    return phase_conjugate(eig, float(t))


def phase_conjugate(eig: HermitianEig, t: float) -> np.ndarray:
    """``V diag(exp(-i t values)) V^H`` from a precomputed decomposition."""
    phases = np.exp(-1j * t * eig.values)
    return (eig.vectors * phases) @ eig.vectors.conj().T
