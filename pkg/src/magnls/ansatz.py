"""The approximate-solution family and its tangent frame.

The building block is
    z(x) = exp(i sigma + i A(eps xi) . x) * alpha * U(beta |x - xi|)
with (alpha, beta) the frozen-coefficient rescaling of the ground state U.
The family swept out by (sigma, xi) is the near-critical manifold; its
tangent directions are i z (phase) and, per translation direction,
-d_j z + i A_j(eps xi) z, whose magnetic parts cancel against the phase
factor and leave a purely radial derivative term.  Projection onto the
orthogonal complement of the frame is by a Gram solve in the Sobolev inner
product, keeping the basis members themselves interpretable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .discretization import _bare_inner
from .errors import DomainError, IllConditioned, OutOfBox
from .fields import eval_field
from .grids import ComplexField
from .groundstate import scaling_factors

DECAY_MARGIN = 12.0  # required distance from xi to every face, in 1/beta units
GRAM_COND_LIMIT = 1e10


@dataclass
class AnsatzParams:
    eps: float
    xi: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        if self.eps <= 0:
            raise DomainError("eps must be positive")


@dataclass
class TangentFrame:
    """Basis {i z, -d_1 z + i A_1 z, ...} with its Gram factorization."""

    grid: object
    basis: list            # n+1 raw complex arrays
    gram: np.ndarray
    cond: float
    _cho: object

    def project(self, values):
        """Component of `values` orthogonal (Sobolev) to the frame span.

        The input boundary layer is pinned to zero first, so projected
        vectors always live in the Dirichlet space even if the input
        carried noise there; orthogonalizing before cleaning would leave
        frame components through the basis tails (Krylov iterations rely
        on projected vectors being clean both ways)."""
        out = values.copy()
        _zero_boundary(out)
        coeffs = np.array([_bare_inner(self.grid, b, out)
                           for b in self.basis])
        sol = cho_solve(self._cho, coeffs)
        for c, b in zip(sol, self.basis):
            out -= c * b
        return out


def _ansatz_pieces(profile, spec, params, grid, margin=DECAY_MARGIN):
    sample = eval_field(spec, params.eps * params.xi)
    alpha, beta = scaling_factors(sample.V, sample.K, profile.p)
    for j in range(grid.n):
        face_dist = grid.L - abs(params.xi[j] - grid.center[j])
        if face_dist < margin / beta:
            raise OutOfBox(
                f"xi component {j} is {face_dist:.3f} from the boundary; "
                f"needs {margin / beta:.3f} for the decay margin")
    shifted = [c - params.xi[j] for j, c in enumerate(grid.coords)]
    r = np.sqrt(sum(d * d for d in shifted))
    phase = params.sigma + sum(sample.A[j] * grid.coords[j]
                               for j in range(grid.n))
    return sample, alpha, beta, shifted, r, np.exp(1j * phase)


def build_ansatz(profile, spec, params, grid, margin=DECAY_MARGIN):
    """Sample z on the grid nodes; peak of |z| at the node nearest xi."""
    _, alpha, beta, _, r, phase = _ansatz_pieces(profile, spec, params,
                                                 grid, margin)
    radial = alpha * profile.value(beta * r)
    return ComplexField(grid, phase * radial)


def tangent_frame(z, profile, spec, params, grid, margin=DECAY_MARGIN):
    """Frame {iz, -d_j z + i A_j(eps xi) z}; the translation members reduce
    to -exp(i phase) alpha beta^2 q(beta r) (x_j - xi_j) with q = U'/s."""
    _, alpha, beta, shifted, r, phase = _ansatz_pieces(profile, spec, params,
                                                       grid, margin)
    q = profile.slope_over_r(beta * r)
    basis = [1j * z.values]
    for j in range(grid.n):
        member = -phase * alpha * beta**2 * q * shifted[j]
        member = np.ascontiguousarray(member, dtype=complex)
        _zero_boundary(member)
        basis.append(member)
    k = len(basis)
    gram = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            gram[a, b] = gram[b, a] = _bare_inner(grid, basis[a], basis[b])
    cond = float(np.linalg.cond(gram))
    if cond > GRAM_COND_LIMIT:
        raise IllConditioned(f"tangent frame Gram condition {cond:.3e}")
    cho = cho_factor(gram)
    return TangentFrame(grid=grid, basis=basis, gram=gram, cond=cond,
                        _cho=cho)


def project_complement(v, frame):
    """Project a field onto the orthogonal complement of the frame span."""
    if v.grid != frame.grid:
        raise DomainError("field and frame live on different grids")
    return ComplexField(v.grid, frame.project(v.values))


def _zero_boundary(values):
    m = values.shape[0]
    for ax in range(values.ndim):
        sl = [slice(None)] * values.ndim
        sl[ax] = 0
        values[tuple(sl)] = 0.0
        sl[ax] = m - 1
        values[tuple(sl)] = 0.0
