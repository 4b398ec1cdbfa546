"""The auxiliary landscape whose critical points predict concentration.

Lambda(x) = (1 + V(x))^theta * K(x)^s with theta = (p+1)/(p-1) - n/2.
Two exponent conventions for s are selectable:

  * "derived"        s = -2/(p-1).  This is the convention fixed by the
    change-of-variables identity  integral |z|^(p+1) = Lambda K^-1 C0 with
    C0 the integral of U^(p+1); the identity is verified numerically in
    the test suite.  Minima of Lambda sit where K is large.
  * "paper-literal"  s = +2/(p-1), with C0 = L2 norm of U.  Kept only for
    auditability; the two differ by the sign of the K exponent.

Critical points are found by damped multistart Newton on grad Lambda,
clusters of converged points are fitted against point/circle/sphere/torus
templates, and the multiplicity lower bound comes from the lookup
point -> 1, circle/sphere -> 2, torus -> 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import ClusterAmbiguous, DomainError
from .fields import eval_field

CONVENTIONS = ("derived", "paper-literal")
DEGENERACY_FACTOR = 1e-8  # |eig| < factor * (1 + |Lambda|) counts as zero


def lambda_exponents(p, n, convention="derived"):
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown convention {convention!r}")
    theta = (p + 1.0) / (p - 1.0) - n / 2.0
    s = -2.0 / (p - 1.0)
    if convention == "paper-literal":
        s = -s
    return theta, s


def c0_from_moments(moments, convention="derived"):
    """The profile constant entering the reduced-energy comparison."""
    if convention == "paper-literal":
        return float(np.sqrt(moments.mass))
    return moments.nonlinear_mass


@dataclass
class LambdaSample:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass
class CriticalPoint:
    x: np.ndarray
    kind: str                       # min / max / saddle / degenerate
    hessian_eigenvalues: np.ndarray  # sorted ascending
    residual: float
    hessian: np.ndarray = None      # full matrix, for normal-space restriction


@dataclass
class CriticalManifold:
    points: list
    shape: str                      # point / circle / sphere / torus / unrecognized
    shape_params: dict = field(default_factory=dict)
    normal_eigenvalues: np.ndarray = None
    bott_nondegenerate: bool = False
    multiplicity_bound: int = 1


MULTIPLICITY = {"point": 1, "circle": 2, "sphere": 2, "torus": 3,
                "unrecognized": 1}


def lambda_eval(spec, x, p, convention="derived"):
    """Value, gradient and Hessian of Lambda by the chain rule from the
    symbolic derivatives of V and K."""
    x = np.asarray(x, dtype=float)
    sample = eval_field(spec, x)
    W = 1.0 + sample.V
    if W <= 0.0 or sample.K <= 0.0:
        raise DomainError(f"positivity violated at {x}: 1+V={W}, K={sample.K}")
    theta, s = lambda_exponents(p, spec.n, convention)
    value = W**theta * sample.K**s
    glog = theta * sample.grad_V / W + s * sample.grad_K / sample.K
    grad = value * glog
    hess = value * (
        np.outer(glog, glog)
        + theta * (sample.hess_V / W
                   - np.outer(sample.grad_V, sample.grad_V) / W**2)
        + s * (sample.hess_K / sample.K
               - np.outer(sample.grad_K, sample.grad_K) / sample.K**2))
    return LambdaSample(x=x, value=float(value), gradient=grad, hessian=hess)


def _classify_kind(eigs, value):
    thresh = DEGENERACY_FACTOR * (1.0 + abs(value))
    if np.any(np.abs(eigs) < thresh):
        return "degenerate"
    if np.all(eigs > 0):
        return "min"
    if np.all(eigs < 0):
        return "max"
    return "saddle"


def find_critical_points(spec, p, box, n_starts=64, newton_tol=1e-10,
                         convention="derived", seed=0, max_iter=80):
    """Damped Newton on grad Lambda from scrambled-Sobol starts in the box.

    box is (lo, hi) per coordinate.  Converged points are kept if they lie
    in the (slightly fattened) box and deduplicated at radius
    10 * newton_tol.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if np.any(hi <= lo):
        raise DomainError("empty search box")
    if n_starts < 1:
        raise DomainError("need at least one start")
    n = spec.n
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    count = int(2 ** np.ceil(np.log2(max(n_starts, 2))))
    starts = lo + (hi - lo) * sampler.random(count)[:n_starts]
    step_cap = 0.25 * float(np.max(hi - lo))
    pad = 1e-6 * np.max(hi - lo)

    found = []
    for x0 in starts:
        x = x0.copy()
        ok = False
        for _ in range(max_iter):
            try:
                samp = lambda_eval(spec, x, p, convention)
            except DomainError:
                break
            gnorm = float(np.linalg.norm(samp.gradient))
            if gnorm <= newton_tol:
                ok = True
                break
            lam = 0.0
            scale = float(np.max(np.abs(samp.hessian))) + 1e-300
            moved = False
            for _ in range(24):
                try:
                    s_vec = np.linalg.solve(
                        samp.hessian + lam * scale * np.eye(n),
                        -samp.gradient)
                except np.linalg.LinAlgError:
                    lam = max(4 * lam, 1e-8)
                    continue
                sn = float(np.linalg.norm(s_vec))
                if sn > step_cap:
                    s_vec *= step_cap / sn
                x_try = x + s_vec
                try:
                    g_try = np.linalg.norm(
                        lambda_eval(spec, x_try, p, convention).gradient)
                except DomainError:
                    lam = max(4 * lam, 1e-8)
                    continue
                if g_try < gnorm:
                    x = x_try
                    moved = True
                    break
                lam = max(4 * lam, 1e-8)
            if not moved:
                break
        if not ok:
            continue
        if np.any(x < lo - pad) or np.any(x > hi + pad):
            continue
        found.append(x)

    dedup = []
    for x in found:
        if all(np.linalg.norm(x - y) > 10 * newton_tol for y in dedup):
            dedup.append(x)

    points = []
    for x in sorted(dedup, key=tuple):
        samp = lambda_eval(spec, x, p, convention)
        eigs = np.sort(np.linalg.eigvalsh(samp.hessian))
        points.append(CriticalPoint(
            x=x, kind=_classify_kind(eigs, samp.value),
            hessian_eigenvalues=eigs,
            residual=float(np.linalg.norm(samp.gradient)),
            hessian=samp.hessian))
    return points


# --- shape templates -------------------------------------------------------------

def _fit_hypersphere(xs):
    """Kasa fit of |x - c| = r; returns (center, radius, rms residual)."""
    A = np.hstack([2.0 * xs, np.ones((len(xs), 1))])
    b = np.sum(xs**2, axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    c = sol[:-1]
    r2 = sol[-1] + c @ c
    if r2 <= 0:
        return c, 0.0, np.inf
    r = np.sqrt(r2)
    res = np.sqrt(np.mean((np.linalg.norm(xs - c, axis=1) - r) ** 2))
    return c, float(r), float(res)


def _fit_torus(xs):
    """Axis-aligned torus about the z axis: (|(x,y)| - R)^2 + z^2 = r^2."""
    rho = np.linalg.norm(xs[:, :2], axis=1)
    z = xs[:, 2]
    R = float(np.mean(rho))
    for _ in range(40):
        r = np.sqrt(np.mean((rho - R) ** 2 + z**2))
        # one Gauss-Newton step on R
        d = np.sqrt((rho - R) ** 2 + z**2)
        d = np.where(d < 1e-30, 1e-30, d)
        jac = -(rho - R) / d
        resid = d - r
        denom = float(jac @ jac)
        if denom < 1e-30:
            break
        dR = -float(jac @ resid) / denom
        R += dR
        if abs(dR) < 1e-13 * max(1.0, abs(R)):
            break
    r = float(np.sqrt(np.mean((rho - R) ** 2 + z**2)))
    res = float(np.sqrt(np.mean(
        (np.sqrt((rho - R) ** 2 + z**2) - r) ** 2)))
    return R, r, res


def _normal_directions(shape, params, x):
    if shape == "circle" or shape == "sphere":
        d = x - params["center"]
        nd = np.linalg.norm(d)
        if nd == 0:
            return []
        return [d / nd]
    if shape == "torus":
        R = params["major_radius"]
        rho = np.linalg.norm(x[:2])
        if rho == 0:
            return []
        ring = np.array([x[0] / rho * R, x[1] / rho * R, 0.0])
        d = x - ring
        nd = np.linalg.norm(d)
        if nd == 0:
            return []
        return [d / nd]
    return []


def _cluster(points, cluster_tol):
    k = len(points)
    parent = list(range(k))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if np.linalg.norm(points[i].x - points[j].x) <= cluster_tol:
                parent[root(i)] = root(j)
    groups = {}
    for i in range(k):
        groups.setdefault(root(i), []).append(points[i])
    return list(groups.values())


def classify_manifold(points, cluster_tol=0.25, fit_tol=1e-4,
                      point_tol=1e-6):
    """Cluster critical points and fit shape templates.

    Returns a list of CriticalManifold (distant clusters are distinct
    manifolds).  Raises ClusterAmbiguous when a non-isolated cluster fits
    no template within fit_tol (relative rms of the template residual).
    """
    if not points:
        raise DomainError("no critical points to classify")
    manifolds = []
    for group in _cluster(points, cluster_tol):
        xs = np.array([cp.x for cp in group])
        diam = 0.0
        if len(group) > 1:
            diam = max(np.linalg.norm(a - b)
                       for i, a in enumerate(xs) for b in xs[i + 1:])
        if diam <= point_tol:
            center = xs.mean(axis=0)
            eigs = group[0].hessian_eigenvalues
            manifolds.append(CriticalManifold(
                points=group, shape="point",
                shape_params={"center": center},
                normal_eigenvalues=eigs,
                bott_nondegenerate=group[0].kind != "degenerate",
                multiplicity_bound=MULTIPLICITY["point"]))
            continue

        n = xs.shape[1]
        candidates = []
        if len(group) >= 4:
            c, r, res = _fit_hypersphere(xs)
            if r > 0:
                shape = "circle" if n == 2 else "sphere"
                candidates.append((res / r, shape,
                                   {"center": c, "radius": r}))
            if n == 3:
                R, rr, tres = _fit_torus(xs)
                if rr > 1e-8:
                    candidates.append((tres / rr, "torus",
                                       {"major_radius": R,
                                        "minor_radius": rr,
                                        "center": np.zeros(3)}))
        candidates.sort(key=lambda t: t[0])
        if not candidates or candidates[0][0] > fit_tol:
            if len(group) >= 6:
                raise ClusterAmbiguous(
                    f"cluster of {len(group)} points (diameter {diam:.3g}) "
                    f"fits no shape template")
            manifolds.append(CriticalManifold(
                points=group, shape="unrecognized",
                normal_eigenvalues=np.array([]),
                multiplicity_bound=MULTIPLICITY["unrecognized"]))
            continue
        _, shape, params = candidates[0]
        normals = []
        for cp in group:
            hess = cp.hessian if cp.hessian is not None \
                else np.diag(cp.hessian_eigenvalues)
            for direction in _normal_directions(shape, params, cp.x):
                normals.append(float(direction @ hess @ direction))
        normals = np.array(normals)
        scale = max(1.0, float(np.max(np.abs(normals))) if normals.size else 1.0)
        thresh = DEGENERACY_FACTOR * scale
        bott = bool(normals.size
                    and np.all(np.abs(normals) > thresh)
                    and (np.all(normals > 0) or np.all(normals < 0)))
        manifolds.append(CriticalManifold(
            points=group, shape=shape, shape_params=params,
            normal_eigenvalues=normals, bott_nondegenerate=bott,
            multiplicity_bound=MULTIPLICITY[shape]))
    return _merge_coincident(manifolds)


def _merge_coincident(manifolds):
    """Merge manifolds whose fitted shapes agree (clusters can break into
    arcs when the converged points are unevenly spaced)."""
    out = []
    for man in manifolds:
        target = None
        if man.shape in ("circle", "sphere", "torus"):
            for other in out:
                if other.shape != man.shape:
                    continue
                pa, pb = man.shape_params, other.shape_params
                if man.shape == "torus":
                    scale = pb["major_radius"]
                    close = (abs(pa["major_radius"] - pb["major_radius"])
                             < 1e-3 * scale
                             and abs(pa["minor_radius"] - pb["minor_radius"])
                             < 1e-3 * scale)
                else:
                    scale = pb["radius"]
                    close = (np.linalg.norm(pa["center"] - pb["center"])
                             < 1e-3 * (1 + scale)
                             and abs(pa["radius"] - pb["radius"])
                             < 1e-3 * scale)
                if close:
                    target = other
                    break
        if target is None:
            out.append(man)
        else:
            target.points = target.points + man.points
            target.normal_eigenvalues = np.concatenate(
                [target.normal_eigenvalues, man.normal_eigenvalues])
            target.bott_nondegenerate = bool(target.bott_nondegenerate
                                             and man.bott_nondegenerate)
    return out
