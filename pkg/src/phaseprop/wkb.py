"""WKB data in phase space: the complex stationary-point lift,
Lagrangian-manifold transport, the double-phase-space asymptotic phase,
and the asymptotic solution along the transported manifold.

Initial data ``psi0 = R0 exp(i S0 / hbar)`` induces the manifold
``p = S0'(q)``; its phase-space analysis concentrates there and is
reproduced asymptotically by evaluating truncated analytic extensions
of ``S0`` and ``R0`` at a complex stationary point.  Everything here
carries derivative stacks symbolically — no numerical differentiation
enters any stationary-point evaluation; finite differences appear only
in the stationary-phase Hessian, where the defining functional itself
is the object being differentiated.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (BranchError, CausticError, ConfigurationError,
                     DomainError, ProjectionError)
from .flow import (FlowOptions, VariationalFrame, anisotropy_Z,
                   integrate_characteristics, symplectic_J)
from .models import HamiltonianModel, PhasePoint
from .propagator import double_anisotropy_Q
from .transform import ComplexField

__all__ = [
    "GaussianPoly", "WKBData", "LagrangianManifold",
    "r_analytic_extension", "stationary_point_z", "lift_wkb",
    "transport_manifold", "vertical_tangent_time", "asymptotic_phase_Fsc",
    "solution_on_manifold", "gaussian_integral",
    "double_phase_characteristics",
]


@dataclass(frozen=True)
class GaussianPoly:
    """Amplitude of the form ``P(x) exp(-(x - mu)^2 / (2 sigma^2))``.

    Closed under differentiation, which keeps derivative stacks exact:
    the derivative is ``(P' - P (x - mu)/sigma^2)`` times the same
    Gaussian.
    """

    poly: Polynomial
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not isinstance(self.poly, Polynomial):
            object.__setattr__(self, "poly", Polynomial(np.asarray(self.poly, dtype=float)))
        if not (self.sigma > 0):
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.poly(x) * np.exp(-((x - self.mu) ** 2) / (2 * self.sigma ** 2))

    def derivative(self) -> "GaussianPoly":
        shift = Polynomial([-self.mu, 1.0]) / self.sigma ** 2
        return GaussianPoly(self.poly.deriv() - self.poly * shift,
                            self.mu, self.sigma)

    def l2_norm(self) -> float:
        w = self.sigma * (14 + 2 * self.poly.degree())
        x = np.linspace(self.mu - w, self.mu + w, 20001)
        return float(np.sqrt(np.trapezoid(self(x) ** 2, x)))


def _derivative_stack(f, r: int) -> list:
    """``[f, f', ..., f^(r)]`` built from the object's own exact
    derivative (Polynomial.deriv or GaussianPoly.derivative)."""
    stack = [f]
    for _ in range(r):
        g = stack[-1]
        stack.append(g.deriv() if isinstance(g, Polynomial) else g.derivative())
    return stack


def _extend(stack: list, z) -> np.ndarray:
    """Evaluate the truncated extension sum for a precomputed stack."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    out = np.zeros_like(z)
    fac = 1.0
    for m, fm in enumerate(stack):
        if m > 0:
            fac *= m
        out = out + (1j * y) ** m / fac * fm(x)
    return out


def r_analytic_extension(f, r: int, z):
    """Truncated analytic extension ``sum_{m<=r} (iy d/dx)^m f(x) / m!``
    of a derivative-stack function at ``z = x + iy``.

    Exact continuation for polynomials of degree <= r; first-order
    accurate in the transverse displacement otherwise.
    """
    if r < 0:
        raise ConfigurationError(f"extension order must be >= 0, got {r}")
    vals = _extend(_derivative_stack(f, r), z)
    return vals if vals.shape else complex(vals)


@dataclass(frozen=True)
class WKBData:
    """Initial WKB data ``R0 exp(i S0 / hbar)`` with derivative stacks.

    ``S0`` is a real polynomial phase of degree <= 4, ``R0`` a
    normalized Gaussian-times-polynomial amplitude, and ``r >= 2`` the
    truncation order of all analytic extensions.
    """

    S0: Polynomial
    R0: GaussianPoly
    r: int = 2

    def __post_init__(self):
        S0 = self.S0
        if not isinstance(S0, Polynomial):
            S0 = Polynomial(np.asarray(S0, dtype=float))
            object.__setattr__(self, "S0", S0)
        if S0.degree() > 4:
            raise ConfigurationError(
                f"phase degree {S0.degree()} > 4 is not supported")
        if np.iscomplexobj(S0.coef):
            raise ConfigurationError("phase coefficients must be real")
        if self.r < 2:
            raise ConfigurationError(f"extension order must be >= 2, got {self.r}")
        nrm = self.R0.l2_norm()
        if abs(nrm - 1.0) > 1e-8:
            raise ConfigurationError(
                f"amplitude must be L2-normalized: got norm {nrm:.10f}")

    @cached_property
    def _s0_stack(self):
        return _derivative_stack(self.S0, self.r)

    @cached_property
    def _s0pp_stack(self):
        return _derivative_stack(self.S0.deriv(2), self.r)

    @cached_property
    def _r0_stack(self):
        return _derivative_stack(self.R0, self.r)

    def s0_prime(self, x):
        return self._s0_stack[1](np.asarray(x, dtype=float))

    def s0_second(self, x):
        return self._s0pp_stack[0](np.asarray(x, dtype=float))

    def ext_S0(self, z):
        return _extend(self._s0_stack, z)

    def ext_S0_second(self, z):
        return _extend(self._s0pp_stack, z)

    def ext_R0(self, z):
        return _extend(self._r0_stack, z)

    def state(self, x, hbar: float) -> np.ndarray:
        """The position-space state ``R0(x) exp(i S0(x)/hbar)``."""
        x = np.asarray(x, dtype=float)
        return self.R0(x) * np.exp(1j * self.S0(x) / hbar)


@dataclass(frozen=True)
class LagrangianManifold:
    """Sampled parametrization ``alpha -> (q(alpha), p(alpha))`` of the
    manifold at time t, with the transported generating phase
    ``S(q(alpha), t)`` at the same samples."""

    alpha: np.ndarray
    q: np.ndarray
    p: np.ndarray
    phase: np.ndarray
    t: float

    def line_fit(self):
        """Least-squares line ``p = slope q + offset`` through the
        samples, with the maximum absolute residual."""
        A = np.vstack([self.q, np.ones_like(self.q)]).T
        (slope, offset), *_ = np.linalg.lstsq(A, self.p, rcond=None)
        resid = float(np.abs(self.p - slope * self.q - offset).max())
        return float(slope), float(offset), resid


def stationary_point_z(data: WKBData, X: PhasePoint) -> complex:
    """Complex stationary point of the packet-pairing phase:
    ``z(q, p) = q + i (1 - i S0''(q))^(-1) (S0'(q) - p)``.

    On the manifold ``p = S0'(q)`` this reduces to ``z = q`` exactly;
    the defining residual ``S0'(z) - p + i(z - q)`` vanishes
    identically for quadratic phases.
    """
    if X.d != 1:
        raise ConfigurationError("stationary_point_z supports d = 1 only")
    q, p = float(X.q[0]), float(X.p[0])
    s1 = float(data.s0_prime(q))
    s2 = float(data.s0_second(q))
    return complex(q + 1j * (s1 - p) / (1 - 1j * s2))


def _z_grid(data: WKBData, Q, P):
    s1 = data.s0_prime(Q)
    s2 = data.s0_second(Q)
    return Q + (s1 - P) * (1j - s2) / (1 + s2 ** 2)


def _branch_jump_mask(w: np.ndarray) -> np.ndarray:
    """True where the principal square root of ``w`` jumps between
    adjacent nodes (the continuous continuation needs the other sign)."""
    sw = np.sqrt(w)
    bad = np.zeros(w.shape, dtype=bool)
    for ax in range(w.ndim):
        a = np.moveaxis(sw, ax, 0)
        jump = np.abs(a[1:] + a[:-1]) < np.abs(a[1:] - a[:-1])
        b = np.moveaxis(bad, ax, 0)
        b[1:] |= jump
        b[:-1] |= jump
    return bad


def lift_wkb(data: WKBData, phase_grid, hbar: float) -> ComplexField:
    """Lift WKB data to the phase plane through the stationary point.

    ``(pi hbar)^(-d/4) R0~(z) (1 - i S0''~(z))^(-1/2)
    exp{(i/hbar)(S0~(z) - p (z - q) + (i/2)(z - q)^2 - p q / 2)}``
    where ``~`` marks the order-r truncated extension and ``z`` the
    stationary point of each node.  The prefactor root is principal
    and must be continuous across the grid; a detected jump raises a
    branch error (use a finer grid).
    """
    qs = np.asarray(phase_grid[0], dtype=float)
    ps = np.asarray(phase_grid[1], dtype=float)
    Q, P = np.meshgrid(qs, ps, indexing="ij")
    z = _z_grid(data, Q, P)
    w = 1 - 1j * data.ext_S0_second(z)
    if _branch_jump_mask(w).any():
        raise BranchError(
            "prefactor square root is discontinuous between adjacent grid "
            "nodes; refine the phase grid")
    amp = data.ext_R0(z) / np.sqrt(w)
    phase = (data.ext_S0(z) - P * (z - Q) + 0.5j * (z - Q) ** 2 - 0.5 * P * Q)
    vals = (np.pi * hbar) ** (-0.25) * amp * np.exp(1j * phase / hbar)
    return ComplexField((qs, ps), vals, hbar)


def _flow_alpha(data: WKBData, model: HamiltonianModel, t: float,
                alpha: np.ndarray, opts: FlowOptions | None):
    """Flow the manifold samples (alpha, S0'(alpha)) to time t.

    Returns (q_t, p_t, action, dq_t/dalpha)."""
    q0 = alpha
    p0 = data.s0_prime(alpha)
    s2 = data.s0_second(alpha)
    if model.bulk_flow is not None:
        qt, pt = model.bulk_flow(q0, p0, t)
        act = model.bulk_action(q0, p0, t)
        A, _B, _ldA, _ldw = model.frame_at(t)
        a = A[0, 0]
        dqda = a.real + a.imag * s2
        dqda = np.broadcast_to(np.asarray(dqda), alpha.shape).astype(float)
        return qt, pt, act, dqda
    o = opts or FlowOptions()
    qt = np.empty_like(alpha)
    pt = np.empty_like(alpha)
    act = np.empty_like(alpha)
    dqda = np.empty_like(alpha)
    for j, a0 in enumerate(alpha):
        b = integrate_characteristics(model, PhasePoint([a0], [p0[j]]), t, o)
        qt[j] = b.points[-1].q[0]
        pt[j] = b.points[-1].p[0]
        act[j] = b.action[-1]
        Af = b.frames[-1].A[0, 0]
        dqda[j] = Af.real + Af.imag * s2[j]
    return qt, pt, act, dqda


def _earliest_fold(data, model, t, alpha, opts):
    """Scan (0, t] for the first time the projection folds; returns
    (t_star, alpha_star)."""
    taus = np.linspace(0.0, t, 81)[1:]
    for tau in taus:
        _qt, _pt, _act, dqda = _flow_alpha(data, model, tau, alpha, opts)
        scale = max(1.0, float(np.abs(dqda).max()))
        bad = (dqda < 1e-9 * scale)
        if bad.any():
            j = int(np.argmin(np.abs(dqda)))
            return float(tau), float(alpha[j])
    j = 0
    return float(t), float(alpha[j])


def transport_manifold(data: WKBData, model: HamiltonianModel, t: float,
                       alpha_grid, opts: FlowOptions | None = None
                       ) -> LagrangianManifold:
    """Transport the manifold ``p = S0'(q)`` by the flow and carry the
    generating phase along each characteristic.

    ``S(q_t(alpha), t) = S0(alpha) + Act(alpha, t)``.  The projection
    ``alpha -> q_t(alpha)`` must stay monotone; a fold (vanishing or
    sign-changing ``dq_t/dalpha``) raises a caustic error naming the
    earliest fold time and parameter.
    """
    alpha = np.asarray(alpha_grid, dtype=float)
    if alpha.ndim != 1 or alpha.size < 2:
        raise ConfigurationError("alpha grid must be 1-D with >= 2 samples")
    qt, pt, act, dqda = _flow_alpha(data, model, t, alpha, opts)
    scale = max(1.0, float(np.abs(dqda).max()))
    if (dqda < 1e-9 * scale).any() or (np.sign(dqda) != np.sign(dqda[0])).any():
        t_star, a_star = _earliest_fold(data, model, t, alpha, opts)
        raise CausticError(
            "manifold projection folds (vertical tangent); the transported "
            "phase is multivalued here",
            t_star=t_star, alpha_star=a_star)
    S = data.S0(alpha) + act
    return LagrangianManifold(alpha=alpha, q=qt, p=pt, phase=S, t=float(t))


def vertical_tangent_time(data: WKBData, model: HamiltonianModel,
                          alpha: float = 0.0, t_max: float = 2.0,
                          opts: FlowOptions | None = None) -> float | None:
    """Earliest time in (0, t_max] at which the manifold projection
    becomes vertical at the given parameter: the first zero of
    ``dq_t/dalpha``.  Returns None if the window holds no fold."""
    from scipy.optimize import brentq

    a = np.asarray([alpha], dtype=float)

    def g(tau: float) -> float:
        if tau == 0.0:
            return 1.0
        _qt, _pt, _act, dqda = _flow_alpha(data, model, tau, a, opts)
        return float(dqda[0])

    taus = np.linspace(0.0, t_max, 2001)
    prev = g(taus[0])
    for tau in taus[1:]:
        cur = g(tau)
        if np.sign(cur) != np.sign(prev):
            return float(brentq(g, tau - (taus[1] - taus[0]), tau, xtol=1e-12))
        prev = cur
    return None


def _traj_end(model: HamiltonianModel, Y: PhasePoint, t: float,
              opts: FlowOptions | None):
    """Endpoint data of the orbit from Y: (Y_t, action, frame)."""
    if model.frame_at is not None:
        Yt = model.exact_flow(Y, t)
        act = model.action(Y, t)
        A, B, _ldA, _ldw = model.frame_at(t)
        return Yt, act, VariationalFrame(A, B)
    b = integrate_characteristics(model, Y, t, opts or FlowOptions())
    return b.points[-1], float(b.action[-1]), b.frames[-1]


def _F_value(data: WKBData, model: HamiltonianModel, X: PhasePoint,
             eta: float, xi: float, t: float,
             opts: FlowOptions | None) -> complex:
    """The double-phase-space phase F(X, Y, t) for Y = (eta, xi)."""
    z = complex(_z_grid(data, np.asarray(eta), np.asarray(xi)))
    Yt, act, frame = _traj_end(model, PhasePoint([eta], [xi]), t, opts)
    Qm = double_anisotropy_Q(anisotropy_Z(frame)).M
    q, p = float(X.q[0]), float(X.p[0])
    eta_t, xi_t = float(Yt.q[0]), float(Yt.p[0])
    v = np.array([q - eta_t, p - xi_t])
    return complex(
        data.ext_S0(z) - xi * (z - eta) + 0.5j * (z - eta) ** 2
        + act - 0.5 * xi_t * eta_t + 0.5 * (q * xi_t - p * eta_t)
        + 0.5 * (v @ Qm @ v))


def asymptotic_phase_Fsc(X: PhasePoint, t: float, data: WKBData,
                         model: HamiltonianModel,
                         Y: PhasePoint | None = None,
                         alpha_grid=None,
                         opts: FlowOptions | None = None) -> complex:
    """Double-phase-space asymptotic phase at X, sourced on the manifold.

    Unless a source ``Y`` on the initial manifold is supplied, the
    source parameter solves the orthogonality condition
    ``(X - X_t(alpha)) . dX_t/dalpha = 0`` by damped Newton seeded from
    the nearest sample of ``alpha_grid``; ties between competing local
    projections are broken by distance and flagged.  The imaginary part
    is nonnegative, vanishing exactly on the transported manifold.
    """
    if X.d != 1:
        raise ConfigurationError("asymptotic_phase_Fsc supports d = 1 only")
    if Y is None:
        alpha = _project_alpha(X, t, data, model, alpha_grid, opts)
        Y = PhasePoint([alpha], [float(data.s0_prime(alpha))])
    else:
        xi_expected = float(data.s0_prime(float(Y.q[0])))
        if abs(float(Y.p[0]) - xi_expected) > 1e-8 * max(1.0, abs(xi_expected)):
            raise ProjectionError(
                f"Y = ({Y.q[0]}, {Y.p[0]}) is not on the initial manifold "
                f"p = S0'(q) (expected p = {xi_expected})")
    return _F_value(data, model, X, float(Y.q[0]), float(Y.p[0]), t, opts)


def _project_alpha(X, t, data, model, alpha_grid, opts) -> float:
    if alpha_grid is None:
        c = float(X.q[0])
        alpha_grid = np.linspace(c - 8.0, c + 8.0, 321)
    alpha = np.asarray(alpha_grid, dtype=float)
    qt, pt, _act, _d = _flow_alpha(data, model, t, alpha, opts)
    dist2 = (qt - X.q[0]) ** 2 + (pt - X.p[0]) ** 2
    j0 = int(np.argmin(dist2))
    interior = dist2[1:-1]
    mins = np.nonzero((interior < dist2[:-2]) & (interior <= dist2[2:]))[0] + 1
    if mins.size > 1:
        best = np.sort(dist2[mins])
        if best[1] < 4.0 * best[0]:
            warnings.warn(
                "projection onto the transported manifold is ambiguous "
                "(competing nearest points); keeping the closest",
                UserWarning, stacklevel=3)

    def g(a: float) -> float:
        d = 1e-6 * max(1.0, abs(a))
        arrs = np.asarray([a - d, a, a + d])
        q3, p3, _a3, _d3 = _flow_alpha(data, model, t, arrs, opts)
        dq = (q3[2] - q3[0]) / (2 * d)
        dp = (p3[2] - p3[0]) / (2 * d)
        return float((X.q[0] - q3[1]) * dq + (X.p[0] - p3[1]) * dp)

    a = float(alpha[j0])
    h = float(alpha[1] - alpha[0])
    ga = g(a)
    for _ in range(60):
        if abs(ga) < 1e-12 * max(1.0, abs(a)):
            break
        d = 1e-6 * max(1.0, abs(a))
        slope = (g(a + d) - g(a - d)) / (2 * d)
        if slope == 0.0:
            break
        step = float(np.clip(-ga / slope, -2 * h, 2 * h))
        # damping: halve until |g| decreases; a stall near a fold
        # (where dg/dalpha ~ 0) is fine if the residual is already small
        for _k in range(30):
            gn = g(a + step)
            if abs(gn) < abs(ga):
                a, ga = a + step, gn
                break
            step /= 2
        else:
            break
    if abs(ga) > 1e-8 * max(1.0, abs(a)):
        raise ProjectionError(
            f"orthogonality solve did not converge (residual {abs(ga):.3e})")
    return a


def _backward_point(model: HamiltonianModel, X: PhasePoint, t: float
                    ) -> PhasePoint:
    """g^{-t} X: closed form when available, else fixed-step reverse
    integration of Hamilton's equations."""
    if model.inverse_flow is not None:
        return model.inverse_flow(X, t)
    n = max(1, math.ceil(t / 1e-3))
    h = t / n
    y = X.as_vector().astype(float)
    d = model.dim
    J = symplectic_J(d)

    def f(v):
        g = model.gradient(PhasePoint(v[:d], v[d:]))
        return -(J @ g)

    for _ in range(n):
        k1 = f(y)
        k2 = f(y + h / 2 * k1)
        k3 = f(y + h / 2 * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return PhasePoint.from_vector(y)


def _hessF(data, model, X, eta, xi, t, opts, d):
    """Central-difference Hessian of F in the source variables."""
    def f(e, x):
        return _F_value(data, model, X, e, x, t, opts)

    H = np.empty((2, 2), dtype=complex)
    f0 = f(eta, xi)
    H[0, 0] = (f(eta + d, xi) - 2 * f0 + f(eta - d, xi)) / d ** 2
    H[1, 1] = (f(eta, xi + d) - 2 * f0 + f(eta, xi - d)) / d ** 2
    H[0, 1] = H[1, 0] = (f(eta + d, xi + d) - f(eta + d, xi - d)
                         - f(eta - d, xi + d) + f(eta - d, xi - d)) / (4 * d ** 2)
    return H


def _detF_richardson(data, model, X, eta, xi, t, opts, d=1e-3):
    """det of the stationary-phase Hessian with one Richardson step
    (leading error O(d^4))."""
    H1 = _hessF(data, model, X, eta, xi, t, opts, d)
    H2 = _hessF(data, model, X, eta, xi, t, opts, d / 2)
    H = (4.0 * H2 - H1) / 3.0
    return complex(np.linalg.det(H))


def _sqrt_tracked_ratio(vals: np.ndarray) -> complex:
    """Continuous square root of ``vals[-1]/vals[0]`` along the path,
    equal to +1 at the start."""
    prev = 1.0 + 0.0j
    for k in range(1, len(vals)):
        r = np.sqrt(vals[k] / vals[0])
        if abs(-r - prev) < abs(r - prev):
            r = -r
        prev = r
    return prev


def solution_on_manifold(X: PhasePoint, t: float, data: WKBData,
                         model: HamiltonianModel, hbar: float,
                         opts: FlowOptions | None = None,
                         n_track: int = 41) -> complex:
    """Asymptotic solution at a point of the transported manifold.

    Pulls X back to its source ``(eta, xi) = g^{-t} X`` on the initial
    manifold and evaluates ``(pi hbar)^(-d/4) R0(eta)
    exp{(i/hbar)(-p q/2 + S0(eta) + Act)}`` divided by the square root
    of ``det((A - iB)/2) det(1 - i S0''(eta)) det F''`` — the root is
    branch-tracked continuously in time from its exact initial value,
    with the stationary-phase Hessian ``F''`` taken by Richardson-
    extrapolated central differences of the double-phase-space phase.
    """
    if X.d != 1:
        raise ConfigurationError("solution_on_manifold supports d = 1 only")
    if t < 0:
        raise ConfigurationError(f"t must be nonnegative, got {t}")
    Y0 = _backward_point(model, X, t)
    eta, xi = float(Y0.q[0]), float(Y0.p[0])
    xi_expected = float(data.s0_prime(eta))
    if abs(xi - xi_expected) > 1e-6 * max(1.0, abs(xi_expected)):
        raise ProjectionError(
            f"X does not lie on the transported manifold: its source "
            f"({eta:.6g}, {xi:.6g}) is off p = S0'(q) by "
            f"{abs(xi - xi_expected):.3e}")
    s2 = float(data.s0_second(eta))
    w0 = 1 - 1j * s2

    taus = np.linspace(0.0, t, n_track) if t > 0 else np.array([0.0])
    us = np.empty(taus.size, dtype=complex)
    for k, tau in enumerate(taus):
        Ytau, _act, frame = _traj_end(model, Y0, float(tau), opts)
        dw = (frame.A[0, 0] - 1j * frame.B[0, 0]) / 2
        detF = _detF_richardson(data, model, Ytau, eta, xi, float(tau), opts)
        us[k] = dw * w0 * detF
    ratio = _sqrt_tracked_ratio(us)

    _Yt, act, _frame = _traj_end(model, Y0, t, opts)
    q, p = float(X.q[0]), float(X.p[0])
    amp = (np.pi * hbar) ** (-0.25) * float(data.R0(eta))
    phase = -0.5 * p * q + float(data.S0(eta)) + act
    return complex(amp * np.exp(1j * phase / hbar) / (np.sqrt(w0) * ratio))


def gaussian_integral(M, v, hbar: float) -> complex:
    """Normalized Gaussian integral
    ``(2 pi hbar)^(-d/2) integral exp{(i v.x - x.Mx/2)/hbar} dx
    = (det M)^(-1/2) exp(-v.M^{-1}v / (2 hbar))`` on the principal
    branch; requires ``Re M`` positive definite."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    d = M.shape[0]
    if M.shape != (d, d) or v.shape != (d,):
        raise ConfigurationError(
            f"shape mismatch: M {M.shape}, v {v.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise DomainError("M must be complex symmetric")
    if np.linalg.eigvalsh(M.real).min() <= 0:
        raise DomainError("Re M must be positive definite")
    lam = np.linalg.eigvals(M)
    inv_sqrt_det = np.exp(-0.5 * np.sum(np.log(lam)))
    quad = v @ np.linalg.solve(M, v)
    return complex(inv_sqrt_det * np.exp(-quad / (2 * hbar)))


def double_phase_characteristics(model: HamiltonianModel, X0: PhasePoint,
                                 t: float, opts: FlowOptions | None = None):
    """Doubled characteristics by reduction: the momentum-like variable
    stays locked to the orbit, ``P_t = J X_t / 2``, so the doubled
    integral of motion ``c(t) = X_t/2 + J P_t`` vanishes identically.
    Returns ``(X_t, P_t, c)``."""
    b = integrate_characteristics(model, X0, t, opts)
    Xt = b.points[-1]
    J = symplectic_J(model.dim)
    Pt = 0.5 * (J @ Xt.as_vector())
    c = 0.5 * Xt.as_vector() + J @ Pt
    return Xt, Pt, c
