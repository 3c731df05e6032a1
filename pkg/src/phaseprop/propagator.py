"""Semiclassical propagation: thawed packets, the phase-space kernel,
and grid propagators in both representations.

For Hamiltonians that are at most quadratic the kernel below is the
exact flow kernel of the phase-space evolution restricted to the
analyzed subspace; for general Hamiltonians it is the leading
semiclassical approximation.  All branch-sensitive square roots are
taken through continuously tracked logarithms carried by the
trajectory bundle, never by principal-branch evaluation of endpoint
data.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CausticError, ConfigurationError, EhrenfestWarning
from .flow import (FlowOptions, SiegelMatrix, TrajectoryBundle,
                   VariationalFrame, anisotropy_Z, ehrenfest_guard,
                   integrate_characteristics)
from .models import HamiltonianModel, PhasePoint
from .transform import ComplexField, wave_packet_transform

__all__ = [
    "PropagatedPacket", "propagate_packet", "eval_packet",
    "double_anisotropy_Q", "kernel_Ksc", "apply_propagator",
    "position_space_solution", "van_vleck_kernel",
]


@dataclass(frozen=True)
class PropagatedPacket:
    """A coherent packet carried along one characteristic orbit.

    At every stored time the packet stays an exact Gaussian: center
    ``X_t``, width matrix ``Z_t = B A^{-1}``, amplitude
    ``1/sqrt(det A)`` (branch-tracked), and action phase — with unit
    L2 norm for all t.
    """

    bundle: TrajectoryBundle
    hbar: float

    @property
    def base(self) -> PhasePoint:
        return self.bundle.points[0]


def propagate_packet(model: HamiltonianModel, X0: PhasePoint, T: float,
                     hbar: float, opts: FlowOptions | None = None
                     ) -> PropagatedPacket:
    """Carry the packet centered at X0 along its orbit up to time T."""
    opts = opts or FlowOptions()
    opts = FlowOptions(method=opts.method, step=opts.step, rtol=opts.rtol,
                       hbar=hbar)
    return PropagatedPacket(integrate_characteristics(model, X0, T, opts), hbar)


def eval_packet(pkt: PropagatedPacket, t: float, x) -> np.ndarray:
    """Evaluate the propagated packet at position samples ``x``.

    ``(pi hbar)^(-d/4) a(t) exp{(i/hbar)(Act + p_0.q_0/2 + p_t.(x-q_t)
    + (x-q_t).Z_t (x-q_t)/2)}`` with ``a(t) = exp(-log det A / 2)``.
    The static gauge term ``p_0.q_0/2`` is the initial packet's own and
    does not transport — the dynamical phase sits entirely in ``Act``.
    """
    b = pkt.bundle
    i = b.index_of(t)
    X0 = b.points[0]
    Xt = b.points[i]
    Z = anisotropy_Z(b.frames[i]).M
    a = np.exp(-0.5 * b.logdetA[i])
    act = b.action[i]
    hbar = pkt.hbar
    x = np.asarray(x, dtype=float)
    d = Xt.d
    if d == 1:
        dx = x - Xt.q[0]
        phase = act + X0.p[0] * X0.q[0] / 2 + Xt.p[0] * dx + 0.5 * Z[0, 0] * dx ** 2
    else:
        dx = x - Xt.q
        quad = np.einsum("...i,ij,...j->...", dx, Z, dx)
        phase = act + (X0.p @ X0.q) / 2 + dx @ Xt.p + 0.5 * quad
    return (np.pi * hbar) ** (-d / 4) * a * np.exp(1j / hbar * phase)


def double_anisotropy_Q(Z) -> SiegelMatrix:
    """Doubled anisotropy form on phase space.

    ``Q(Z) = [[i(I - R), I/2 - R], [I/2 - R, iR]]`` with
    ``R = (I - iZ)^{-1}``; maps the Siegel half-space of packet widths
    into the Siegel half-space on the doubled variables, with the
    isotropic fixed point ``Q(iI) = (i/2) I``.
    """
    M = Z.M if isinstance(Z, SiegelMatrix) else np.atleast_2d(np.asarray(Z, dtype=complex))
    d = M.shape[0]
    I = np.eye(d)
    R = np.linalg.inv(I - 1j * M)
    Q = np.block([[1j * (I - R), 0.5 * I - R],
                  [0.5 * I - R, 1j * R]])
    return SiegelMatrix(Q)


def _kernel_opts(model: HamiltonianModel, t: float,
                 opts: FlowOptions | None) -> FlowOptions:
    if opts is not None:
        return opts
    if model.frame_at is not None and t > 0:
        return FlowOptions(step=t)  # closed forms: endpoint sample suffices
    return FlowOptions()


def kernel_Ksc(X: PhasePoint, Y: PhasePoint, t: float,
               model: HamiltonianModel, hbar: float,
               opts: FlowOptions | None = None) -> complex:
    """Semiclassical phase-space kernel ``K(X, Y, t)``.

    Built from the orbit launched at the source point Y: with
    ``Y_t = (eta_t, xi_t)``, action ``Act``, frame ``(A, B)`` and
    ``Q = Q(B A^{-1})``,

    ``K = (2 pi hbar)^(-d) 2^(d/2) exp(-log det(A - iB)/2) *
    exp{(i/hbar)(Act + (xi.eta - xi_t.eta_t)/2 + X.J Y_t / 2
    + (X - Y_t).Q (X - Y_t)/2)}``.

    At t = 0 this reduces identically to the reproducing kernel.
    """
    bundle = integrate_characteristics(model, Y, t, _kernel_opts(model, t, opts))
    i = bundle.index_of(t)
    Yt = bundle.points[i]
    frame = bundle.frames[i]
    Qm = double_anisotropy_Q(anisotropy_Z(frame)).M
    d = Y.d
    pref = (2 * np.pi * hbar) ** (-d) * 2 ** (d / 2) * np.exp(-0.5 * bundle.logdet_w[i])
    v = np.concatenate([X.q - Yt.q, X.p - Yt.p])
    phase = (bundle.action[i]
             + (Y.p @ Y.q - Yt.p @ Yt.q) / 2
             + (X.q @ Yt.p - X.p @ Yt.q) / 2
             + 0.5 * v @ Qm @ v)
    return complex(pref * np.exp(1j / hbar * phase))


def _support_box(field: ComplexField, rel: float = 1e-6):
    """Index-aligned bounding box where the field exceeds ``rel`` of
    its peak modulus."""
    mag = np.abs(field.values)
    mask = mag > rel * mag.max()
    iq = np.nonzero(mask.any(axis=1))[0]
    ip = np.nonzero(mask.any(axis=0))[0]
    qs, ps = field.axes
    return (float(qs[iq[0]]), float(qs[iq[-1]]),
            float(ps[ip[0]]), float(ps[ip[-1]]))


def _axis(lo: float, hi: float, target: float) -> np.ndarray:
    n = max(2, int(math.ceil((hi - lo) / target)) + 1)
    return np.linspace(lo, hi, n)


def _derive_out_axes(model, box, t, hbar, opts):
    """Propagated bounding box: flow the support-box corners and center
    forward and pad by the packet decay width."""
    qa, qb, pa, pb = box
    probes = [PhasePoint([q], [p]) for q, p in
              ((qa, pa), (qa, pb), (qb, pa), (qb, pb),
               ((qa + qb) / 2, (pa + pb) / 2))]
    qs, ps = [], []
    for X in probes:
        if model.exact_flow is not None:
            Xt = model.exact_flow(X, t)
        else:
            b = integrate_characteristics(model, X, t, opts or FlowOptions())
            Xt = b.points[-1]
        qs.append(float(Xt.q[0]))
        ps.append(float(Xt.p[0]))
    pad = 6 * np.sqrt(hbar)
    tgt = np.sqrt(hbar) / 4
    return (_axis(min(qs) - pad, max(qs) + pad, tgt),
            _axis(min(ps) - pad, max(ps) + pad, tgt))


def _warn_if_edge_mass(field: ComplexField) -> None:
    v = np.abs(field.values)
    peak = v.max()
    edge = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max())
    if edge > 1e-6 * peak:
        warnings.warn(
            f"phase-space field carries {edge / peak:.2e} of its peak at the "
            "grid boundary; propagated norm may be lossy", UserWarning,
            stacklevel=3)


def _emit_ehrenfest(model, center, t, hbar, opts):
    if t <= 0:
        return
    step = max(t / 400, 1e-3) if model.frame_at is None else t / 200
    guard_opts = FlowOptions(method=opts.method if opts else None,
                             step=step, hbar=hbar)
    bundle = integrate_characteristics(model, center, t, guard_opts)
    for msg in ehrenfest_guard(bundle):
        warnings.warn(msg, EhrenfestWarning, stacklevel=3)


def _source_data(model, Qg, Pg, t, opts):
    """Per-source flow data: images, actions, and (shared or per-source)
    doubled form and prefactor exponent."""
    if model.bulk_flow is not None:
        qt, pt = model.bulk_flow(Qg, Pg, t)
        act = model.bulk_action(Qg, Pg, t)
        A, B, ldA, ldw = model.frame_at(t)
        Qm = double_anisotropy_Q(anisotropy_Z(VariationalFrame(A, B))).M
        return qt, pt, act, ldA, ldw, Qm
    # general model: one orbit per source (slow path, small grids only)
    n = Qg.size
    qt = np.empty(n)
    pt = np.empty(n)
    act = np.empty(n)
    ldA = np.empty(n, dtype=complex)
    ldw = np.empty(n, dtype=complex)
    Qms = np.empty((n, 2, 2), dtype=complex)
    o = opts or FlowOptions()
    for j in range(n):
        b = integrate_characteristics(model, PhasePoint([Qg[j]], [Pg[j]]), t, o)
        i = b.index_of(t)
        qt[j] = b.points[i].q[0]
        pt[j] = b.points[i].p[0]
        act[j] = b.action[i]
        ldA[j] = b.logdetA[i]
        ldw[j] = b.logdet_w[i]
        Qms[j] = double_anisotropy_Q(anisotropy_Z(b.frames[i])).M
    return qt, pt, act, ldA, ldw, Qms


def apply_propagator(Psi0: ComplexField, t: float, model: HamiltonianModel,
                     hbar: float | None = None, out_axes=None,
                     opts: FlowOptions | None = None) -> ComplexField:
    """Propagate a phase-space field: ``Psi(X, t) = integral
    K(X, Y, t) Psi0(Y) dY`` by grid quadrature.

    The output grid is derived automatically — the input support box is
    flowed forward (corners and center) and padded by six packet decay
    widths at spacing ``sqrt(hbar)/4`` — unless ``out_axes=(q, p)``
    overrides it.  The propagation is unitary on analyzed fields, so
    the output norm matches the input norm to quadrature accuracy.
    Emits an Ehrenfest warning when the linearized flow outgrows
    ``hbar^{-1/2}``; never silently truncates a non-decayed input.
    """
    if Psi0.rank != 2:
        raise ConfigurationError("apply_propagator expects a rank-2 field")
    hbar = float(hbar) if hbar is not None else Psi0.hbar
    if t < 0:
        raise ConfigurationError(f"t must be nonnegative, got {t}")
    _warn_if_edge_mass(Psi0)
    qs, ps = Psi0.axes
    w = Psi0.spacing(0) * Psi0.spacing(1)
    QQ, PP = np.meshgrid(qs, ps, indexing="ij")
    mag = np.abs(Psi0.values)
    keep = (mag > 1e-13 * mag.max()).ravel()
    Qg = QQ.ravel()[keep]
    Pg = PP.ravel()[keep]
    Wg = Psi0.values.ravel()[keep] * w

    box = _support_box(Psi0)
    if out_axes is None:
        qo, po = _derive_out_axes(model, box, t, hbar, opts)
    else:
        qo = np.asarray(out_axes[0], dtype=float)
        po = np.asarray(out_axes[1], dtype=float)

    flow_opts = _kernel_opts(model, t, opts)
    qt, pt, act, _ldA, ldw, Qm = _source_data(model, Qg, Pg, t, flow_opts)
    shared = Qm.ndim == 2

    pref = (2 * np.pi * hbar) ** (-1) * 2 ** 0.5
    # source-only phase: Act + (xi.eta - xi_t.eta_t)/2, plus prefactor root
    src = np.exp(1j / hbar * (act + 0.5 * (Pg * Qg - pt * qt))
                 - 0.5 * ldw) * Wg * pref

    Xq = np.repeat(qo, po.size)
    Xp = np.tile(po, qo.size)
    nout = Xq.size
    out = np.empty(nout, dtype=complex)
    chunk = max(1, int(4e6 / max(1, Qg.size)))
    for s in range(0, nout, chunk):
        e = min(nout, s + chunk)
        vq = Xq[s:e, None] - qt[None, :]
        vp = Xp[s:e, None] - pt[None, :]
        if shared:
            quad = 0.5 * (Qm[0, 0] * vq ** 2 + 2 * Qm[0, 1] * vq * vp
                          + Qm[1, 1] * vp ** 2)
        else:
            quad = 0.5 * (Qm[None, :, 0, 0] * vq ** 2
                          + 2 * Qm[None, :, 0, 1] * vq * vp
                          + Qm[None, :, 1, 1] * vp ** 2)
        phase = quad + 0.5 * (Xq[s:e, None] * pt[None, :]
                              - Xp[s:e, None] * qt[None, :])
        out[s:e] = np.exp(1j / hbar * phase) @ src
    _emit_ehrenfest(model, PhasePoint([(box[0] + box[1]) / 2],
                                      [(box[2] + box[3]) / 2]), t, hbar, opts)
    return ComplexField((qo, po), out.reshape(qo.size, po.size), hbar)


def _default_phase_axes(psi0: ComplexField, hbar: float):
    from .transform import _position_support
    x = psi0.axes[0]
    i0, i1 = _position_support(psi0)
    pad = 6 * np.sqrt(hbar)
    qa, qb = float(x[i0]) - pad, float(x[i1]) + pad
    # momentum half-width: local phase-gradient scale plus packet decay
    v = psi0.values
    dx = psi0.spacing()
    dpsi = (v[2:] - v[:-2]) / (2 * dx)
    mag2 = np.abs(v[1:-1]) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        ploc = hbar * np.imag(dpsi * np.conj(v[1:-1])) / np.where(mag2 > 0, mag2, 1)
    mask = mag2 > 1e-8 * mag2.max()
    pscale = float(np.abs(ploc[mask]).max()) if mask.any() else 0.0
    P = max(abs(qa), abs(qb), pscale + pad)
    tgt = np.sqrt(hbar) / 4
    return _axis(qa, qb, tgt), _axis(-P, P, tgt)


def position_space_solution(psi0: ComplexField, t: float,
                            model: HamiltonianModel,
                            hbar: float | None = None,
                            phase_axes=None, out_axis=None,
                            opts: FlowOptions | None = None) -> ComplexField:
    """Evolve a position-space state by packet superposition.

    Analyzes the state into its phase-space field, carries every source
    packet along its orbit (center, width, amplitude, action), and
    resynthesizes ``psi(x, t) = (2 pi hbar)^(-d/2) integral
    Psi0(Y) [propagated packet](x) dY``.  The analysis grid is derived
    from the state's support and local momentum scale unless
    ``phase_axes`` overrides it; the output axis defaults to the input
    axis.
    """
    if psi0.rank != 1:
        raise ConfigurationError("position_space_solution expects a rank-1 field")
    hbar = float(hbar) if hbar is not None else psi0.hbar
    if t < 0:
        raise ConfigurationError(f"t must be nonnegative, got {t}")
    if phase_axes is None:
        phase_axes = _default_phase_axes(psi0, hbar)
    if psi0.hbar != hbar:
        psi0 = ComplexField(psi0.axes, psi0.values, hbar)
    Psi0 = wave_packet_transform(psi0, phase_axes)
    x = np.asarray(out_axis, dtype=float) if out_axis is not None else psi0.axes[0]

    qs, ps = Psi0.axes
    w = Psi0.spacing(0) * Psi0.spacing(1)
    QQ, PP = np.meshgrid(qs, ps, indexing="ij")
    mag = np.abs(Psi0.values)
    keep = (mag > 1e-13 * mag.max()).ravel()
    Qg = QQ.ravel()[keep]
    Pg = PP.ravel()[keep]
    Wg = Psi0.values.ravel()[keep] * w

    flow_opts = _kernel_opts(model, t, opts)
    if model.bulk_flow is not None:
        qt, pt = model.bulk_flow(Qg, Pg, t)
        act = model.bulk_action(Qg, Pg, t)
        A, B, ldA, _ldw = model.frame_at(t)
        z = np.full(Qg.size, (B @ np.linalg.inv(A))[0, 0])
        amp = np.full(Qg.size, np.exp(-0.5 * ldA))
    else:
        n = Qg.size
        qt = np.empty(n)
        pt = np.empty(n)
        act = np.empty(n)
        z = np.empty(n, dtype=complex)
        amp = np.empty(n, dtype=complex)
        for j in range(n):
            b = integrate_characteristics(model, PhasePoint([Qg[j]], [Pg[j]]),
                                          t, flow_opts)
            i = b.index_of(t)
            qt[j] = b.points[i].q[0]
            pt[j] = b.points[i].p[0]
            act[j] = b.action[i]
            z[j] = anisotropy_Z(b.frames[i]).M[0, 0]
            amp[j] = np.exp(-0.5 * b.logdetA[i])

    pref = (np.pi * hbar) ** (-0.25) * (2 * np.pi * hbar) ** (-0.5)
    src = pref * amp * Wg * np.exp(1j / hbar * (act + 0.5 * Pg * Qg))
    out = np.empty(x.size, dtype=complex)
    chunk = max(1, int(4e6 / max(1, Qg.size)))
    for s in range(0, x.size, chunk):
        e = min(x.size, s + chunk)
        dxs = x[s:e, None] - qt[None, :]
        phase = pt[None, :] * dxs + 0.5 * z[None, :] * dxs ** 2
        out[s:e] = np.exp(1j / hbar * phase) @ src
    _emit_ehrenfest(model, PhasePoint([float(np.mean(Qg))], [float(np.mean(Pg))]),
                    t, hbar, opts)
    return ComplexField((x,), out, hbar)


def _imA_zero_count_and_first(times, imA, t):
    """Zeros of Im A on (0, t]: count (Morse index) and earliest zero."""
    nu = 0
    first = None
    prev = imA[1]
    for k in range(2, len(times)):
        cur = imA[k]
        if prev != 0 and (np.sign(cur) != np.sign(prev)) and times[k] <= t + 1e-12:
            nu += 1
            if first is None:
                cross = times[k - 1] + (times[k] - times[k - 1]) * (
                    prev / (prev - cur))
                first = float(cross)
        prev = cur if cur != 0 else prev
    return nu, first


def van_vleck_kernel(x: float, y: float, t: float, model: HamiltonianModel,
                     hbar: float) -> complex:
    """Position-space semiclassical kernel by stationary phase.

    ``K(x, y, t) = sum_r (2 pi i hbar)^(-1/2) |Im A_r(t)|^(-1/2)
    exp{(i/hbar) Act_r - i pi nu_r / 2}`` summed over trajectories from
    y reaching x at time t; ``Im A = dq_t/dp`` in the Hamiltonian
    gauge and ``nu_r`` counts its zeros (focal points) on (0, t].
    Raises a caustic error naming the earliest focal time when the
    endpoint itself is focal.
    """
    if model.dim != 1:
        raise ConfigurationError("van_vleck_kernel supports d = 1 only")
    if t <= 0:
        raise ConfigurationError(f"t must be positive, got {t}")
    x = float(x)
    y = float(y)

    kind = model.kind
    roots: list[float] = []
    if kind == "free":
        roots = [(x - y) / (2 * t)]
    elif kind == "linear":
        roots = [(x - y + t ** 2) / (2 * t)]
    elif kind == "harmonic":
        s = np.sin(2 * t)
        if abs(s) < 1e-10:
            raise CausticError(
                "endpoint lies on a focal surface of the harmonic flow",
                t_star=float(np.pi / 2))
        roots = [(x - y * np.cos(2 * t)) / s]
    else:
        roots = _scan_roots(model, x, y, t)
        if not roots:
            raise ConfigurationError(
                f"no trajectory from y={y} reaches x={x} at t={t} within "
                "the scan window")

    total = 0.0j
    for p0 in roots:
        bundle = integrate_characteristics(
            model, PhasePoint([y], [p0]), t,
            FlowOptions(step=min(1e-3, t / 16)) if model.frame_at is None
            else FlowOptions(step=t / 256))
        i = bundle.index_of(bundle.times[-1])
        imA = np.array([f.A[0, 0].imag for f in bundle.frames])
        imA_t = imA[i]
        if abs(imA_t) < 1e-8 * max(1.0, abs(bundle.frames[i].A[0, 0])):
            _nu, first = _imA_zero_count_and_first(bundle.times, imA, t)
            raise CausticError(
                "trajectory endpoint is focal (Im A vanishes)",
                t_star=first if first is not None else t)
        nu, _first = _imA_zero_count_and_first(bundle.times, imA, t)
        amp = (2 * np.pi * hbar) ** -0.5 * np.exp(-0.25j * np.pi) / np.sqrt(abs(imA_t))
        total += amp * np.exp(1j / hbar * bundle.action[i] - 0.5j * np.pi * nu)
    return complex(total)


def _scan_roots(model, x, y, t):
    """Bracket-and-solve on p0 -> q_t(y, p0) - x for general models."""
    from scipy.optimize import brentq

    def g(p0):
        b = integrate_characteristics(model, PhasePoint([y], [p0]), t,
                                      FlowOptions(step=max(t / 400, 1e-3)))
        return b.points[-1].q[0] - x

    center = (x - y) / (2 * t)
    width = max(4.0, 2 * abs(x - y) / max(t, 1e-2))
    grid = np.linspace(center - width, center + width, 41)
    vals = np.array([g(p) for p in grid])
    roots = []
    for k in range(len(grid) - 1):
        if np.sign(vals[k]) != np.sign(vals[k + 1]):
            roots.append(float(brentq(g, grid[k], grid[k + 1], xtol=1e-12)))
    return roots
