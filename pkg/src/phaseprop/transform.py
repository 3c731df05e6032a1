"""Wave-packet analysis and synthesis between position and phase space.

A position-space state ``psi(x)`` maps to a phase-space field
``Psi(q, p)`` by pairing against a coherent Gaussian packet family;
the map is an isometry onto a reproducing-kernel subspace (the twisted
Fock--Bargmann space), and its left inverse superposes the same packets
against ``Psi``.  All quadratures are plain uniform-grid Riemann sums,
which converge spectrally for the smooth decaying integrands used here.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigurationError, SpacingWarning, TruncationError)
from .models import PhasePoint

__all__ = [
    "ComplexField", "gaussian_packet", "wave_packet_transform",
    "inverse_transform", "overlap", "bergmann_kernel",
    "fock_bargmann_residual", "husimi_check", "write_field_csv",
    "field_metadata",
]


@dataclass(frozen=True)
class ComplexField:
    """Complex scalar samples on a uniform rectangular grid.

    ``axes`` holds one strictly increasing, uniformly spaced coordinate
    array per dimension; ``values[i, j, ...]`` is the sample at
    ``(axes[0][i], axes[1][j], ...)``.  Rank 1 is a position-space
    state, rank 2 a phase-space field over ``(q, p)``.
    """

    axes: tuple
    values: np.ndarray
    hbar: float

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=complex)
        if len(axes) != values.ndim:
            raise ConfigurationError(
                f"field has {len(axes)} axes but values of rank {values.ndim}")
        for k, a in enumerate(axes):
            if a.ndim != 1 or a.size < 2:
                raise ConfigurationError(f"axis {k} must be 1-D with >= 2 nodes")
            if a.size != values.shape[k]:
                raise ConfigurationError(
                    f"axis {k} has {a.size} nodes, values expect {values.shape[k]}")
            d = np.diff(a)
            if d.min() <= 0 or (d.max() - d.min()) > 1e-9 * d.mean():
                raise ConfigurationError(f"axis {k} must be uniform increasing")
        if not (self.hbar > 0):
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def rank(self) -> int:
        return len(self.axes)

    def spacing(self, k: int = 0) -> float:
        a = self.axes[k]
        return float((a[-1] - a[0]) / (a.size - 1))

    def cell(self) -> float:
        """Volume of one grid cell."""
        out = 1.0
        for k in range(self.rank):
            out *= self.spacing(k)
        return out

    def l2_norm(self) -> float:
        """L2 norm with the plain Lebesgue measure (the analysis map is
        an isometry, so phase fields use the same measure)."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell()))


def gaussian_packet(center: PhasePoint, hbar: float, x) -> np.ndarray:
    """Coherent Gaussian packet centered at a phase point, sampled at x.

    ``G(x) = (pi hbar)^(-d/4) exp{(i/hbar)(p.q/2 + p.(x-q)
    + (i/2)|x-q|^2)}`` — unit L2 norm for every center.  For d = 1,
    ``x`` may be any array and is mapped elementwise; for d > 1 the
    last axis of ``x`` indexes components.
    """
    q, p, d = center.q, center.p, center.d
    x = np.asarray(x, dtype=float)
    if d == 1:
        dxq = x - q[0]
        phase = p[0] * q[0] / 2 + p[0] * dxq + 0.5j * dxq ** 2
    else:
        if x.shape[-1] != d:
            raise ConfigurationError(
                f"x last axis must have length d={d}, got shape {x.shape}")
        dxq = x - q
        phase = (p @ q) / 2 + dxq @ p + 0.5j * np.sum(dxq ** 2, axis=-1)
    return (np.pi * hbar) ** (-d / 4) * np.exp(1j / hbar * phase)


def _check_boundary(values: np.ndarray, rel: float, what: str) -> None:
    peak = float(np.abs(values).max())
    if peak == 0.0:
        raise ConfigurationError(f"{what} is identically zero")
    edge = 0.0
    for k in range(values.ndim):
        sl = [slice(None)] * values.ndim
        for end in (0, -1):
            sl[k] = end
            edge = max(edge, float(np.abs(values[tuple(sl)]).max()))
    if edge > rel * peak:
        raise TruncationError(
            f"{what} does not decay at the grid boundary "
            f"(edge/peak = {edge / peak:.3e} > {rel:g}); enlarge the grid",
            boundary_mass=edge / peak)


def _check_spacing(dx: float, hbar: float, what: str) -> None:
    if dx > np.sqrt(hbar) / 4 * (1 + 1e-12):
        warnings.warn(
            f"{what} spacing {dx:.4g} exceeds sqrt(hbar)/4 = "
            f"{np.sqrt(hbar) / 4:.4g}; packet quadratures lose accuracy",
            SpacingWarning, stacklevel=3)


def wave_packet_transform(psi: ComplexField, phase_grid) -> ComplexField:
    """Analyze a position-space state into its phase-space field.

    ``Psi(q, p) = (2 pi hbar)^(-d/2) integral conj(G_(q,p))(x) psi(x) dx``
    evaluated on the tensor grid ``phase_grid = (q_axis, p_axis)``.
    The state must decay below 1e-12 of its peak at the position-grid
    boundary; spacings beyond ``sqrt(hbar)/4`` trigger a warning.
    """
    if psi.rank != 1:
        raise ConfigurationError("wave_packet_transform expects a rank-1 field")
    hbar = psi.hbar
    x = psi.axes[0]
    dx = psi.spacing()
    _check_boundary(psi.values, 1e-12, "position-space state")
    _check_spacing(dx, hbar, "position grid")
    qs = np.asarray(phase_grid[0], dtype=float)
    ps = np.asarray(phase_grid[1], dtype=float)
    for a, nm in ((qs, "q"), (ps, "p")):
        if a.ndim != 1 or a.size < 2:
            raise ConfigurationError(f"{nm} axis must be 1-D with >= 2 nodes")
    _check_spacing(float(qs[1] - qs[0]), hbar, "q grid")
    _check_spacing(float(ps[1] - ps[0]), hbar, "p grid")
    pref = (np.pi * hbar) ** (-0.25) * (2 * np.pi * hbar) ** (-0.5) * dx
    out = np.empty((qs.size, ps.size), dtype=complex)
    # conj(G)(x) = (pi hbar)^(-1/4) exp{-(x-q)^2/(2 hbar)} *
    #              exp{-(i/hbar)(p q/2 + p (x - q))}
    for i, q in enumerate(qs):
        g = np.exp(-(x - q) ** 2 / (2 * hbar)) * psi.values
        ph = np.exp(-1j / hbar * np.outer(ps, x - q))
        out[i] = pref * np.exp(-1j * ps * q / (2 * hbar)) * (ph @ g)
    return ComplexField((qs, ps), out, hbar)


def inverse_transform(Psi: ComplexField, position_grid) -> ComplexField:
    """Synthesize a position-space state from a phase-space field.

    ``psi(x) = (2 pi hbar)^(-d/2) integral Psi(q, p) G_(q,p)(x) dq dp``.
    The field must decay below 1e-10 of its peak at the phase-grid
    boundary.
    """
    if Psi.rank != 2:
        raise ConfigurationError("inverse_transform expects a rank-2 field")
    hbar = Psi.hbar
    _check_boundary(Psi.values, 1e-10, "phase-space field")
    qs, ps = Psi.axes
    x = np.asarray(position_grid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ConfigurationError("position grid must be 1-D with >= 2 nodes")
    dq, dp = Psi.spacing(0), Psi.spacing(1)
    pref = (np.pi * hbar) ** (-0.25) * (2 * np.pi * hbar) ** (-0.5) * dq * dp
    out = np.zeros(x.size, dtype=complex)
    # G_(q,p)(x) = (pi hbar)^(-1/4) exp{-(x-q)^2/(2 hbar)} *
    #              exp{(i/hbar)(p q/2 + p (x - q))}
    for i, q in enumerate(qs):
        row = Psi.values[i] * np.exp(1j * ps * q / (2 * hbar))
        ph = np.exp(1j / hbar * np.outer(x - q, ps))
        out += np.exp(-(x - q) ** 2 / (2 * hbar)) * (ph @ row)
    return ComplexField((x,), pref * out, hbar)


def overlap(X: PhasePoint, Y: PhasePoint, hbar: float) -> complex:
    """Inner product of two unit packets, ``<G_X, G_Y>``.

    Equals ``exp{(i/hbar)(X.JY/2)} exp{-(|q-eta|^2+|p-xi|^2)/(4 hbar)}``
    with the pairing ``X.JY = q.xi - p.eta`` for ``X=(q,p), Y=(eta,xi)``.
    """
    q, p = X.q, X.p
    eta, xi = Y.q, Y.p
    sym = float(q @ xi - p @ eta)
    dist = float(np.sum((q - eta) ** 2) + np.sum((p - xi) ** 2))
    return complex(np.exp(0.5j * sym / hbar - dist / (4 * hbar)))


def bergmann_kernel(X: PhasePoint, Y: PhasePoint, hbar: float) -> complex:
    """Reproducing kernel of the analyzed subspace:
    ``b(X, Y) = (2 pi hbar)^(-d) <G_X, G_Y>``."""
    return (2 * np.pi * hbar) ** (-X.d) * overlap(X, Y, hbar)


def fock_bargmann_residual(Psi: ComplexField) -> float:
    """Peak-normalized residual of the analyticity constraint.

    Analyzed fields satisfy ``((q - ip)/2) Psi - i hbar dPsi/dp
    + hbar dPsi/dq = 0`` identically; the residual is evaluated with
    central differences on interior nodes only and normalized by the
    field's peak modulus.  Decays as O(h^2) for true analyzed fields
    and stays O(1) for generic fields.
    """
    if Psi.rank != 2:
        raise ConfigurationError("fock_bargmann_residual expects a rank-2 field")
    qs, ps = Psi.axes
    v = Psi.values
    hbar = Psi.hbar
    dq, dp = Psi.spacing(0), Psi.spacing(1)
    dv_dq = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dq)
    dv_dp = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * dp)
    Q = qs[1:-1, None]
    P = ps[None, 1:-1]
    res = (Q - 1j * P) / 2 * v[1:-1, 1:-1] - 1j * hbar * dv_dp + hbar * dv_dq
    return float(np.abs(res).max() / np.abs(v).max())


def _position_support(psi: ComplexField, rel: float = 1e-6):
    """Index range where the state exceeds ``rel`` of its peak."""
    mag = np.abs(psi.values)
    idx = np.nonzero(mag > rel * mag.max())[0]
    return int(idx[0]), int(idx[-1])


def _default_husimi_grid(psi: ComplexField):
    x = psi.axes[0]
    dx = psi.spacing()
    hbar = psi.hbar
    i0, i1 = _position_support(psi)
    pad = 6 * np.sqrt(hbar)
    lo = max(float(x[0]), float(x[i0]) - pad)
    hi = min(float(x[-1]), float(x[i1]) + pad)
    i0 = int(np.searchsorted(x, lo - 1e-12))
    i1 = int(np.searchsorted(x, hi + 1e-12)) - 1
    stride = max(1, int(np.floor((np.sqrt(hbar) / 4) / dx)))
    iq = np.arange(i0, i1 + 1, stride)
    # local momentum scale from the phase gradient on the support
    v = psi.values
    core = slice(max(1, i0), min(v.size - 1, i1 + 1))
    dpsi = (v[2:] - v[:-2]) / (2 * dx)
    mag2 = np.abs(v[1:-1]) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        ploc = hbar * np.imag(dpsi * np.conj(v[1:-1])) / np.where(mag2 > 0, mag2, 1)
    mask = mag2 > 1e-8 * mag2.max()
    pscale = float(np.abs(ploc[mask]).max()) if mask.any() else 0.0
    P = pscale + 6 * np.sqrt(hbar)
    nyq = np.pi * hbar / (2 * dx)
    if P > nyq:
        warnings.warn(
            f"position spacing {dx:.4g} resolves momenta only up to "
            f"{nyq:.4g} < requested {P:.4g}; clipping the p grid",
            SpacingWarning, stacklevel=3)
        P = nyq
    npts = int(np.ceil(2 * P / (np.sqrt(hbar) / 4))) + 1
    ps = np.linspace(-P, P, max(npts, 9))
    return iq, ps


def husimi_check(psi: ComplexField, phase_grid=None):
    """Cross-validate the analyzed field against the smoothed Wigner
    function of the same state.

    Computes the Husimi density ``|Psi(q, p)|^2`` from the analysis map
    and, independently, the Wigner function of ``psi`` convolved with
    the unit Gaussian ``g(q, p) = (pi hbar)^(-1) exp{-(q^2+p^2)/hbar}``;
    the two agree identically in exact arithmetic.  Returns
    ``(husimi, convolved_wigner, max_diff)`` with ``max_diff`` the
    peak-normalized maximum discrepancy.

    The q axis is taken on position-grid nodes (required by the Wigner
    quadrature); with ``phase_grid=None`` both axes are derived from
    the state's support and local momentum scale.
    """
    if psi.rank != 1:
        raise ConfigurationError("husimi_check expects a rank-1 field")
    x = psi.axes[0]
    v = psi.values
    dx = psi.spacing()
    hbar = psi.hbar
    if phase_grid is None:
        iq, ps = _default_husimi_grid(psi)
    else:
        qs_req = np.asarray(phase_grid[0], dtype=float)
        ps = np.asarray(phase_grid[1], dtype=float)
        iq = np.searchsorted(x, qs_req - 1e-9)
        if np.abs(x[np.clip(iq, 0, x.size - 1)] - qs_req).max() > 1e-9:
            raise ConfigurationError(
                "husimi_check q axis must lie on position-grid nodes")
    qs = x[iq]
    Psi = wave_packet_transform(psi, (qs, ps))
    husimi = np.abs(Psi.values) ** 2

    # Wigner function W(q_i, p) = (2 pi hbar)^(-1) * 2 dx *
    #   sum_j exp(-i p (2 dx j)/hbar) psi[i+j] conj(psi)[i-j]
    nx = x.size
    jmax_g = int(min(iq.max(), nx - 1 - iq.min()))
    js = np.arange(-jmax_g, jmax_g + 1)
    E = np.exp(-1j * np.outer(ps, 2 * dx * js) / hbar)
    W = np.empty((qs.size, ps.size))
    for k, i in enumerate(iq):
        jm = int(min(i, nx - 1 - i))
        sl = slice(jmax_g - jm, jmax_g + jm + 1)
        jw = js[sl]
        prod = v[i + jw] * np.conj(v[i - jw])
        W[k] = (2 * dx) / (2 * np.pi * hbar) * np.real(E[:, sl] @ prod)

    dq = float(qs[1] - qs[0])
    dp = float(ps[1] - ps[0])
    Gq = np.exp(-np.subtract.outer(qs, qs) ** 2 / hbar)
    Gp = np.exp(-np.subtract.outer(ps, ps) ** 2 / hbar)
    conv = (dq * dp) / (np.pi * hbar) * (Gq @ W @ Gp.T)
    max_diff = float(np.abs(husimi - conv).max() / husimi.max())
    hus_f = ComplexField((qs, ps), husimi.astype(complex), hbar)
    conv_f = ComplexField((qs, ps), conv.astype(complex), hbar)
    return hus_f, conv_f, max_diff


_AXIS_NAMES = {1: ("x",), 2: ("q", "p")}


def field_metadata(field: ComplexField, **extra) -> dict:
    """JSON-ready description of a field: axes, hbar, and L2 norm."""
    names = _AXIS_NAMES.get(field.rank, tuple(f"axis{k}" for k in range(field.rank)))
    meta = {
        "axes": [
            {"name": names[k], "min": float(a[0]), "max": float(a[-1]),
             "count": int(a.size)}
            for k, a in enumerate(field.axes)
        ],
        "hbar": float(field.hbar),
        "norm": field.l2_norm(),
    }
    meta.update(extra)
    return meta


def write_field_csv(field: ComplexField, path) -> dict:
    """Write a field as CSV (one row per node, C order) and return its
    metadata dict.

    The header is a fixed function of the rank — ``x,re,im`` for states,
    ``q,p,re,im`` for phase fields — and values are printed with
    repr-exact precision so identical runs produce identical bytes.
    """
    names = _AXIS_NAMES.get(field.rank, tuple(f"axis{k}" for k in range(field.rank)))
    coords = np.meshgrid(*field.axes, indexing="ij")
    flat = [c.ravel() for c in coords]
    vals = field.values.ravel()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + ",re,im\n")
        for row in range(vals.size):
            cells = [format(float(c[row]), ".17g") for c in flat]
            cells.append(format(float(vals[row].real), ".17g"))
            cells.append(format(float(vals[row].imag), ".17g"))
            fh.write(",".join(cells) + "\n")
    return field_metadata(field, path=str(path))
