from __future__ import annotations

import numpy as np
import pytest

from phaseprop import (
    ComplexField,
    ConfigurationError,
    PhasePoint,
    SpacingWarning,
    TruncationError,
    bergmann_kernel,
    fock_bargmann_residual,
    gaussian_packet,
    husimi_check,
    inverse_transform,
    overlap,
    wave_packet_transform,
    write_field_csv,
)
from phaseprop.oracles import exact_phase_field

HBAR = 0.1


def packet_state(q0: float, p0: float, hbar: float = HBAR) -> ComplexField:
    x = np.linspace(-6.0, 6.0, 1201)
    return ComplexField((x,), gaussian_packet(PhasePoint(q0, p0), hbar, x), hbar)


def phase_axes(lo: float, hi: float, n: int):
    return np.linspace(lo, hi, n), np.linspace(lo, hi, n)


def test_packet_is_normalized_and_peaks_at_center():
    psi = packet_state(0.4, -0.3)
    dx = psi.spacing()
    assert np.sum(np.abs(psi.values) ** 2) * dx == pytest.approx(1.0, abs=1e-12)
    x = psi.axes[0]
    at_center = abs(psi.values[np.argmin(np.abs(x - 0.4))])
    assert at_center == pytest.approx((np.pi * HBAR) ** -0.25, rel=1e-6)


def test_overlap_closed_form_and_self_normalization():
    X = PhasePoint(0.4, -0.3)
    Y = PhasePoint(-0.2, 0.5)
    assert overlap(X, X, HBAR) == pytest.approx(1.0)
    got = overlap(X, Y, HBAR)
    sym = 0.4 * 0.5 - (-0.3) * (-0.2)
    dist = (0.4 + 0.2) ** 2 + (-0.3 - 0.5) ** 2
    want = np.exp(0.5j * sym / HBAR - dist / (4 * HBAR))
    assert abs(got - want) < 1e-15
    # matches the quadrature inner product of the two packets
    x = np.linspace(-6.0, 6.0, 2401)
    gx = gaussian_packet(X, HBAR, x)
    gy = gaussian_packet(Y, HBAR, x)
    quad = np.sum(np.conj(gx) * gy) * (x[1] - x[0])
    assert abs(quad - want) < 1e-12


def test_bergmann_kernel_prefactor():
    X = PhasePoint(0.1, 0.2)
    Y = PhasePoint(0.3, -0.1)
    assert bergmann_kernel(X, Y, HBAR) == pytest.approx(
        overlap(X, Y, HBAR) / (2 * np.pi * HBAR))


def test_analysis_of_packet_matches_overlap_formula():
    X0 = PhasePoint(0.4, -0.3)
    psi = packet_state(0.4, -0.3)
    qs, ps = phase_axes(-2.5, 2.5, 91)
    Psi = wave_packet_transform(psi, (qs, ps))
    pref = (2 * np.pi * HBAR) ** -0.5
    want = np.empty((qs.size, ps.size), dtype=complex)
    for i, q in enumerate(qs):
        for j, p in enumerate(ps):
            want[i, j] = pref * overlap(PhasePoint(q, p), X0, HBAR)
    err = np.abs(Psi.values - want).max() / np.abs(want).max()
    assert err < 1e-10


def test_plancherel_and_round_trip():
    # a two-packet superposition exercises interference terms
    x = np.linspace(-6.0, 6.0, 1201)
    v = gaussian_packet(PhasePoint(-0.8, 0.4), HBAR, x) \
        + gaussian_packet(PhasePoint(0.8, -0.2), HBAR, x)
    psi = ComplexField((x,), v, HBAR)
    qs, ps = np.linspace(-4.5, 4.5, 163), np.linspace(-4.5, 4.5, 163)
    Psi = wave_packet_transform(psi, (qs, ps))
    assert Psi.l2_norm() == pytest.approx(psi.l2_norm(), abs=1e-5)
    back = inverse_transform(Psi, x)
    err = np.abs(back.values - psi.values).max() / np.abs(psi.values).max()
    assert err < 1e-5


def test_analyticity_residual_scales_as_h_squared():
    # central-difference residual of an exactly analyzed field is
    # C h^2; halving the spacing divides it by ~4
    res = []
    for n in (81, 161):
        axes = phase_axes(-4.0, 4.0, n)
        f = exact_phase_field("free", axes, 0.0, HBAR)
        res.append(fock_bargmann_residual(f))
    ratio = res[0] / res[1]
    assert 3.0 < ratio < 5.5


def test_analyticity_residual_flags_generic_fields():
    axes = phase_axes(-4.0, 4.0, 321)
    f = exact_phase_field("free", axes, 0.0, HBAR)
    good = fock_bargmann_residual(f)
    bad = fock_bargmann_residual(ComplexField(axes, np.conj(f.values), HBAR))
    assert bad > 100 * good


def test_husimi_cross_validation_on_packet():
    psi = packet_state(0.2, 0.4)
    hus, conv, max_diff = husimi_check(psi)
    assert max_diff < 1e-3
    assert hus.values.shape == conv.values.shape
    # Husimi of a packet peaks at its center
    qs, ps = hus.axes
    i, j = np.unravel_index(np.argmax(np.abs(hus.values)), hus.values.shape)
    assert abs(qs[i] - 0.2) < 0.1 and abs(ps[j] - 0.4) < 0.1


def test_truncation_guard_fires_for_clipped_state():
    psi = packet_state(5.8, 0.0)
    with pytest.raises(TruncationError):
        wave_packet_transform(psi, phase_axes(-2.0, 2.0, 73))


def test_spacing_warning_on_coarse_grids():
    psi = packet_state(0.0, 0.0)
    with pytest.warns(SpacingWarning):
        wave_packet_transform(psi, phase_axes(-2.0, 2.0, 21))


def test_field_validation():
    with pytest.raises(ConfigurationError):
        ComplexField((np.array([0.0, 1.0, 1.5]),), np.zeros(3), HBAR)  # non-uniform
    with pytest.raises(ConfigurationError):
        ComplexField((np.array([0.0, 1.0]),), np.zeros(3), HBAR)  # length mismatch
    with pytest.raises(ConfigurationError):
        ComplexField((np.array([0.0, 1.0]),), np.zeros(2), -1.0)  # bad hbar
    with pytest.raises(ConfigurationError):
        x = np.linspace(0, 1, 4)
        ComplexField((x,), np.zeros((4, 4)), HBAR)  # rank mismatch


def test_csv_dump_is_deterministic(tmp_path):
    x = np.linspace(-1.0, 1.0, 11)
    f = ComplexField((x,), gaussian_packet(PhasePoint(0.0, 0.5), HBAR, x), HBAR)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    meta1 = write_field_csv(f, p1)
    meta2 = write_field_csv(f, p2)
    assert p1.read_bytes() == p2.read_bytes()
    head = p1.read_text().splitlines()[0]
    assert head == "x,re,im"
    assert meta1["axes"][0]["count"] == 11
    assert meta1["norm"] == meta2["norm"]
    assert meta1["hbar"] == HBAR
