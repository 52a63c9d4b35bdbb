import numpy as np
import pytest

import jumpphase as jp
from jumpphase.spin import (AreaDecomposition, BlochPath, SpinHalfConfig,
                            bloch_from_state, bloch_path_from_record,
                            build_model, decay_no_jump_reference,
                            dephasing_phase, flip_partial_areas, initial_state,
                            preset, sigma_axis, solid_angle)
from jumpphase.trajectory import run_prescribed

TWO_PI = 2.0 * np.pi


def test_preset_parameters():
    cfg = preset("dephasing")
    assert cfg.lambda_dephase ** 2 == pytest.approx(0.1)
    assert cfg.alpha_decay == 0.0
    cfg = preset("decay")
    assert cfg.alpha_decay == pytest.approx(0.05)
    cfg = preset("dephasing+decay")
    assert cfg.lambda_dephase > 0 and cfg.alpha_decay > 0
    cfg = preset("spinflip")
    assert cfg.flip_axis == (1.0, 0.0, 0.0)
    cfg = preset("decay", alpha_decay=0.2, theta=0.5)
    assert cfg.alpha_decay == 0.2 and cfg.theta == 0.5
    with pytest.raises(ValueError, match="unknown preset"):
        preset("closed")


def test_config_validation():
    with pytest.raises(ValueError):
        SpinHalfConfig(lambda_dephase=-1.0)
    with pytest.raises(ValueError):
        SpinHalfConfig(theta=3.5)
    with pytest.raises(ValueError):
        SpinHalfConfig(phi=-0.1)
    with pytest.raises(ValueError, match="unit norm"):
        SpinHalfConfig(flip_axis=(1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        SpinHalfConfig(omega=0.0).period


def test_build_model_channels():
    m = build_model(preset("dephasing+decay"))
    assert m.labels == ("dephase", "decay")
    assert np.allclose(m.hamiltonian, 0.5 * np.diag([1.0, -1.0]))
    assert np.allclose(m.jump_ops[0], np.sqrt(0.1) * np.diag([1.0, -1.0]))
    assert np.allclose(m.jump_ops[1], 0.05 * np.array([[0, 0], [1, 0]]))
    f = build_model(preset("spinflip", flip_strength=0.7))
    assert f.labels == ("flip",)
    assert np.allclose(f.jump_ops[0], 0.7 * np.array([[0, 1], [1, 0]]))


def test_degenerate_model_warns(caplog):
    import logging
    with caplog.at_level(logging.WARNING):
        build_model(SpinHalfConfig(omega=0.0))
    assert any("degenerate" in r.message for r in caplog.records)


def test_sigma_axis_is_involutory():
    rng = np.random.default_rng(2)
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    s = sigma_axis(v)
    assert np.allclose(s @ s, np.eye(2))
    assert np.allclose(s, s.conj().T)


def test_initial_state_bloch_round_trip():
    rng = np.random.default_rng(9)
    for _ in range(20):
        theta = rng.uniform(0.0, np.pi)
        phi = rng.uniform(0.0, TWO_PI)
        cfg = SpinHalfConfig(theta=theta, phi=phi)
        x, y, z = bloch_from_state(initial_state(cfg))
        assert x == pytest.approx(np.sin(theta) * np.cos(phi), abs=1e-12)
        assert y == pytest.approx(np.sin(theta) * np.sin(phi), abs=1e-12)
        assert z == pytest.approx(np.cos(theta), abs=1e-12)


def test_bloch_from_state_validation():
    with pytest.raises(ValueError, match="dimension 2"):
        bloch_from_state(np.ones(3))


def test_bloch_path_invariants():
    with pytest.raises(ValueError, match="strictly increasing"):
        BlochPath(times=np.array([0.0, 0.0]), points=np.zeros((2, 3)))
    with pytest.raises(ValueError, match="unit ball"):
        BlochPath(times=np.array([0.0, 1.0]),
                  points=np.array([[0, 0, 1.0], [0, 0, 1.1]]))


def test_solid_angle_octant():
    octant = np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0]])
    assert abs(solid_angle(octant) - np.pi / 2) < 1e-12
    # reversing the traversal negates the signed area
    assert abs(solid_angle(octant[::-1]) + np.pi / 2) < 1e-12


def test_solid_angle_latitude_circle():
    for theta in (np.pi / 6, np.pi / 3, 1.5):
        phis = np.linspace(0.0, TWO_PI, 4001)[:-1]
        pts = np.stack([np.sin(theta) * np.cos(phis),
                        np.sin(theta) * np.sin(phis),
                        np.full_like(phis, np.cos(theta))], axis=1)
        target = TWO_PI * (1.0 - np.cos(theta))
        assert abs(solid_angle(pts) - target) < 1e-5


def test_solid_angle_large_cap_returns_complement():
    # below the equator the cap exceeds a hemisphere; the fan reports the
    # same area modulo 4*pi via the negatively oriented complement cap
    theta = 1.9
    phis = np.linspace(0.0, TWO_PI, 4001)[:-1]
    pts = np.stack([np.sin(theta) * np.cos(phis),
                    np.sin(theta) * np.sin(phis),
                    np.full_like(phis, np.cos(theta))], axis=1)
    target = TWO_PI * (1.0 - np.cos(theta))
    assert abs(solid_angle(pts) - (target - 4.0 * np.pi)) < 1e-5


def test_solid_angle_degenerate_arc_is_zero():
    # an open meridian arc closed geodesically encloses nothing
    thetas = np.linspace(0.1, 2.0, 50)
    pts = np.stack([np.sin(thetas), np.zeros_like(thetas), np.cos(thetas)],
                   axis=1)
    assert abs(solid_angle(pts)) < 1e-12


def test_solid_angle_accepts_interior_points_by_projection():
    octant = 0.5 * np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0]])
    assert abs(solid_angle(octant) - np.pi / 2) < 1e-12


def test_solid_angle_errors():
    with pytest.raises(ValueError):
        solid_angle(np.array([[0, 0, 1.0], [1.0, 0, 0]]))
    with pytest.raises(ValueError, match="antipodal"):
        solid_angle(np.array([[0, 0, 1.0], [0, 0, -1.0], [1.0, 0, 0]]))
    with pytest.raises(ValueError, match="antipodal"):
        solid_angle(np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 0, -1.0]]))
    with pytest.raises(ValueError, match="zero"):
        solid_angle(np.array([[0, 0, 1.0], [0, 0, 0], [1.0, 0, 0]]))
    path = np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0]])
    with pytest.raises(ValueError, match="return"):
        solid_angle(path, close_geodesically=False)


def test_dephasing_phase_formula():
    assert dephasing_phase(0.0) == 0.0
    assert dephasing_phase(np.pi / 2) == pytest.approx(np.pi)
    assert dephasing_phase(np.pi) == pytest.approx(TWO_PI)
    with pytest.raises(ValueError):
        dephasing_phase(-0.1)


def test_decay_reference_grid_against_pipeline():
    """Frozen oracle cross-check: closed-form decay propagation vs the
    generic effective-Hamiltonian pipeline, over the published grid."""
    for rate_ratio in (0.01, 0.05, 0.1):
        for theta in (np.pi / 6, np.pi / 3, np.pi / 2, 2 * np.pi / 3):
            cfg = SpinHalfConfig(alpha_decay=np.sqrt(rate_ratio), theta=theta)
            ref = decay_no_jump_reference(cfg, TWO_PI)
            pipe = jp.no_jump_phase(build_model(cfg), initial_state(cfg),
                                    0.0, TWO_PI).geometric_phase
            # circular: closure overlaps near the -pi/+pi cut can land the
            # unwrapped values a clean 2*pi apart
            assert jp.circular_distance(pipe, ref) < 1e-8, (rate_ratio, theta)


def test_decay_reference_small_alpha_limit():
    for theta in (np.pi / 6, np.pi / 3, np.pi / 2):
        prev = None
        for alpha in (0.2, 0.1, 0.05, 0.025):
            cfg = SpinHalfConfig(alpha_decay=alpha, theta=theta)
            gap = jp.circular_distance(decay_no_jump_reference(cfg, TWO_PI),
                                       dephasing_phase(theta))
            assert gap < 10.0 * alpha ** 2 * TWO_PI
            if prev is not None:
                # the correction shrinks roughly like alpha^2
                assert gap < 0.3 * prev
            prev = gap


def test_decay_reference_preconditions():
    with pytest.raises(ValueError):
        decay_no_jump_reference(SpinHalfConfig(), TWO_PI)  # alpha = 0
    with pytest.raises(ValueError):
        decay_no_jump_reference(
            SpinHalfConfig(alpha_decay=0.1, lambda_dephase=0.1), TWO_PI)
    with pytest.raises(ValueError):
        decay_no_jump_reference(SpinHalfConfig(alpha_decay=0.1), -1.0)


def test_flip_partial_areas_no_jump_reduces_to_cap():
    spin = preset("dephasing", theta=np.pi / 3)
    m = build_model(spin)
    rec = run_prescribed(m, initial_state(spin), TWO_PI, [], mode="exact",
                         n_steps=4000)
    dec = flip_partial_areas(rec)
    assert isinstance(dec, AreaDecomposition)
    assert len(dec.segment_areas) == 1
    g0 = jp.no_jump_phase(m, initial_state(spin), 0.0, TWO_PI).geometric_phase
    assert jp.circular_distance(dec.half_sum, g0) < 1e-6


def test_flip_partial_areas_two_lobes_sum_to_cap():
    """One dephasing flip splits the closed path into two lobes whose signed
    areas still add up to the full spherical cap."""
    spin = preset("dephasing", theta=np.pi / 3)
    m = build_model(spin)
    rec = run_prescribed(m, initial_state(spin), TWO_PI, [(2.2, 1)],
                         mode="exact", n_steps=10000)
    dec = flip_partial_areas(rec)
    assert len(dec.segment_areas) == 2
    cap = TWO_PI * (1 - np.cos(np.pi / 3))
    assert jp.circular_distance(dec.signed_sum, cap) < 1e-2
    bd = jp.trajectory_phase(rec, m)
    assert jp.circular_distance(dec.half_sum, bd.geometric_phase) < 5e-3


def test_area_phase_duality_full_path_random_trajectories():
    """The geometric phase of any unital trajectory is half the signed area
    of the full Bloch path, with jump discontinuities bridged by the
    geodesics the fan triangulation inserts between consecutive samples."""
    rng = np.random.default_rng(17)
    for name, theta in (("dephasing", np.pi / 3), ("dephasing", 2 * np.pi / 3),
                        ("spinflip", np.pi / 3), ("spinflip", 2.0)):
        spin = preset(name, theta=theta, phi=0.3)
        m = build_model(spin)
        p = initial_state(spin)
        k = int(rng.integers(1, 5))
        times = np.sort(rng.uniform(0.05, 0.95, size=k)) * TWO_PI
        rec = run_prescribed(m, p, TWO_PI, [(float(t), 1) for t in times],
                             mode="exact", n_steps=10000)
        try:
            bd = jp.trajectory_phase(rec, m)
        except jp.PhaseUndefinedError:
            continue  # equator jump phases can be genuinely undefined
        half = 0.5 * solid_angle(bloch_path_from_record(rec).points)
        assert jp.circular_distance(half, bd.geometric_phase) < 5e-3


def test_flip_partial_areas_equator_flips_any_count():
    """On the equator the per-lobe decomposition stays exact for any number
    of flips: every lobe is a flat multiple of 2*pi."""
    spin = preset("spinflip", theta=np.pi / 2, phi=0.0)
    m = build_model(spin)
    p = initial_state(spin)
    for jumps in ([2.2], [1.1, 3.3], [1.1, 3.3, 4.7]):
        rec = run_prescribed(m, p, TWO_PI, [(t, 1) for t in jumps],
                             mode="exact", n_steps=20000)
        bd = jp.trajectory_phase(rec, m)
        dec = flip_partial_areas(rec)
        assert jp.circular_distance(dec.half_sum, bd.geometric_phase) < 1e-9


def test_bloch_path_requires_two_level_record():
    h = np.diag([1.0, 0.0, -1.0])
    lower = np.zeros((3, 3))
    lower[1, 0] = lower[2, 1] = 0.3
    m = jp.LindbladModel(hamiltonian=h, jump_ops=(lower,))
    psi = np.array([1.0, 0.0, 0.0], dtype=complex)
    rec = run_prescribed(m, psi, 1.0, [], mode="exact", n_steps=50)
    with pytest.raises(ValueError, match="dimension 2"):
        bloch_path_from_record(rec)
