"""End-to-end acceptance battery.

One test per headline claim; each prints a single PASS/FAIL line to the
terminal (bypassing capture) before asserting, so a full run reads as a
scorecard.  Two criteria are expected to fail honestly: trajectories with
jumps at theta = pi/2 hit states whose dephasing jump matrix element
<psi|sigma_z|psi> is exactly zero, so their per-trajectory phase is
undefined rather than equal to the closed-form target.  The remaining
cells of those grids are asserted at full tolerance and reported.
"""

import dataclasses
import os
import subprocess
import sys
import time

import numpy as np
import pytest

import jumpphase as jp
from jumpphase.spin import (bloch_path_from_record, build_model,
                            decay_no_jump_reference, dephasing_phase,
                            flip_partial_areas, initial_state, preset,
                            solid_angle)
from jumpphase.trajectory import run_ensemble, run_prescribed
from jumpphase.master import compare_ensemble, integrate, trace_distance

TWO_PI = 2.0 * np.pi
THETAS = (np.pi / 6, np.pi / 3, np.pi / 2, 2 * np.pi / 3)


def _report(capsys, n, ok, detail, extra=()):
    with capsys.disabled():
        for line in extra:
            print(f"    {line}")
        print(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    if not ok:
        pytest.fail(f"criterion {n}: {detail}", pytrace=False)


def _random_jumps(rng, k):
    while True:
        times = np.sort(rng.uniform(0.0, TWO_PI, size=k))
        if k < 2 or np.all(np.diff(times) > 0):
            return [(float(t), 1) for t in times]


def _dephasing_grid_errors(mode, n_steps, rng):
    """Per-cell circular error of gamma against pi(1 - cos theta).

    Returns (errors dict keyed by (theta, k), undefined list).
    """
    errors = {}
    undefined = []
    for theta in THETAS:
        spin = preset("dephasing", theta=theta)
        model = build_model(spin)
        psi0 = initial_state(spin)
        target = dephasing_phase(theta)
        for k in range(9):
            rec = run_prescribed(model, psi0, TWO_PI, _random_jumps(rng, k),
                                 mode=mode, n_steps=n_steps)
            try:
                gamma = jp.trajectory_phase(rec, model).geometric_phase
            except jp.PhaseUndefinedError:
                undefined.append((theta, k))
                continue
            errors[(theta, k)] = jp.circular_distance(gamma, target)
    return errors, undefined


def test_criterion_1_dephasing_phase_robust_to_jump_count(capsys):
    start = time.perf_counter()
    errors, undefined = _dephasing_grid_errors(
        "exact-segment", 600, np.random.default_rng(101))
    elapsed = time.perf_counter() - start
    n_cells = len(errors) + len(undefined)
    good = sum(1 for e in errors.values() if e <= 1e-6)
    worst = max(errors.values())
    extra = [f"defined cells: worst |gamma - target| = {worst:.3e} "
             f"(tolerance 1e-6), runtime {elapsed:.2f} s"]
    if undefined:
        ks = sorted(k for _, k in undefined)
        extra.append(f"undefined cells: theta = pi/2, k in {ks}: every jump "
                     "hits <psi|sigma_z|psi> = 0 on the equator")
    ok = good == n_cells and elapsed < 1.0
    _report(capsys, 1, ok,
            f"{good}/{n_cells} cells within 1e-6 of pi(1 - cos theta), "
            f"exact-segment mode ({elapsed:.2f} s)", extra)


def test_criterion_2_euler_mode_converges_to_same_value(capsys):
    start = time.perf_counter()
    err1, undefined = _dephasing_grid_errors(
        "euler", 10_000, np.random.default_rng(202))
    err2, _ = _dephasing_grid_errors(
        "euler", 20_000, np.random.default_rng(202))
    elapsed = time.perf_counter() - start
    n_cells = len(err1) + len(undefined)
    good = sum(1 for e in err1.values() if e <= 5e-3)
    max1 = max(err1.values())
    max2 = max(err2.values())
    ratio = max2 / max1
    odd = [err2[c] / err1[c] for c in err1 if c[1] % 2 == 1 and err1[c] > 1e-12]
    even = [err2[c] / err1[c] for c in err1 if c[1] % 2 == 0 and err1[c] > 1e-12]
    extra = [
        f"N=10^4: worst error {max1:.3e} (tolerance 5e-3); doubling N "
        f"scales the worst error by {ratio:.3f} (band 0.375..0.625)",
        f"per-cell ratios: odd k ~ {np.median(odd):.3f} (first order), "
        f"even k ~ {np.median(even):.3f} (azimuth deficit cancels; "
        "second order)",
    ]
    if undefined:
        ks = sorted(k for _, k in undefined)
        extra.append(f"undefined cells: theta = pi/2, k in {ks}")
    ok = (good == n_cells and 0.375 <= ratio <= 0.625 and elapsed < 5.0)
    _report(capsys, 2, ok,
            f"{good}/{n_cells} cells within 5e-3 at N=10^4; worst-error "
            f"halving ratio {ratio:.3f} ({elapsed:.2f} s)", extra)


def test_criterion_3_unital_no_jump_matches_closed_system(capsys):
    worst_infid = 0.0
    worst_phase = 0.0
    for name in ("dephasing", "spinflip"):
        spin = preset(name, theta=np.pi / 3, phi=0.2)
        open_model = build_model(spin)
        closed_model = build_model(dataclasses.replace(
            spin, lambda_dephase=0.0, alpha_decay=0.0, flip_axis=None))
        psi0 = initial_state(spin)
        rec_o = run_prescribed(open_model, psi0, TWO_PI, [], mode="exact",
                               n_steps=500)
        rec_c = run_prescribed(closed_model, psi0, TWO_PI, [], mode="exact",
                               n_steps=500)
        for idx in range(10, 501, 10):
            a = rec_o.states[idx] / np.linalg.norm(rec_o.states[idx])
            b = rec_c.states[idx] / np.linalg.norm(rec_c.states[idx])
            worst_infid = max(worst_infid, 1.0 - abs(np.vdot(a, b)) ** 2)
        g_open = jp.no_jump_phase(open_model, psi0, 0.0, TWO_PI).geometric_phase
        g_closed = jp.no_jump_phase(closed_model, psi0, 0.0,
                                    TWO_PI).geometric_phase
        worst_phase = max(worst_phase,
                          jp.circular_distance(g_open, g_closed))
    ok = worst_infid <= 1e-10 and worst_phase <= 1e-10
    _report(capsys, 3, ok,
            f"no-jump state infidelity <= {worst_infid:.2e} at 50 times, "
            f"phase gap <= {worst_phase:.2e} (tolerance 1e-10, "
            "dephasing and spin flip)")


def test_criterion_4_decay_oracle_agreement(capsys):
    start = time.perf_counter()
    worst = 0.0
    for alpha in (0.01, 0.05, 0.1):
        for theta in THETAS:
            cfg = dataclasses.replace(preset("decay"), alpha_decay=alpha,
                                      theta=theta)
            ref = decay_no_jump_reference(cfg, TWO_PI)
            pipe = jp.no_jump_phase(build_model(cfg), initial_state(cfg),
                                    0.0, TWO_PI).geometric_phase
            worst = max(worst, jp.circular_distance(pipe, ref))
    extra = []
    limit_ok = True
    for theta in THETAS:
        gaps = []
        alphas = (0.1, 0.05, 0.025, 0.0125)
        for alpha in alphas:
            cfg = dataclasses.replace(preset("decay"), alpha_decay=alpha,
                                      theta=theta)
            gaps.append(jp.circular_distance(
                decay_no_jump_reference(cfg, TWO_PI), dephasing_phase(theta)))
        limit_ok &= all(b < a for a, b in zip(gaps, gaps[1:]))
        x = np.array(alphas)
        lin = float(np.dot(gaps, x) / np.dot(x, x))
        quad = float(np.dot(gaps, x ** 2) / np.dot(x ** 2, x ** 2))
        extra.append(
            f"theta={theta:.3f}: correction fits {lin:.3f}*(alpha/omega) or "
            f"{quad:.3f}*(alpha/omega)^2; quoted (4pi)^2 sin^2 = "
            f"{(4 * np.pi) ** 2 * np.sin(theta) ** 2:.1f}, alternate "
            f"4pi^2 sin^2 = {4 * np.pi ** 2 * np.sin(theta) ** 2:.1f}, "
            f"measured (pi^2/2) sin^2 = "
            f"{0.5 * np.pi ** 2 * np.sin(theta) ** 2:.3f} (not asserted)")
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and limit_ok and elapsed < 2.0
    _report(capsys, 4, ok,
            f"pipeline vs closed-form reference: worst gap {worst:.2e} "
            f"(tolerance 1e-8) over 12 cells; alpha -> 0 limit monotone "
            f"({elapsed:.2f} s)", extra)


def test_criterion_5_ensemble_recovers_master_equation(capsys):
    start = time.perf_counter()
    spin = preset("dephasing")
    model = build_model(spin)
    psi0 = initial_state(spin)
    snaps = np.linspace(0.0, TWO_PI, 21)
    ens = run_ensemble(model, psi0, TWO_PI, 1000, 10_000, 2024,
                       snapshot_times=snaps, mode="exact",
                       retain_projectors=True)
    times, rhos = integrate(model, np.outer(psi0, psi0.conj()), TWO_PI, 2000,
                            snapshot_times=snaps)
    dists = compare_ensemble(times, rhos, ens)
    maxes = []
    for n_sub in (100, 1000, 10_000):
        mean = ens.projector_stack[:n_sub].sum(axis=0) / n_sub
        maxes.append(max(trace_distance(a, b) for a, b in zip(rhos, mean)))
    slope = float(np.polyfit(np.log10([100, 1000, 10_000]),
                             np.log10(maxes), 1)[0])
    elapsed = time.perf_counter() - start
    ok = (dists.max() <= 0.02 and -0.65 <= slope <= -0.35 and elapsed < 60.0)
    _report(capsys, 5, ok,
            f"max trace distance {dists.max():.4f} (tolerance 0.02) at "
            f"n=10^4; subset maxima {maxes[0]:.3f}/{maxes[1]:.4f}/"
            f"{maxes[2]:.4f} give log-log slope {slope:.3f} "
            f"(band -0.65..-0.35) ({elapsed:.1f} s)")


def test_criterion_6_completeness_residual_scales_as_dt_squared(capsys):
    ratios = {}
    dt = 1e-3 * TWO_PI
    for name in ("dephasing", "decay", "dephasing+decay"):
        model = build_model(preset(name))
        r1 = jp.step_operators(model, dt).completeness_residual
        r2 = jp.step_operators(model, dt / 2).completeness_residual
        ratios[name] = r1 / r2
    ok = all(3.5 <= r <= 4.5 for r in ratios.values())
    detail = ", ".join(f"{k}: {v:.4f}" for k, v in ratios.items())
    _report(capsys, 6, ok,
            f"residual ratio under dt halving (target 4 +/- 0.5): {detail}")


def test_criterion_7_pancharatnam_properties(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(3):
        chain = [np.array([1.0, 0.0], dtype=complex)]
        for _ in range(999):
            step = chain[-1] + 0.05 * (rng.normal(size=2)
                                       + 1j * rng.normal(size=2))
            chain.append(step / np.linalg.norm(step))
        base = jp.pancharatnam_discrete(chain)
        scrambled = [s * rng.uniform(0.5, 2.0)
                     * np.exp(1j * rng.uniform(-np.pi, np.pi))
                     for s in chain]
        worst = max(worst, abs(jp.pancharatnam_discrete(scrambled) - base))
    octant = [np.array([1.0, 0.0], dtype=complex),
              np.array([1.0, 1.0], dtype=complex) / np.sqrt(2),
              np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2)]
    oct_err = abs(jp.pancharatnam_discrete(octant) + np.pi / 4)
    two = jp.pancharatnam_discrete([octant[0], octant[1]])
    ok = worst <= 1e-12 and oct_err <= 1e-12 and two == 0.0
    _report(capsys, 7, ok,
            f"gauge invariance {worst:.2e} on 10^3-state chains, octant "
            f"chain off -pi/4 by {oct_err:.2e} (tolerances 1e-12), "
            f"two-state chain = {two}")


def test_criterion_8_phase_equals_half_enclosed_area(capsys):
    closed = build_model(dataclasses.replace(preset("dephasing"),
                                             lambda_dephase=0.0,
                                             theta=np.pi / 2))
    psi0 = initial_state(dataclasses.replace(preset("dephasing"),
                                             theta=np.pi / 2))
    rec = run_prescribed(closed, psi0, TWO_PI, [], mode="exact",
                         n_steps=10_000)
    gamma = jp.trajectory_phase(rec, closed).geometric_phase
    half_area = 0.5 * solid_angle(bloch_path_from_record(rec).points)
    closed_err = abs(abs(gamma) - np.pi)
    area_err = jp.circular_distance(gamma, half_area)

    spin = preset("dephasing", theta=np.pi / 3)
    model = build_model(spin)
    rec2 = run_prescribed(model, initial_state(spin), TWO_PI, [(2.2, 1)],
                          mode="exact", n_steps=10_000)
    dec = flip_partial_areas(rec2)
    lobe_err = jp.circular_distance(
        dec.half_sum, jp.trajectory_phase(rec2, model).geometric_phase)
    ok = closed_err <= 1e-6 and area_err <= 1e-6 and lobe_err <= 5e-3
    _report(capsys, 8, ok,
            f"closed equator orbit: |gamma| off pi by {closed_err:.2e}, "
            f"half-area gap {area_err:.2e} (tolerance 1e-6); one-jump "
            f"two-lobe decomposition gap {lobe_err:.2e} (tolerance 5e-3)")


def test_criterion_9_byte_identical_across_runs_and_workers(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(
        '{"model": {"preset": "dephasing"},\n'
        ' "initial_state": {"theta": 1.0471975511965976},\n'
        ' "run": {"total_time": 6.283185307179586, "n_steps": 400,\n'
        '         "seed": 42, "n_trajectories": 100}}\n')
    texts = []
    for label, threads in (("a", "1"), ("b", "1"), ("c", "4")):
        env = os.environ.copy()
        env["JUMPPHASE_THREADS"] = threads
        out = tmp_path / label
        proc = subprocess.run(
            [sys.executable, "-m", "jumpphase", "simulate",
             "--config", str(cfg), "--out", str(out)],
            env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        texts.append((out / "trajectories.csv").read_bytes())
    ok = texts[0] == texts[1] == texts[2]
    _report(capsys, 9, ok,
            "trajectory CSV byte-identical across repeated runs and "
            "JUMPPHASE_THREADS in {1, 4}" if ok else
            "trajectory CSV differs between runs or worker counts")
