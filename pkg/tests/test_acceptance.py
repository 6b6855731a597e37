"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (also shown in the terminal
summary) with the measured quantities and the wall time against its limit.
"""
import time

import numpy as np
import pytest

from specforge.algebra import destroy
from specforge.diagrams import PhaseSpec, generate, parse, to_dsl
from specforge.dynamics import HBAR, LindbladModel, TimeGrid, lindblad_rhs, propagate, steady_state
from specforge.models import build_coupled_oscillators, build_dicke, build_two_level, one_excitation_gap, thermal_ops
from specforge.response import DiagramRun, coherence2d, execute, linear_response, naive_coherence2d
from specforge.spectra import (bin_width, combine, grid_from_array, local_maxima, peak, select_quadrant,
                               transform1d, transform2d)

from conftest import random_density

REPHASING = PhaseSpec.parse("(1,0),(0,1),(0,1)")
NONREPHASING = PhaseSpec.parse("(0,1),(1,0),(0,1)")
TIMES = [0, 100, 200, 200]
TABLE = {
    "R1": "((Bu,0),(Ku,1),(Bd,2))", "R2": "((Bu,0),(Bd,1),(Ku,2))", "R3": "((Bu,0),(Ku,1),(Ku,2))",
    "R4": "((Ku,0),(Bu,1),(Bd,2))", "R5": "((Ku,0),(Kd,1),(Ku,2))", "R6": "((Ku,0),(Bu,1),(Ku,2))",
}


def elapsed(t0):
    return time.perf_counter() - t0


def summed_view(sys, phase, view, delays, part="imag", jobs=None):
    diagrams = generate(phase, TIMES, 1)
    spectra = [transform2d(coherence2d(sys, delays, d, (0, 2), 10, parallel=jobs is not None, jobs=jobs), part)
               for d in diagrams]
    return select_quadrant(combine(spectra), view)


def amplitude_near(view, f1, f2, radius=1):
    a = np.abs(view.values)
    i, j = np.argmin(np.abs(view.f1 - f1)), np.argmin(np.abs(view.f2 - f2))
    return a[max(i - radius, 0):i + radius + 1, max(j - radius, 0):j + radius + 1].max()


def within(a, b, step):
    # "within one bin" is inclusive; bin centres a whole bin apart differ from step only by rounding
    return abs(a - b) <= step * (1 + 1e-9)


def nearest_maximum(view, maxima, f1, f2):
    return min(((view.f1[i], view.f2[j]) for i, j in maxima), key=lambda p: np.hypot(p[0] - f1, p[1] - f2))


def test_criterion_1_two_level_oracle(acceptance):
    t0 = time.perf_counter()
    sys = build_two_level(2.0)
    grid = coherence2d(sys, (50, 0, 50), parse(TABLE["R1"]), (0, 2), 100)
    t1, t3 = np.meshgrid(grid.axis1, grid.axis2, indexing="ij")
    w = 2.0 / HBAR
    oracle = np.exp(1j * w * t1 - 1j * w * t3)  # mu = 1
    err = np.max(np.abs(grid.values - oracle) / np.abs(oracle))
    dt = elapsed(t0)
    acceptance(1, "two-level R1 oracle", err < 1e-5 and dt < 10,
               f"max rel err {err:.2e} (< 1e-5) on {grid.values.shape} grid at r=100, {dt:.1f} s (< 10 s)")


def test_criterion_2_lindblad_physicality(acceptance, rng):
    t0 = time.perf_counter()
    sys = build_dicke()
    model = sys.model
    rho0 = random_density(rng, sys.dim)
    _, states = propagate(model, rho0, TimeGrid(0.0, 100.0, 10), record=True)
    trace_err = np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1))
    herm_err = np.max(np.abs(states - np.conj(np.swapaxes(states, 1, 2))))
    residual = np.max(np.abs(lindblad_rhs(model, sys.rho_init)))

    n_th, n = 0.1, 14
    a = destroy(n)
    cavity = LindbladModel(a.dag() @ a * 1.0, tuple(thermal_ops(a, 0.05, n_th)))
    occupation = np.real(np.trace(a.dag().data @ a.data @ steady_state(cavity).data))
    dt = elapsed(t0)
    ok = (len(states) == 1001 and trace_err < 1e-8 and herm_err < 1e-8 and residual < 1e-10
          and abs(occupation - n_th) < 1e-6 and dt < 30)
    acceptance(2, "Lindblad physicality", ok,
               f"{len(states) - 1} steps: |dtrace| {trace_err:.1e}, hermiticity {herm_err:.1e} (< 1e-8); "
               f"steady-state residual {residual:.1e} (< 1e-10); <n> {occupation:.9f} vs {n_th} "
               f"(err {abs(occupation - n_th):.1e} < 1e-6); {dt:.1f} s (< 30 s)")


def test_criterion_3_diagram_counts(acceptance):
    t0 = time.perf_counter()
    dsl = lambda ds: {to_dsl(d) for d in ds}
    reph, nonreph = dsl(generate(REPHASING, TIMES, 1)), dsl(generate(NONREPHASING, TIMES, 1))
    ok_sets = reph == {TABLE[k] for k in ("R1", "R2", "R3")} and nonreph == {TABLE[k] for k in ("R4", "R5", "R6")}
    # max_manifold bounds the populated rungs; the emitting coherence may sit one rung higher
    counts = {m: len(dsl(generate(REPHASING, TIMES, m)) | dsl(generate(NONREPHASING, TIMES, m))) for m in (0, 1, 2)}
    dt = elapsed(t0)
    ok = ok_sets and counts[0] == 4 and counts[1] == 6 and counts[2] == 6 and dt < 1
    acceptance(3, "diagram generation", ok,
               f"rephasing {sorted(reph)}, non-rephasing {sorted(nonreph)}; merged counts "
               f"two-level {counts[0]} (4), three-level {counts[1]} (6), raised ladder {counts[2]} (6); "
               f"{dt * 1e3:.0f} ms (< 1 s)")


@pytest.mark.slow
def test_criterion_4_coupled_oscillators(acceptance):
    delays = (200, 5, 200)
    step = bin_width(2001, 0.1)
    t0 = time.perf_counter()
    coupled = summed_view(build_coupled_oscillators(J=0.1, mu_b=0.0, gamma=0.05), REPHASING, "rephasing", delays)
    t_coupled = elapsed(t0)
    t0 = time.perf_counter()
    free = summed_view(build_coupled_oscillators(J=0.0, mu_b=0.0, gamma=0.05), REPHASING, "rephasing", delays)
    t_free = elapsed(t0)

    lo, hi = 2.0 - 0.1, 2.0 + 0.1
    mag = np.abs(coupled.values)
    maxima = local_maxima(mag, 0.05 * mag.max())
    d_lo, d_hi = nearest_maximum(coupled, maxima, lo, lo), nearest_maximum(coupled, maxima, hi, hi)
    pos_err = max(abs(d_lo[0] - lo), abs(d_lo[1] - lo), abs(d_hi[0] - hi), abs(d_hi[1] - hi))
    diag = max(amplitude_near(coupled, *d_lo), amplitude_near(coupled, *d_hi))
    cross = [amplitude_near(coupled, lo, hi) / diag, amplitude_near(coupled, hi, lo) / diag]
    free_diag = np.abs(free.values).max()
    leak = max(amplitude_near(free, lo, hi), amplitude_near(free, hi, lo)) / free_diag
    # one core in the sandbox: the serial time stands in for the 8-worker bound as well
    slowest = max(t_coupled, t_free)
    ok = within(pos_err, 0, step) and min(cross) > 0.10 and leak < 0.05 and slowest < 120
    acceptance(4, "coupled-oscillator 2D structure", ok,
               f"diagonal peaks ({d_lo[0]:.3f},{d_lo[1]:.3f}) ({d_hi[0]:.3f},{d_hi[1]:.3f}) vs {lo}/{hi}, "
               f"offset {pos_err:.4f} <= bin {step:.4f}; cross/diag {cross[0]:.2f}, {cross[1]:.2f} (> 0.10); "
               f"J=0 cross/diag {leak:.3f} (< 0.05); {t_coupled:.0f} s + {t_free:.0f} s serial (< 120 s each)")


@pytest.mark.slow
def test_criterion_5_dicke(acceptance):
    t0 = time.perf_counter()
    sys = build_dicke()
    lp, up = one_excitation_gap()
    gap = up - lp
    step = bin_width(1501, 0.1)
    notes, ok = [], True
    for kind, phase in (("rephasing", REPHASING), ("nonrephasing", NONREPHASING)):
        view = summed_view(sys, phase, kind, (150, 5, 150))
        mag = np.abs(view.values)
        maxima = local_maxima(mag, 0.02 * mag.max())
        p_lp, p_up = nearest_maximum(view, maxima, lp, lp), nearest_maximum(view, maxima, up, up)
        split = ((p_up[0] - p_lp[0]) + (p_up[1] - p_lp[1])) / 2
        found = {(view.f1[i], view.f2[j]) for i, j in maxima}
        has_cross = all(any(within(f[0], x, step) and within(f[1], y, step) for f in found)
                        for x, y in ((p_lp[0], p_up[1]), (p_up[0], p_lp[1])))
        cross = (amplitude_near(view, p_lp[0], p_up[1]) / mag.max(), amplitude_near(view, p_up[0], p_lp[1]) / mag.max())
        good = within(split, gap, step) and has_cross
        ok &= good
        notes.append(f"{kind}: LP ({p_lp[0]:.3f},{p_lp[1]:.3f}) UP ({p_up[0]:.3f},{p_up[1]:.3f}), "
                     f"splitting {split:.3f} (|err| {abs(split - gap):.3f}), cross peaks "
                     f"{'present' if has_cross else 'missing'} {cross[0]:.2f}/{cross[1]:.2f} "
                     f"[{'ok' if good else 'out of tolerance'}]")
    dt = elapsed(t0)
    ok &= dt < 1800
    acceptance(5, "Dicke polariton 2D structure", ok,
               f"gap {gap:.3f} (LP {lp:.3f}, UP {up:.3f}), bin {step:.4f}; " + "; ".join(notes) + f"; {dt:.0f} s (< 1800 s)")


def test_criterion_6_scan_engine(acceptance):
    t0 = time.perf_counter()
    sys = build_coupled_oscillators(J=0.1, gamma=0.05, n_th=0.1)
    d = parse(TABLE["R1"])
    delays = (1.9, 3.0, 1.9)
    fast = coherence2d(sys, delays, d, (0, 2), 10)
    slow = naive_coherence2d(sys, delays, d, (0, 2), 10)
    err = np.max(np.abs(fast.values - slow))
    parallel = coherence2d(sys, delays, d, (0, 2), 10, parallel=True, jobs=4)
    same = np.array_equal(parallel.values, fast.values)
    dt = elapsed(t0)
    acceptance(6, "scan engine equivalence", fast.values.shape == (20, 20) and err < 1e-12 and same and dt < 60,
               f"{fast.values.shape} grid: checkpoint vs naive max |diff| {err:.1e} (< 1e-12); "
               f"parallel bitwise equal {same}; {dt:.1f} s (< 60 s)")


def test_criterion_7_spectra(acceptance, rng):
    t0 = time.perf_counter()
    x = rng.normal(size=(64, 48)) + 1j * rng.normal(size=(64, 48))
    s = transform2d(grid_from_array(x))
    parseval = abs(np.sum(np.abs(x) ** 2) - np.sum(np.abs(s.values) ** 2) / x.size) / np.sum(np.abs(x) ** 2)

    w = 2.0 / HBAR
    t = np.arange(200) / 10
    tone = transform2d(grid_from_array(np.outer(np.exp(1j * w * t), np.exp(-1j * w * t))))
    f1, f2 = peak(tone)
    step2 = bin_width(200, 0.1)
    _, series = linear_response(build_two_level(2.0), 100.0)
    f, spec = transform1d(series, 10)
    f_line = f[np.argmax(np.abs(spec))]
    step1 = bin_width(len(series), 0.1)

    n, r = 128, 2
    tt = np.arange(n) / r
    decayed = np.outer(np.exp((1j * 1.3 / HBAR - 0.2) * tt), np.exp((-1j * 1.8 / HBAR - 0.2) * tt))
    base, padded = transform2d(grid_from_array(decayed, r)), transform2d(grid_from_array(decayed, r), pad=4 * n)
    step_p = bin_width(n, 1 / r)
    old = [(base.f1[i], base.f2[j]) for i, j in local_maxima(np.abs(base.values), 0.005 * np.abs(base.values).max())]
    new = [(padded.f1[i], padded.f2[j])
           for i, j in local_maxima(np.abs(padded.values), 0.01 * np.abs(padded.values).max())]
    spurious = [p for p in new if not any(abs(p[0] - o[0]) <= step_p and abs(p[1] - o[1]) <= step_p for o in old)]
    dt = elapsed(t0)
    ok = (parseval < 1e-9 and abs(f1 - 2) <= step2 and abs(f2 + 2) <= step2 and abs(f_line - 2) <= step1
          and not spurious and dt < 10)
    acceptance(7, "spectra properties", ok,
               f"Parseval rel err {parseval:.1e} (< 1e-9); 2D tone peak ({f1:.3f},{f2:.3f}) vs (2,-2) bin {step2:.3f}; "
               f"1D line {f_line:.3f} vs 2 bin {step1:.3f}; zero padding x4 new maxima > 1%: {len(spurious)}; "
               f"{dt:.1f} s (< 10 s)")


def test_criterion_8_pl_pathway(acceptance):
    t0 = time.perf_counter()
    sys = build_two_level(2.0)
    d = parse("(('Bu',0),('Ku',1),('Bd',2),('Bu',3))")
    result = execute(sys, DiagramRun(d, (0.0, 0.0, 0.0, 0.0))).value
    # bra up, ket up, bra down, bra up with mu_minus = |0><1|, mu_plus = |1><0|
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    raise_ = lower.T
    rho = np.diag([1.0, 0.0]).astype(complex)
    rho = rho @ lower
    rho = raise_ @ rho
    rho = rho @ raise_
    rho = rho @ lower
    expected = (-1) ** 3 * rho[1, 1]
    dt = elapsed(t0)
    acceptance(8, "PL pathway", abs(result - expected) < 1e-12 and dt < 1,
               f"detected rho_11 {complex(result):.6g} vs hand product {complex(expected):.6g}; {dt * 1e3:.0f} ms (< 1 s)")
