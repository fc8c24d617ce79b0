"""Acceptance criteria 1-10, each judged at its stated tolerance.

Every test prints one ``criterion N PASS|FAIL`` line (visible with ``-s``)
and also registers it for the terminal summary, so a plain ``pytest -v``
run ends with the full list.
"""

from __future__ import annotations

import pytest

from nlbs import validation as V
from nlbs.fd import SolverConfig

NEWTON_TOL = SolverConfig().newton_tol


@pytest.fixture(scope="module")
def reports():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = V.CHECKS[name]()
        return cache[name]

    return get


def _conclude(lines, number, label, ok, detail):
    lines[number] = (label, bool(ok), detail)
    print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {label}: {detail}")
    assert ok, f"criterion {number} ({label}) not met: {detail}"


def test_criterion_01_closed_form_residual(reports, acceptance_lines):
    r = reports("closed_form_residual")
    m = r.measured
    ok = (m["max_relative_residual"] < 1e-8 and m["evenness_gap"] <= 1e-13 and m["eps1_gap"] <= 1e-13
          and m["points"] == 200 * len(V.RESIDUAL_SWEEP) and r.runtime < 60)
    _conclude(acceptance_lines, 1, "closed-form residual suite", ok,
              f"residual={m['max_relative_residual']:.2e} (<1e-8), evenness={m['evenness_gap']:.1e}, "
              f"eps1={m['eps1_gap']:.1e}, runtime={r.runtime:.1f}s")


@pytest.mark.slow
def test_criterion_02_benchmark_accuracy(reports, acceptance_lines):
    r = reports("benchmark_accuracy")
    errs = {k[len("max_rel_error_"):]: v for k, v in r.measured.items() if k.startswith("max_rel_error_")}
    assert len(errs) == 6
    ok = all(e <= 5e-3 for e in errs.values()) and errs["42x30"] <= 2e-3 and r.runtime < 60
    failures = {k[len("failure_"):]: v for k, v in r.measured.items() if k.startswith("failure_")}
    detail = ", ".join(f"{k}:{failures.get(k, format(v, '.2e'))}" for k, v in errs.items())
    _conclude(acceptance_lines, 2, "benchmark accuracy (finest <=0.2%, all <=0.5%)", ok,
              f"{detail}; runtime={r.runtime:.1f}s")


def test_criterion_03_ode_chain(reports, acceptance_lines):
    m = reports("ode_chain").measured
    ok = (m["v_ode_relative_residual"] < 1e-8 and m["y_ode_relative_residual"] < 1e-8
          and m["explicit_y_vs_derivative"] < 1e-8 and m["m0_limit_max_deviation"] == 0.0)
    _conclude(acceptance_lines, 3, "ODE-chain consistency", ok,
              f"v-ODE={m['v_ode_relative_residual']:.1e}, y-ODE={m['y_ode_relative_residual']:.1e}, "
              f"y match={m['explicit_y_vs_derivative']:.1e}, m=0 deviation={m['m0_limit_max_deviation']}")


def test_criterion_04_group_action(reports, acceptance_lines):
    m = reports("group_action").measured
    ok = m["elements"] == 20 and m["max_relative_residual"] < 1e-7 and m["max_invariant_drift"] < 1e-10
    _conclude(acceptance_lines, 4, "group action", ok,
              f"residual={m['max_relative_residual']:.1e} (<1e-7), invariant drift="
              f"{m['max_invariant_drift']:.1e} (<1e-10)")


@pytest.mark.slow
def test_criterion_05_rho_monotonicity(reports, acceptance_lines):
    r = reports("rho_monotonicity")
    worst = min(r.measured["figure_grid_min_increment"])
    ok = worst >= -10 * NEWTON_TOL and r.runtime < 60
    _conclude(acceptance_lines, 5, "monotonicity in rho", ok,
              f"min increment={worst:.3e} (>= -{10 * NEWTON_TOL:.0e}), runtime={r.runtime:.1f}s")


@pytest.mark.slow
def test_criterion_06_nonlinearity_gap(reports, acceptance_lines):
    m = reports("nonlinearity_gap").measured
    ok = m["max_gap"] > 10 * NEWTON_TOL and m["distance_in_h"] <= 10 and m["linear_max_gap"] <= 1e-10
    _conclude(acceptance_lines, 6, "nonlinearity gap", ok,
              f"max gap={m['max_gap']:.3f} at S={m['argmax_S']:.2f} ({m['distance_in_h']:.2f}h from E), "
              f"linear gap={m['linear_max_gap']:.1e}")


@pytest.mark.slow
def test_criterion_07_guess_independence(reports, acceptance_lines):
    m = reports("guess_independence").measured
    k_diffs = [v for k, v in m.items() if k.endswith("_k_difference")]
    ok = max(k_diffs) <= 10 * NEWTON_TOL and m["max_difference"] <= 10 * NEWTON_TOL
    _conclude(acceptance_lines, 7, "initial-guess independence", ok,
              f"k=0.03 vs k=1.0: {max(k_diffs):.1e}, including warm start: {m['max_difference']:.1e} "
              f"(<= {10 * NEWTON_TOL:.0e})")


def test_criterion_08_explicit_divergence(reports, acceptance_lines):
    m = reports("explicit_divergence").measured
    flags = {ratio: m[f"ratio{ratio}_diverged"] for ratio in V.EXPLICIT_RATIOS}
    ok = all(flags.values()) and not m["zero_data_diverged"] and not m["linear_data_diverged"]
    detail = ", ".join(f"tau/h^2={r}: diverged={f}" for r, f in flags.items())
    _conclude(acceptance_lines, 8, "explicit-scheme divergence", ok, detail)


def test_criterion_09_asymptotic_orders(reports, acceptance_lines):
    m = reports("asymptotic_orders").measured
    growth = {k: v for k, v in m.items() if k.endswith("_decade_growth")}
    ok = all(v <= 2.0 for v in growth.values())
    _conclude(acceptance_lines, 9, "asymptotic remainder orders", ok,
              ", ".join(f"{k.replace('_decade_growth', '')}={v:.3f}" for k, v in growth.items()))


def test_criterion_10_rho_rescaling(reports, acceptance_lines):
    m = reports("rho_rescaling").measured
    ok = m["points_used"] > 0 and m["max_float_residual_rescaled"] < 1e-8 and m["max_mp_residual_rescaled"] < 1e-8
    _conclude(acceptance_lines, 10, "rho-rescaling equivalence", ok,
              f"float residual={m['max_float_residual_rescaled']:.2e}, mp residual="
              f"{m['max_mp_residual_rescaled']:.1e} over {m['points_used']} points")
