"""End-to-end checks of the package's headline guarantees.

Each test records a one-line verdict through the `criterion` fixture; the
terminal summary prints every line at the end of the run, pass or fail.
The concentration runs (criteria 6 and 10) cost a couple of seconds each;
everything else is fast.
"""

import filecmp
import math

import numpy as np
import pytest

from degenwell.action import extremal_control, extremal_path
from degenwell.cli import main as cli_main
from degenwell.cli import invariant_experiment
from degenwell.lyapunov import GridSpec, find_certificate, generator_on_W, lyapunov_W
from degenwell.model import (
    Params,
    ScalarField,
    State,
    bracket_determinant,
    forbidden_thetas,
    generator_apply,
)
from degenwell.quasipotential import (
    classify_limit_measure,
    cost_matrix,
    global_costs,
    passage_cost_integral,
    passage_cost_pathopt,
)
from degenwell.simulate import SimConfig, simulate_controlled

from conftest import ACCEPTANCE_LINES  # noqa: F401  (same dir under pytest)


@pytest.fixture(scope="module")
def flat_noise_occupations():
    """Long balanced-start ensemble with x-independent noise (shared by 6 and 10)."""
    p = Params(sigma1=0.0, epsilon=0.35)
    return invariant_experiment(
        p, dt=1e-3, t_final=5000.0, seed=1, n_paths=16, delta=0.1
    )


def test_criterion_01_closed_form_passage_cost(criterion, p_default):
    by_integral = passage_cost_integral(p_default, 1.0, 0.0)
    by_descent = passage_cost_pathopt(p_default, 1.0, 0.0, horizon=20.0, n=400)
    ok = abs(by_integral - 0.5) < 1e-8 and abs(by_descent - 0.5) < 1e-3
    criterion(
        1, "closed-form passage cost", ok,
        f"integral={by_integral:.10f}, descent={by_descent:.6f}",
    )


def test_criterion_02_control_reproduces_extremal(criterion, p_default):
    w0 = 0.9
    config = SimConfig(dt=1e-3, t_final=5.0, seed=0, initial=State(w0, 0.0))
    driven = simulate_controlled(
        p_default, config, lambda t: extremal_control(p_default, w0, t)
    )
    target = extremal_path(p_default, w0, 5.0, config.n_steps + 1, direction="reverse")
    err = float(np.max(np.abs(driven.x - target.values)))
    criterion(2, "control reproduces extremal", err < 1e-4, f"max node error={err:.3g}")


def test_criterion_03_cost_matrix_structure(criterion, p_default):
    cm = cost_matrix(p_default)
    free_rows = (
        cm.cost(2, 1) == 0.0
        and cm.cost(2, 3) == 0.0
        and all(cm.cost(i, i) == 0.0 for i in (1, 2, 3))
    )
    climbs = [cm.cost(1, 2), cm.cost(1, 3), cm.cost(3, 1), cm.cost(3, 2)]
    spread = max(climbs) - min(climbs)
    criterion(
        3, "cost-matrix structure", free_rows and spread <= 1e-6,
        f"climb spread={spread:.3g}",
    )


def test_criterion_04_global_cost_identities(criterion, p_default):
    cm = cost_matrix(p_default)
    wc = global_costs(cm)
    v12 = cm.cost(1, 2)
    ok = (
        wc.cost(1) == v12 and wc.cost(3) == v12 and wc.cost(2) == 2.0 * v12
    )
    details = [f"untilted W=({wc.cost(1):.6f},{wc.cost(2):.6f},{wc.cost(3):.6f})"]
    for s in (0.5, -0.5):
        cm_t = cost_matrix(Params(sigma1=s))
        wc_t = global_costs(cm_t)
        v12_t, v32_t = cm_t.cost(1, 2), cm_t.cost(3, 2)
        ok = ok and (
            wc_t.cost(1) == v32_t
            and wc_t.cost(2) == v32_t + v12_t
            and wc_t.cost(3) == v12_t
        )
    criterion(4, "global cost identities", ok, "; ".join(details))


def test_criterion_05_limit_measure_sweep(criterion):
    expected = {}
    got = {}
    for ratio in (-0.9, -0.5, -0.1, 0.0, 0.1, 0.5, 0.9):
        if ratio > 0:
            expected[ratio] = {1: 1.0}
        elif ratio < 0:
            expected[ratio] = {3: 1.0}
        else:
            expected[ratio] = {1: 0.5, 3: 0.5}
        # raises ClassificationInconsistency if the two routes disagree
        got[ratio] = dict(classify_limit_measure(Params(sigma1=ratio)).weights)
    mismatches = [r for r in expected if got[r] != expected[r]]
    criterion(
        5, "limit-measure sweep", not mismatches,
        "7 tilt ratios, argmin route vs sign rule" if not mismatches
        else f"mismatch at {mismatches}",
    )


def test_criterion_06_occupation_concentration(criterion, flat_noise_occupations):
    flat = flat_noise_occupations
    gap_flat = abs(flat.fraction("K1") - flat.fraction("K3"))

    left_heavy = invariant_experiment(
        Params(sigma1=0.5, epsilon=0.25),
        dt=1e-3, t_final=5000.0, seed=1, n_paths=16, delta=0.1,
    )
    gap_left = left_heavy.fraction("K1") - left_heavy.fraction("K3")

    right_heavy = invariant_experiment(
        Params(sigma1=-0.5, epsilon=0.25),
        dt=1e-3, t_final=5000.0, seed=1, n_paths=16, delta=0.1,
    )
    gap_right = right_heavy.fraction("K3") - right_heavy.fraction("K1")

    ok = gap_flat <= 0.15 and gap_left >= 0.2 and gap_right >= 0.2
    criterion(
        6, "occupation concentration", ok,
        f"flat |K1-K3|={gap_flat:.3f}, tilted K1-K3={gap_left:.3f}, "
        f"mirrored K3-K1={gap_right:.3f}",
    )


def test_criterion_07_drift_condition_certificate(criterion, p_default, rng):
    cert = find_certificate(
        p_default, GridSpec(-3.0, 3.0, -3.0, 3.0, 601, 601), epsilon_max=0.5
    )
    field = ScalarField(
        value=lambda x, y: lyapunov_W(cert.alpha, State(x, y)),
        gradient=lambda x, y: (4.0 * x**3, 2.0 * cert.alpha * y),
        hessian=lambda x, y: ((12.0 * x * x, 0.0), (0.0, 2.0 * cert.alpha)),
    )
    worst = 0.0
    for x, y in rng.uniform(-2.0, 2.0, size=(100, 2)):
        s = State(float(x), float(y))
        closed = generator_on_W(p_default, cert.alpha, s)
        applied = generator_apply(p_default, field, s)
        worst = max(worst, abs(closed - applied) / max(1.0, abs(closed)))
    ok = cert.alpha == 4.0 and cert.min_slack > 0.0 and worst < 1e-12
    criterion(
        7, "drift-condition certificate", ok,
        f"min slack={cert.min_slack:.3g}, generator mismatch={worst:.3g}",
    )


def test_criterion_08_bracket_determinant(criterion, rng):
    worst_match = 0.0
    worst_zero = 0.0
    for _ in range(100):
        lam1, lam2, lam3 = rng.uniform(0.1, 5.0, size=3)
        theta = rng.uniform(-math.pi, math.pi)
        p = Params(lambda1=lam1, lambda2=lam2, lambda3=lam3, theta=theta)
        expected = math.cos(theta) * (
            (2.0 * lam1 - lam2) * math.sin(theta) - 2.0 * lam3 * math.cos(theta)
        )
        scale = max(1.0, lam1, lam2, lam3)
        worst_match = max(worst_match, abs(bracket_determinant(p) - expected) / scale)
        for excluded in forbidden_thetas(lam1, lam2, lam3):
            p_x = Params(lambda1=lam1, lambda2=lam2, lambda3=lam3, theta=excluded)
            worst_zero = max(worst_zero, abs(bracket_determinant(p_x)) / scale)
    ok = worst_match < 1e-12 and worst_zero < 1e-10
    criterion(
        8, "bracket determinant", ok,
        f"formula mismatch={worst_match:.3g}, excluded-angle residue={worst_zero:.3g}",
    )


def test_criterion_09_controlled_crossing(criterion, p_default):
    delta = 0.1
    gain = 1.01 * (1.0 + p_default.lambda1) / (
        (p_default.sigma0 - abs(p_default.sigma1) * (1.0 + delta))
        * math.cos(p_default.theta)
        * p_default.epsilon
    )
    deadline = (1.0 + delta - (-0.5)) / 1.0 + 1.0
    config = SimConfig(dt=1e-3, t_final=deadline, seed=0, initial=State(1.0 + delta, 0.0))
    traj = simulate_controlled(p_default, config, lambda t: -gain)
    crossed = np.nonzero(traj.x <= -0.5)[0]
    t_cross = float(traj.times[crossed[0]]) if crossed.size else math.inf
    criterion(
        9, "controlled crossing", t_cross <= deadline,
        f"crossed x=-1/2 at t={t_cross:.3f} (deadline {deadline})",
    )


def test_criterion_10_far_field_occupation(criterion, flat_noise_occupations):
    escape = flat_noise_occupations.fraction("outside_ball_3")
    criterion(10, "far-field occupation", escape < 0.01, f"fraction={escape:.3g}")


def test_criterion_11_manifest_reproducibility(criterion, tmp_path):
    runs = {
        "validate": ["validate"],
        "flow": ["flow", "--t-final", "1.0"],
        "simulate": ["simulate", "--t-final", "0.5", "--seed", "11",
                     "--set", "sigma1=0.3"],
        "control": ["control", "--control", "extremal", "--t-final", "1.0"],
        "action": ["action"],
        "costs": ["costs", "--method", "both", "--set", "sigma1=0.5"],
        "classify": ["classify", "--set", "sigma1=-0.5"],
        "invariant": ["invariant", "--t-final", "2.0", "--n-paths", "2"],
        "lyapunov": ["lyapunov", "--nodes", "201"],
    }
    mismatched = []
    for label, args in runs.items():
        first = tmp_path / label / "first"
        second = tmp_path / label / "second"
        assert cli_main(args + ["--output", str(first)]) == 0
        assert cli_main(["rerun", str(first / "manifest.txt"),
                         "--output", str(second)]) == 0
        names = sorted(entry.name for entry in first.iterdir())
        if names != sorted(entry.name for entry in second.iterdir()):
            mismatched.append(label)
            continue
        same, diff, errors = filecmp.cmpfiles(first, second, names, shallow=False)
        if diff or errors:
            mismatched.append(label)
    criterion(
        11, "manifest reproducibility", not mismatched,
        f"{len(runs)} commands byte-compared" if not mismatched
        else f"mismatch in {mismatched}",
    )
