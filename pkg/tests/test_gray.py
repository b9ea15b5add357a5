import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darksoliton import spectral as sp
from darksoliton.errors import (
    BoxTooSmallWarning,
    ChainBrokenError,
    CollapseToZeroError,
    EtaTouchesOneError,
    InvalidParameterError,
    MultiplierSingularError,
    NoConvergenceError,
)
from darksoliton.gray import (
    SolverOptions,
    continue_family,
    explicit_local_profile,
    first_integral_defect,
    linearized_apply,
    nonlinear_rhs,
    reconstruct_phase,
    residual,
    solve_fixed_point,
    solve_gray,
    solve_newton,
)
from darksoliton.kernels import KernelSpec, build_kernel, contact_kernel
from darksoliton.spectral import Grid

from conftest import gray_chain, random_even


def bump(grid, width=2.0):
    return np.exp(-(grid.x / width) ** 2)


def test_explicit_profile_closed_form(grid):
    p = explicit_local_profile(1.0, grid)
    assert p.eta.values[grid.center] == pytest.approx(0.5, abs=1e-15)
    for c in (0.2, 0.9, 1.3):
        p = explicit_local_profile(c, grid)
        assert p.theta.values[grid.center] == pytest.approx(-math.pi / 2, abs=1e-15)
        assert p.u[grid.center] == pytest.approx(-1j * c / math.sqrt(2), abs=1e-15)
        assert np.max(np.abs(np.abs(p.u) ** 2 - (1 - p.eta.values))) < 1e-12
    assert np.all(explicit_local_profile(math.sqrt(2), grid).eta.values == 0)
    with pytest.raises(InvalidParameterError):
        explicit_local_profile(0.0, grid)


def test_trivial_field_is_a_zero(grid):
    zero = grid.field(np.zeros(grid.n))
    k = build_kernel(KernelSpec("gaussian", {"lambda": 0.4}))
    assert np.all(nonlinear_rhs(k, 0.5, zero).values == 0)
    assert np.all(residual(k, 0.5, zero).values == 0)


def test_rhs_nonnegative_on_constant_field(grid):
    eps = grid.field(np.full(grid.n, 0.01))
    assert np.all(nonlinear_rhs(contact_kernel(), 0.0, eps).values >= 0)


def test_rhs_rejects_eta_at_one(grid):
    eta = grid.field(np.where(np.abs(grid.x) < 1, 1.0, 0.0))
    with pytest.raises(EtaTouchesOneError):
        nonlinear_rhs(contact_kernel(), 0.5, eta)


@pytest.mark.parametrize("c", [0.3, 0.7, 1.2])
def test_explicit_profile_is_a_fixed_point(grid, c):
    k = contact_kernel()
    eta = explicit_local_profile(c, grid).eta
    back = sp.apply_lc(k, c, nonlinear_rhs(k, c, eta)).values
    assert np.max(np.abs(back - eta.values)) < 1e-8
    assert np.max(np.abs(residual(k, c, eta).values)) < 1e-8


def test_local_profile_residual_scale_under_gaussian(grid):
    eta = explicit_local_profile(0.5, grid).eta
    r = np.max(np.abs(residual(build_kernel(KernelSpec("gaussian", {"lambda": 0.1})), 0.5, eta).values))
    assert r > 1e-4


def test_fixed_point_recovers_explicit(grid):
    ex = explicit_local_profile(0.7, grid)
    p, r = solve_fixed_point(contact_kernel(), 0.7, grid.field(0.8 * ex.eta.values), SolverOptions("fixed_point"))
    assert r.converged and r.residual_sup < 1e-9
    assert np.max(np.abs(p.eta.values - ex.eta.values)) < 1e-8


def test_fixed_point_collapses_from_zero(grid):
    with pytest.raises(CollapseToZeroError) as info:
        solve_fixed_point(contact_kernel(), 0.7, grid.field(np.zeros(grid.n)))
    assert info.value.report.status == "collapse-to-zero"
    assert np.all(info.value.profile.eta.values == 0)


def test_newton_from_bumped_init(grid):
    ex = explicit_local_profile(0.7, grid)
    init = grid.field(ex.eta.values + 0.01 * bump(grid))
    p, r = solve_newton(contact_kernel(), 0.7, init, SolverOptions(tol=1e-10))
    assert r.iterations <= 6 and r.residual_sup < 1e-10
    assert np.max(np.abs(p.eta.values - ex.eta.values)) < 1e-9


def test_newton_at_exact_root(grid):
    ex = explicit_local_profile(0.7, grid)
    p, r = solve_newton(contact_kernel(), 0.7, ex.eta)
    assert r.iterations <= 1
    assert r.iterations == 0 or r.step_norm < 1e-9


def test_newton_and_fixed_point_agree(grid):
    k = build_kernel(KernelSpec("gaussian", {"lambda": 0.2}))
    init = explicit_local_profile(0.5, grid).eta
    pn, rn = solve_newton(k, 0.5, init)
    pf, rf = solve_fixed_point(k, 0.5, init, SolverOptions("fixed_point"))
    assert rf.residual_sup < 1e-8 and 0 < rf.eta_max < 1
    assert np.max(np.abs(pn.eta.values - pf.eta.values)) < 1e-7
    assert np.max(np.abs(pn.eta.values - pf.eta.values)) < 10 * SolverOptions().tol


def test_no_convergence_carries_partial_result(grid):
    k = build_kernel(KernelSpec("gaussian", {"lambda": 0.5}))
    init = explicit_local_profile(0.5, grid).eta
    with pytest.raises(NoConvergenceError) as info:
        solve_fixed_point(k, 0.5, init, SolverOptions("fixed_point", max_iter=2))
    assert info.value.report is not None and not info.value.report.converged
    assert info.value.profile is not None


def test_inadmissible_speed(grid):
    k = build_kernel(KernelSpec("gaussian", {"lambda": 3}))
    with pytest.raises(MultiplierSingularError):
        solve_gray(k, 1.2, explicit_local_profile(1.2, grid).eta)
    with pytest.raises(InvalidParameterError):
        solve_gray(contact_kernel(), 1.5, grid.field(np.zeros(grid.n)))


def test_options_validation():
    with pytest.raises(InvalidParameterError):
        SolverOptions(method="bisection")
    with pytest.raises(InvalidParameterError):
        SolverOptions(tol=0)
    with pytest.raises(InvalidParameterError):
        SolverOptions(max_iter=0)
    with pytest.raises(InvalidParameterError):
        SolverOptions(damping=1.5)


def test_phase_reconstruction(grid):
    theta, ure, uim = reconstruct_phase(grid.field(np.zeros(grid.n)), 0.7)
    assert np.allclose(theta.values, -math.pi / 2, atol=1e-15)
    assert np.allclose(ure.values + 1j * uim.values, -1j, atol=1e-15)
    ex = explicit_local_profile(1.0, grid)
    theta, _, _ = reconstruct_phase(ex.eta, 1.0)
    assert np.max(np.abs(theta.values - ex.theta.values)) < 1e-7
    ex = explicit_local_profile(0.5, grid)
    theta, _, _ = reconstruct_phase(ex.eta, 0.5)
    # theta increases with x, so theta(-inf) - theta(+inf) is negative and finite
    shift = theta.values[0] - theta.values[-1]
    assert -math.pi < shift < 0


def test_first_integral_detector(grid):
    ex = explicit_local_profile(0.5, grid)
    assert first_integral_defect(ex) < 1e-8
    flat = explicit_local_profile(math.sqrt(2), grid)
    assert first_integral_defect(flat) == 0.0
    # modulus changed, phase kept: the pair no longer solves the traveling-wave equation
    wrong = type(ex)(0.5, grid.field(ex.eta.values + 0.01 * bump(grid)), ex.theta, ex.u_re, ex.u_im)
    assert first_integral_defect(wrong) > 1e-4


@pytest.mark.parametrize("c", [0.3, 0.7, 1.2])
def test_null_vector(grid, c):
    eta = explicit_local_profile(c, grid).eta
    d1 = sp.spectral_derivative(eta, 1)
    out = linearized_apply(contact_kernel(), c, eta, False, d1).values
    assert np.linalg.norm(out) / np.linalg.norm(d1.values) < 1e-6


def test_linearization_is_linear(grid):
    eta = explicit_local_profile(0.6, grid).eta
    out = linearized_apply(contact_kernel(), 0.6, eta, False, grid.field(np.zeros(grid.n)))
    assert np.all(out.values == 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["contact", "gaussian", "vanderwaals"]))
def test_linearization_matches_finite_differences(seed, family):
    grid = Grid(40.0, 1024)
    spec = {"contact": KernelSpec("contact"), "gaussian": KernelSpec("gaussian", {"lambda": 0.3}),
            "vanderwaals": KernelSpec("vanderwaals", {"lambda": -0.2, "beta": 0.5})}[family]
    k = build_kernel(spec)
    c = 0.6
    eta = explicit_local_profile(c, grid).eta
    sigma = grid.field(random_even(np.random.default_rng(seed), grid, 0.1))
    eps = 1e-6
    fd = (residual(k, c, grid.field(eta.values + eps * sigma.values)).values
          - residual(k, c, grid.field(eta.values - eps * sigma.values)).values) / (2 * eps)
    lin = linearized_apply(k, c, eta, False, sigma).values
    assert np.linalg.norm(fd - lin) / np.linalg.norm(lin) < 1e-5


def test_atoms_only_linearization_drops_density(grid):
    k = build_kernel(KernelSpec("vanderwaals", {"lambda": 0.2, "beta": 1.0}))
    a = k.atoms[0][1]
    c = 0.6
    eta = explicit_local_profile(c, grid).eta.values
    sigma = bump(grid)
    d1 = sp.derivative_array(eta, grid, 1)
    # derivative written out for W = a delta_0
    expected = (sp.derivative_array(sigma, grid, 2) - 2 * a * sigma + c**2 * sigma
                + (c**2 * eta * (2 - eta) + d1**2) / (2 * (1 - eta) ** 2) * sigma
                + d1 / (1 - eta) * sp.derivative_array(sigma, grid, 1) + 4 * a * eta * sigma)
    out = linearized_apply(k, c, grid.field(eta), True, grid.field(sigma)).values
    assert np.max(np.abs(out - expected)) < 1e-10


def test_continuation_at_zero_returns_explicit(grid):
    res = continue_family(KernelSpec("gaussian", {"lambda": 1.0}), 0.5, [0.0], grid=grid)
    lam, p, r = res[0]
    assert lam == 0.0 and r.converged
    assert np.array_equal(p.eta.values, explicit_local_profile(0.5, grid).eta.values)


def test_continuation_distances_grow_with_lambda():
    res = gray_chain("gaussian", 0.5, [0.05, 0.1, 0.2, 0.4])
    assert all(r.converged for _, _, r in res)
    g = res[0][1].grid
    ref = explicit_local_profile(0.5, g).eta.values
    d = [np.max(np.abs(p.eta.values - ref)) for _, p, _ in res]
    assert all(a < b for a, b in zip(d, d[1:]))


def test_nematic_continuation_approaches_local():
    res = gray_chain("nematic", 0.5, [0.025, 0.05, 0.1])
    g = res[0][1].grid
    ref = explicit_local_profile(0.5, g).eta.values
    d = [np.max(np.abs(p.eta.values - ref)) for _, p, _ in res]
    assert d[0] < d[1] < d[2]


def test_chain_broken_reports_partial_results(grid):
    spec = KernelSpec("gaussian", {"lambda": 1.0})
    with pytest.raises(ChainBrokenError) as info:
        continue_family(spec, 1.2, [0.1, 3.0], grid=grid)
    assert info.value.lam == 3.0
    assert len(info.value.results) == 1 and info.value.results[0][0] == 0.1


def test_vanderwaals_attractive_undershoot():
    res = gray_chain("vanderwaals", 0.1, [-0.2], beta=0.5)
    _, p, r = res[-1]
    assert r.converged
    assert p.eta.values.min() < 0


def test_converged_profiles_are_normalised():
    for _, p, r in gray_chain("gaussian", 0.5, [0.05, 0.1, 0.2, 0.4]) + gray_chain("vanderwaals", 0.1, [-0.2], beta=0.5):
        eta = p.eta.values
        g = p.grid
        assert np.max(np.abs(eta - eta[g.mirror_index()])) < 1e-10
        assert np.argmax(np.abs(eta)) == g.center
        assert eta.max() < 1
        assert np.max(np.abs(np.abs(p.u) ** 2 - (1 - eta))) < 1e-10
        assert r.first_integral_defect < 1e-6


def test_box_warning_for_slowly_decaying_profile():
    grid = Grid(8.0, 512)
    with pytest.warns(BoxTooSmallWarning):
        solve_gray(contact_kernel(), 1.35, explicit_local_profile(1.35, grid).eta)


def test_fixed_point_init_must_stay_below_one(grid):
    with pytest.raises(EtaTouchesOneError):
        solve_fixed_point(contact_kernel(), 0.5, grid.field(np.full(grid.n, 1.0)))
