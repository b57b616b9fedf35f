import numpy as np
import pytest

from ifscub.errors import NumericalError, ValidationError
from ifscub.interpolation import TensorGrid
from ifscub.measure import MeasureSpec
from ifscub.moments import compute_moments
from ifscub.polyspace import SpaceSpec
from ifscub.weights import (
    SolveMethod,
    SolverConfig,
    assemble_S,
    build_rule,
    monomial_values,
    solve_weights,
    spectrum,
    verify_exactness,
)


def test_two_point_cantor_system(gallery_fractal):
    fractal = gallery_fractal("cantor")
    grid = TensorGrid.from_nodes(fractal.box, [[0.0, 1.0]])
    S = assemble_S(fractal.ifs, fractal.measure, grid)
    np.testing.assert_allclose(S.matrix, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-15)
    np.testing.assert_allclose(spectrum(S), [1.0, 1 / 3], atol=1e-14)

    solution = solve_weights(S)
    np.testing.assert_allclose(solution.weights, [0.5, 0.5], atol=1e-14)
    assert solution.method == SolveMethod.POWER
    assert solution.second_eigenvalue == pytest.approx(1 / 3, rel=1e-6)
    assert solution.gap == pytest.approx(2 / 3, rel=1e-6)


@pytest.mark.parametrize("N", range(1, 21))
def test_cantor_rules_are_exact(N: int, gallery_fractal):
    fractal = gallery_fractal("cantor")
    table = compute_moments(fractal.ifs, fractal.measure, N)
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N))
    report = verify_exactness(rule, table, SpaceSpec.tensor(1, N))
    assert report.max_error <= 1e-11
    assert rule.l1_norm >= 1.0


@pytest.mark.parametrize("N", range(1, 11))
def test_cantor_spectrum(N: int, gallery_fractal):
    """In an IFS-invariant space the eigenvalues of S are sum_l mu_l rho_l^k = 3^-k, k = 0..N."""
    fractal = gallery_fractal("cantor")
    S = assemble_S(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N))
    eigenvalues = spectrum(S)
    assert np.max(np.abs(eigenvalues.imag)) <= 1e-9
    np.testing.assert_allclose(np.sort(eigenvalues.real)[::-1], 3.0 ** -np.arange(N + 1), atol=1e-9)


@pytest.mark.parametrize("theta", ["0", "0.4", "pi/4"])
@pytest.mark.parametrize("N", [2, 6, 12])
def test_vicsek_weight_residuals(theta: str, N: int, gallery_fractal):
    fractal = gallery_fractal(f"vicsek({theta})")
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N))
    assert rule.size == (N + 1) ** 2
    assert rule.residual <= 1e-12
    assert abs(rule.weights.sum() - 1.0) <= 1e-12
    assert 0.0 < rule.gap <= 1.0


@pytest.mark.parametrize("N", range(1, 9))
def test_non_invariant_space_is_exact_on_total_degree(N: int, gallery_fractal):
    """With a rotated centre map Q_N is not invariant, but the rule stays exact on P_N."""
    fractal = gallery_fractal("vicsek(0.4)")
    table = compute_moments(fractal.ifs, fractal.measure, N)
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N))
    report = verify_exactness(rule, table, SpaceSpec.total(2, N))
    assert report.max_error <= 1e-10


def test_invariant_tensor_space_is_exact(gallery_fractal):
    fractal = gallery_fractal("cantor-dust")
    N = 4
    table = compute_moments(fractal.ifs, fractal.measure, 2 * N)
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N))
    assert verify_exactness(rule, table, SpaceSpec.tensor(2, N)).max_error <= 1e-12


def test_weights_do_not_depend_on_the_unisolvent_set(gallery_fractal):
    """Two rules exact on the same invariant space agree on every polynomial of that space."""
    fractal = gallery_fractal("cantor")
    chebyshev = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, 3))
    uniform = build_rule(fractal.ifs, fractal.measure, TensorGrid.from_nodes(fractal.box, [[0.0, 0.3, 0.6, 1.0]]))
    for j in range(4):
        assert chebyshev.weights @ chebyshev.points[:, 0] ** j == pytest.approx(
            uniform.weights @ uniform.points[:, 0] ** j, abs=1e-13
        )


def _linspace_grid(box, N: int) -> TensorGrid:
    return TensorGrid.from_nodes(box, [np.linspace(lo, hi, N + 1) for lo, hi in zip(box.lo, box.hi)])


def _multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance from an eigenvalue of either set to the nearest one of the other."""
    distances = np.abs(a[:, None] - b[None, :])
    return float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))


@pytest.mark.parametrize("name, N", [("cantor", 6), ("cantor-dust", 3), ("vicsek(0.4)", 3), ("vicsek(0.4)", 5)])
def test_spectrum_does_not_depend_on_the_unisolvent_set(name: str, N: int, gallery_fractal):
    """Interpolation only moves the parts of F[x^alpha] that leave Q_N into lower total degree."""
    fractal = gallery_fractal(name)
    chebyshev = spectrum(assemble_S(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N)))
    uniform = spectrum(assemble_S(fractal.ifs, fractal.measure, _linspace_grid(fractal.box, N)))
    assert chebyshev.shape == uniform.shape == ((N + 1) ** fractal.ifs.dim,)
    assert _multiset_distance(chebyshev, uniform) <= 1e-8


@pytest.mark.parametrize("name", ["cantor-dust", "vicsek(0.4)", "sierpinski-fat"])
def test_weights_integrate_images_like_the_originals(name: str, gallery_fractal):
    """w · (S E(p)) = w · E(p) for every monomial of the space, where E(p) are the values at the points."""
    fractal = gallery_fractal(name)
    N = 5
    grid = TensorGrid.chebyshev(fractal.box, N)
    S = assemble_S(fractal.ifs, fractal.measure, grid).matrix
    rule = build_rule(fractal.ifs, fractal.measure, grid)
    for alpha in SpaceSpec.tensor(2, N).basis:
        values = monomial_values(grid.points, alpha)
        scale = max(1.0, float(np.max(np.abs(values))))
        assert abs(rule.weights @ (S @ values) - rule.weights @ values) <= 1e-12 * scale


PLANAR_SYSTEMS = [
    "cantor-dust",
    "cantor-dust-asym",
    "vicsek(0)",
    "vicsek(0.4)",
    "sierpinski-fat",
    "koch",
    "barnsley-fern",
]
ROW_SUM_CASES = [("cantor", N) for N in range(1, 21)] + [(name, N) for name in PLANAR_SYSTEMS for N in range(1, 13)]


@pytest.mark.parametrize("name, N", ROW_SUM_CASES)
def test_rows_of_S_sum_to_one(name: str, N: int, gallery_fractal):
    fractal = gallery_fractal(name)
    S = assemble_S(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, N))
    np.testing.assert_allclose(S.matrix.sum(axis=1), 1.0, rtol=0.0, atol=1e-10)


def test_dense_fallback_when_power_iteration_stalls():
    # S has the eigenvalue -1, so power iteration on Sᵀ oscillates forever
    S = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.5]])
    solution = solve_weights(S, SolverConfig(max_iter=2_000))
    assert solution.method == SolveMethod.DENSE
    np.testing.assert_allclose(solution.weights, [0.5, 0.5, 0.0], atol=1e-14)
    assert solution.residual <= 1e-14


def test_multiple_eigenvalue_one_is_rejected():
    with pytest.raises(NumericalError, match="not numerically simple"):
        solve_weights(np.eye(3), SolverConfig(max_iter=0))


def test_dense_limit():
    with pytest.raises(NumericalError, match="dense limit"):
        solve_weights(np.eye(3), SolverConfig(max_iter=0, dense_limit=2))


def test_assemble_rejects_mismatched_inputs(gallery_fractal):
    fractal = gallery_fractal("cantor")
    grid = TensorGrid.chebyshev(fractal.box, 3)
    with pytest.raises(ValidationError):
        assemble_S(fractal.ifs, MeasureSpec.uniform(3), grid)
    square = gallery_fractal("cantor-dust")
    with pytest.raises(ValidationError):
        assemble_S(square.ifs, square.measure, grid)


def test_exactness_needs_enough_moments(gallery_fractal):
    fractal = gallery_fractal("cantor-dust")
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, 2))
    table = compute_moments(fractal.ifs, fractal.measure, 3)
    with pytest.raises(ValidationError):
        verify_exactness(rule, table, SpaceSpec.tensor(2, 2))
