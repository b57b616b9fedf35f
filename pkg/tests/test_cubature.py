import functools
import math
import operator

import numpy as np
import pytest

from ifscub.cubature import (
    Integrand,
    MeshConfig,
    apply_rule,
    build_mesh,
    compensated_row_sums,
    h_integrate,
    mesh_boxes,
    refinement_bound,
    word_maps,
)
from ifscub.errors import NumericalError, ValidationError
from ifscub.ifs_core import IFS, compose_word
from ifscub.interpolation import TensorGrid
from ifscub.measure import MeasureSpec
from ifscub.moments import compute_moments
from ifscub.polyspace import random_polynomial
from ifscub.weights import build_rule


def power(k: int) -> Integrand:
    return Integrand(lambda x: x[..., 0] ** k, f"x^{k}")


def cantor_two_point_rule(fractal):
    return build_rule(fractal.ifs, fractal.measure, TensorGrid.from_nodes(fractal.box, [[0.0, 1.0]]))


def test_apply_rule(gallery_fractal):
    fractal = gallery_fractal("cantor")
    rule = cantor_two_point_rule(fractal)
    assert apply_rule(rule, Integrand(lambda x: np.ones(x.shape[:-1]))) == pytest.approx(1.0, abs=1e-15)
    assert apply_rule(rule, power(1)) == pytest.approx(0.5, abs=1e-15)
    # The two-point rule is exact on P_1 only: Q[x^2] = 1/2 while ∫ x^2 = 3/8
    assert apply_rule(rule, power(2)) == pytest.approx(0.5, abs=1e-15)


def test_apply_rule_rejects_non_finite_values(gallery_fractal):
    fractal = gallery_fractal("cantor")
    rule = cantor_two_point_rule(fractal)
    with np.errstate(divide="ignore"):
        with pytest.raises(NumericalError, match="not finite"):
            apply_rule(rule, Integrand(lambda x: 1.0 / x[..., 0], "1/x"))


def test_trivial_mesh(gallery_fractal):
    fractal = gallery_fractal("cantor")
    mesh = build_mesh(fractal.ifs, fractal.measure, 1.0, 1.0)
    assert mesh.words == ((),)
    assert mesh.mus.tolist() == [1.0]
    assert mesh.iterations == 0


def test_cantor_mesh(gallery_fractal):
    fractal = gallery_fractal("cantor")
    mesh = build_mesh(fractal.ifs, fractal.measure, 0.4, 1.0)
    assert mesh.words == ((0,), (1,))
    np.testing.assert_allclose(mesh.rhos, [1 / 3, 1 / 3])
    assert mesh.mesh_size == pytest.approx(1 / 3)


def test_unequal_ratios_mesh():
    ifs = IFS.from_arrays([([[0.5]], [0.0]), ([[0.25]], [0.75])])
    mu = MeasureSpec.explicit([0.6, 0.4])
    mesh = build_mesh(ifs, mu, 0.3, 1.0)
    assert mesh.words == ((0, 0), (0, 1), (1,))
    np.testing.assert_allclose(mesh.rhos, [0.25, 0.125, 0.25])
    np.testing.assert_allclose(mesh.mus, [0.36, 0.24, 0.4])
    assert mesh.mu_total == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("name", ["cantor", "cantor-dust", "vicsek(0)", "vicsek(0.4)"])
@pytest.mark.parametrize("h", [0.5, 0.1, 0.02, 0.004])
def test_mesh_partition_and_minimality(name: str, h: float, gallery_fractal):
    fractal = gallery_fractal(name)
    mesh = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter)
    assert abs(mesh.mu_total - 1.0) <= 1e-13
    assert mesh.iterations <= refinement_bound(fractal.ifs, h, fractal.diameter)
    assert np.all(mesh.rhos * fractal.diameter <= h * (1 + 1e-12))
    rhos = fractal.ifs.rhos
    for word, rho in zip(mesh.words, mesh.rhos):
        if word:
            assert rho / rhos[word[-1]] * fractal.diameter > h


def test_mesh_words_are_depth_first(gallery_fractal):
    fractal = gallery_fractal("vicsek(0)")
    mesh = build_mesh(fractal.ifs, fractal.measure, 0.1, fractal.diameter)
    assert list(mesh.words) == sorted(mesh.words)


def test_mesh_word_cap(gallery_fractal):
    fractal = gallery_fractal("cantor")
    with pytest.raises(ValidationError, match="words"):
        build_mesh(fractal.ifs, fractal.measure, 1e-3, 1.0, MeshConfig(max_words=100))


@pytest.mark.parametrize("h, diameter", [(0.0, 1.0), (-1.0, 1.0), (0.1, 0.0)])
def test_mesh_rejects_bad_sizes(h: float, diameter: float, gallery_fractal):
    fractal = gallery_fractal("cantor")
    with pytest.raises(ValidationError):
        build_mesh(fractal.ifs, fractal.measure, h, diameter)


def test_uniform_decomposition_matches_mesh(gallery_fractal):
    """With equal ratios, L_h is the set of all words of one length."""
    fractal = gallery_fractal("vicsek(0.4)")
    mesh = build_mesh(fractal.ifs, fractal.measure, 0.05, fractal.diameter)
    length = len(mesh.words[0])
    assert all(len(word) == length for word in mesh.words)
    assert len(mesh) == 5**length
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, 3))
    f = Integrand(lambda x: np.cos(x[..., 0] + 2 * x[..., 1]), "cos")

    def on_cell(word) -> float:
        S = compose_word(fractal.ifs, word)
        return apply_rule(rule, Integrand(lambda x: f(S(x)))).real

    direct = math.fsum(0.2**length * on_cell(word) for word in mesh.words)
    assert h_integrate(rule, mesh, fractal.ifs, f).real == pytest.approx(direct, abs=1e-13)


def test_word_maps_match_composition(gallery_fractal):
    fractal = gallery_fractal("cantor-dust-asym")
    words = ((), (0,), (1, 2), (3, 0, 1))
    A, b = word_maps(fractal.ifs, words)
    for index, word in enumerate(words):
        S = compose_word(fractal.ifs, word)
        np.testing.assert_allclose(A[index], S.A, atol=1e-15)
        np.testing.assert_allclose(b[index], S.b, atol=1e-15)


@pytest.mark.parametrize("h", [1.0, 0.4, 0.05, 0.01])
def test_h_integration_transfers_exactness(h: float, gallery_fractal):
    fractal = gallery_fractal("cantor")
    rule = cantor_two_point_rule(fractal)
    mesh = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter)
    assert h_integrate(rule, mesh, fractal.ifs, power(0)) == pytest.approx(1.0, abs=1e-14)
    assert h_integrate(rule, mesh, fractal.ifs, power(1)) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("name", ["cantor-dust", "vicsek(0.4)", "cantor-dust-asym"])
def test_h_integration_of_polynomials(name: str, gallery_fractal):
    fractal = gallery_fractal(name)
    k = 3
    table = compute_moments(fractal.ifs, fractal.measure, k)
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, k))
    p = random_polynomial(2, k, np.random.default_rng(2))
    for h in (fractal.diameter, 0.3 * fractal.diameter, 0.05 * fractal.diameter):
        mesh = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter)
        value = h_integrate(rule, mesh, fractal.ifs, Integrand(p))
        assert value.real == pytest.approx(table.integrate(p), abs=1e-10)


def test_h_version_rate_for_the_two_point_rule(gallery_fractal):
    """Q_h[x^2] with a rule exact on P_1 converges like h^2."""
    fractal = gallery_fractal("cantor")
    rule = cantor_two_point_rule(fractal)
    errors, sizes = [], []
    for h in (0.5, 0.25, 0.125, 0.0625, 0.03125):
        mesh = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter)
        errors.append(abs(h_integrate(rule, mesh, fractal.ifs, power(2)) - 3 / 8))
        sizes.append(mesh.mesh_size)
    order = math.log(errors[0] / errors[-1]) / math.log(sizes[0] / sizes[-1])
    assert order == pytest.approx(2.0, abs=0.1)


def test_h_integrate_reports_the_failing_word(gallery_fractal):
    fractal = gallery_fractal("cantor")
    rule = cantor_two_point_rule(fractal)
    mesh = build_mesh(fractal.ifs, fractal.measure, 0.4, 1.0)
    f = Integrand(lambda x: np.where(x[..., 0] > 0.9, np.inf, 0.0), "step")
    with pytest.raises(NumericalError, match=r"S_\(1,\)"):
        h_integrate(rule, mesh, fractal.ifs, f)


def test_h_integrate_is_independent_of_batching(gallery_fractal, monkeypatch):
    fractal = gallery_fractal("vicsek(0)")
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, 2))
    mesh = build_mesh(fractal.ifs, fractal.measure, 0.05, fractal.diameter)
    f = Integrand(lambda x: np.exp(1j * x[..., 0]) / (3 + x[..., 1]))
    full = h_integrate(rule, mesh, fractal.ifs, f)
    monkeypatch.setattr("ifscub.cubature.BATCH_POINTS", 7)
    assert h_integrate(rule, mesh, fractal.ifs, f) == pytest.approx(full, rel=1e-14)


def test_compensated_row_sums():
    tiny = [1e-16] * 1000
    terms = np.array([[1.0, *tiny], [1j, *(1j * t for t in tiny)], [0.1] * 10 + [0.0] * 991])
    sums = compensated_row_sums(terms)
    # Adding the tiny terms one by one to 1 never moves away from 1
    assert functools.reduce(operator.add, tiny, 1.0) == 1.0
    assert sums[0].real == pytest.approx(math.fsum([1.0, *tiny]), rel=1e-15)
    assert sums[1].imag == pytest.approx(math.fsum([1.0, *tiny]), rel=1e-15)
    assert sums[2] == pytest.approx(1.0, abs=2e-16)


def test_mesh_boxes(gallery_fractal):
    fractal = gallery_fractal("cantor")
    whole = mesh_boxes(build_mesh(fractal.ifs, fractal.measure, 1.0, 1.0), fractal.ifs, fractal.box)
    assert [box.tolist() for box in whole] == [[[0.0], [1.0]]]
    boxes = mesh_boxes(build_mesh(fractal.ifs, fractal.measure, 0.4, 1.0), fractal.ifs, fractal.box)
    np.testing.assert_allclose(np.sort(boxes[0], axis=0), [[0.0], [1 / 3]])
    np.testing.assert_allclose(np.sort(boxes[1], axis=0), [[2 / 3], [1.0]])


def test_evaluations_stay_inside_mesh_boxes(gallery_fractal):
    fractal = gallery_fractal("vicsek(0.4)")
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, 2))
    mesh = build_mesh(fractal.ifs, fractal.measure, 0.3, fractal.diameter)
    A, b = word_maps(fractal.ifs, mesh.words)
    boxes = mesh_boxes(mesh, fractal.ifs, fractal.box)
    assert len(boxes) == len(mesh)
    for corners, A_m, b_m in zip(boxes, A, b):
        assert corners.shape == (4, 2)
        images = rule.points @ A_m.T + b_m
        assert np.all(images >= corners.min(axis=0) - 1e-12)
        assert np.all(images <= corners.max(axis=0) + 1e-12)
        assert fractal.box.contains(images, tol=1e-12)


def test_refinement_bound():
    ifs = IFS.from_arrays([([[1 / 3]], [0.0]), ([[1 / 3]], [2 / 3])])
    assert refinement_bound(ifs, 2.0, 1.0) == 0
    assert refinement_bound(ifs, 0.4, 1.0) == 1
    assert refinement_bound(ifs, 0.1, 1.0) == 3
