import numpy as np
import pytest

from helmrecon import (
    AdmissibilityError,
    BoundaryWeights,
    Grid,
    HelmholtzOperator,
    NearEigenfrequencyError,
    NodalField,
    PwcField,
    build_boundary_weights,
    dtn_data_norm,
    dtn_for_field,
    load_dtn,
    make_uniform_partition,
    save_dtn,
    spectrum_guard,
)
from helmrecon.forward import boundary_loop, load_weights, save_weights, unit_square_eigenvalues

LAM1 = 2 * np.pi ** 2


def const_field(m, value=1.0, bounds=(0.5, 2.0)):
    part = make_uniform_partition(Grid(m), 1)
    return PwcField(part, np.array([float(value)]), bounds)


# ---------------------------------------------------------------- guard


def test_guard_low_window_example():
    win = spectrum_guard(5.0, 1.0, 2.0)
    assert win.kind == "low"
    assert win.window[1] == pytest.approx(LAM1 / 2.0)
    assert win.distance == pytest.approx(LAM1 / 2.0 - 5.0)


def test_guard_rejects_band_edge_exactly():
    with pytest.raises(AdmissibilityError, match="band 1"):
        spectrum_guard(LAM1 / 2.0, 1.0, 2.0)


def test_guard_rejects_exact_eigenvalue():
    with pytest.raises(AdmissibilityError):
        spectrum_guard(LAM1, 1.0, 1.0)


def test_guard_band_window():
    # between lam_1 = 2 pi^2 and lam_2 = 5 pi^2 for the unit coefficient box
    win = spectrum_guard(30.0, 1.0, 1.0)
    assert win.kind == "band"
    assert win.band_index == 1
    assert win.window[0] == pytest.approx(LAM1)
    assert win.window[1] == pytest.approx(5 * np.pi ** 2)


def test_guard_monotone_in_bounds(rng):
    # admissible for (b1, b2) stays admissible for any narrower box
    for _ in range(50):
        b1 = rng.uniform(0.5, 1.5)
        b2 = b1 + rng.uniform(0.0, 1.5)
        w2 = rng.uniform(1e-3, 40.0)
        try:
            spectrum_guard(w2, b1, b2)
        except AdmissibilityError:
            continue
        bb1 = rng.uniform(b1, b2)
        bb2 = rng.uniform(bb1, b2)
        spectrum_guard(w2, bb1, bb2)  # must not raise


def test_eigenvalue_enumeration():
    lams = unit_square_eigenvalues(100.0)
    expected = np.pi ** 2 * np.array([2, 5, 8, 10])
    assert np.allclose(lams[:4], expected)
    assert lams[-1] > 100.0


# ---------------------------------------------------------------- solver


def test_manufactured_solution_second_order():
    errs = {}
    for m in (17, 33):
        g = Grid(m)
        op = HelmholtzOperator(const_field(m), 1.0)
        ustar = NodalField.from_function(g, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        f = NodalField(g, (2 * np.pi ** 2 - 1.0) * ustar.values)
        u = op.solve(g=None, f=f)
        errs[m] = np.abs(u.values - ustar.values).max()
    ratio = errs[17] / errs[33]
    assert ratio == pytest.approx(4.0, rel=0.15)


def test_harmonic_limit_exact():
    m = 17
    g = Grid(m)
    op = HelmholtzOperator(const_field(m), 1e-6)
    ustar = NodalField.from_function(g, lambda x, y: x * x - y * y)
    f = NodalField(g, -1e-6 * ustar.values)
    gb = ustar.values[boundary_loop(g)]
    u = op.solve(g=gb, f=f)
    assert np.abs(u.values - ustar.values).max() < 1e-12


def test_zero_data_gives_zero_solution():
    op = HelmholtzOperator(const_field(17), 1.0)
    u = op.solve()
    assert np.all(u.values == 0.0)


def test_near_eigenfrequency_error_smallest_pivot():
    # smallest discrete eigenvalue of the five-point operator sits just below
    # the continuum one, so the guard passes but the factorization is singular
    m = 9
    h = 1.0 / (m - 1)
    lam_h = (4 - 4 * np.cos(np.pi * h)) / h ** 2
    with pytest.raises(NearEigenfrequencyError) as exc:
        HelmholtzOperator(const_field(m, 1.0, (1.0, 1.0)), lam_h)
    assert exc.value.smallest_pivot is not None
    assert exc.value.smallest_pivot < 1e-10


# ---------------------------------------------------------------- weights


def test_weights_constant_vector(weights17):
    ones = np.ones(weights17.nb)
    assert np.allclose(weights17.w_plus @ ones, weights17.h_b * ones, atol=1e-12)


def test_weights_mutually_inverse(weights17):
    prod = weights17.w_plus @ weights17.w_minus
    assert np.linalg.norm(prod - weights17.h_b ** 2 * np.eye(weights17.nb)) <= 1e-10


def test_weights_top_mode_against_dense_eigensolve(weights17):
    # dense eigensolve oracle: largest weight equals h_b sqrt(1 + 4/h_b^2)
    top = np.linalg.eigvalsh(weights17.w_plus).max()
    hb = weights17.h_b
    assert top == pytest.approx(hb * np.sqrt(1.0 + 4.0 / hb ** 2), rel=1e-12)


def test_weights_file_round_trip(tmp_path, grid17, weights17):
    path = tmp_path / "weights.txt"
    save_weights(path, weights17)
    back = load_weights(path, grid17)
    assert np.allclose(back.w_plus, weights17.w_plus)
    assert np.allclose(back.w_minus, weights17.w_minus)
    assert np.allclose(back.w_minus_half, weights17.w_minus_half, atol=1e-12)


# ---------------------------------------------------------------- DtN matrix


def test_dtn_symmetry(grid17, weights17, rng):
    part = make_uniform_partition(grid17, 2)
    c = PwcField(part, rng.uniform(1.0, 2.0, 4), (1.0, 2.0))
    dtn = dtn_for_field(c, 5.0, weights=weights17)
    assert dtn.symmetry_defect() <= 1e-9


def test_dtn_constants_near_kernel_at_low_frequency():
    dtn = dtn_for_field(const_field(17), 1e-8)
    ones = np.ones(dtn.weights.nb)
    assert np.linalg.norm(dtn.lam @ ones) <= 1e-6 * np.linalg.norm(dtn.lam, ord=2) \
        * np.linalg.norm(ones)


def test_dtn_functional_grid_convergence():
    # Richardson oracle: harmonic data x^2 - y^2, functional against psi = x;
    # errors measured against the finest grid
    def functional(m):
        g = Grid(m)
        dtn = dtn_for_field(const_field(m), 1e-9)
        xy = g.node_coords()[boundary_loop(g)]
        gb = xy[:, 0] ** 2 - xy[:, 1] ** 2
        return float(xy[:, 0] @ (dtn.lam @ gb))

    s17, s33, s65 = functional(17), functional(33), functional(65)
    e17, e33 = abs(s17 - s65), abs(s33 - s65)
    order = np.log2(e17 / e33)
    assert order >= 1.0


def test_dtn_continuity_in_coefficient(grid17, weights17):
    part = make_uniform_partition(grid17, 2)
    base = PwcField(part, np.full(4, 1.5), (1.0, 2.0))
    bumped = base.with_coeffs(base.coeffs + np.array([1e-6, 0, 0, 0]))
    d0 = dtn_for_field(base, 5.0, weights=weights17)
    d1 = dtn_for_field(bumped, 5.0, weights=weights17)
    change = dtn_data_norm(d1.lam - d0.lam, weights17)
    scale = dtn_data_norm(d0.lam, weights17)
    assert change <= 1e-4 * scale  # bounded sensitivity, not a jump


def test_dtn_file_round_trip(tmp_path, grid17, weights17):
    dtn = dtn_for_field(const_field(17), 1.0, weights=weights17)
    path = tmp_path / "dtn.txt"
    save_dtn(path, dtn)
    assert path.read_text().startswith("dtn 64 1.0\n")
    back = load_dtn(path, weights17)
    assert np.array_equal(back.lam, dtn.lam)
    assert back.omega2 == dtn.omega2


# ---------------------------------------------------------------- data norm


def _identity_weights(nb: int) -> BoundaryWeights:
    eye = np.eye(nb)
    return BoundaryWeights(grid=Grid(int(nb / 4) + 1), h_b=1.0,
                           w_plus=eye, w_minus=eye, w_minus_half=eye)


def test_data_norm_zero():
    w = _identity_weights(8)
    assert dtn_data_norm(np.zeros((8, 8)), w) == 0.0


def test_data_norm_known_singular_values():
    w = _identity_weights(8)
    a = np.zeros((8, 8))
    a[0, 0], a[1, 1] = 3.0, 4.0
    assert dtn_data_norm(a, w, kind="hs") == pytest.approx(5.0)
    assert dtn_data_norm(a, w, kind="op") == pytest.approx(4.0)


def test_data_norm_matches_dense_svd_oracle(weights17, rng):
    a = rng.standard_normal((weights17.nb, weights17.nb))
    weighted = weights17.w_minus_half @ a @ weights17.w_minus_half
    sv = np.linalg.svd(weighted, compute_uv=False)
    assert dtn_data_norm(a, weights17, "hs") == pytest.approx(
        float(np.sqrt(np.sum(sv ** 2))), rel=1e-12)
    assert dtn_data_norm(a, weights17, "op") == pytest.approx(float(sv[0]), rel=1e-12)
