import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmrecon import (
    ConfigurationError,
    DiscretizationMismatchError,
    Grid,
    NodalField,
    Partition,
    PwcField,
    bregman,
    clamp_to_bounds,
    embed,
    l2_dist,
    l2_norm,
    load_nodal_field,
    load_pwc_field,
    make_uniform_partition,
    project,
    refine_partition,
    save_field,
    split_region,
)
from helmrecon.domain import boundary_loop, cell_corners, interior_nodes


# ---------------------------------------------------------------- grid


def test_grid_interior_boundary_disjoint_cover():
    g = Grid(9)
    loop = boundary_loop(g)
    interior = interior_nodes(g)
    assert len(set(loop)) == g.n_boundary == 32
    assert set(loop) | set(interior) == set(range(g.n_nodes))
    assert set(loop) & set(interior) == set()


def test_grid_boundary_loop_is_cyclic_walk():
    g = Grid(7)
    loop = boundary_loop(g)
    xy = g.node_coords()[loop]
    # consecutive loop nodes (cyclically) are exactly one spacing apart
    diffs = np.diff(np.vstack([xy, xy[:1]]), axis=0)
    steps = np.linalg.norm(diffs, axis=1)
    assert np.allclose(steps, g.h)


def test_grid_too_small_rejected():
    with pytest.raises(ConfigurationError):
        Grid(2)


# ---------------------------------------------------------------- partitions


def test_uniform_partition_m9_k2():
    p = make_uniform_partition(Grid(9), 2)
    assert p.n_regions == 4
    assert np.all(p.region_cell_counts == 16)  # 4x4 grid cells each
    assert p.r0 == pytest.approx(np.sqrt(2) / 2)
    assert p.region_areas.sum() == pytest.approx(1.0)


def test_uniform_partition_identity():
    p = make_uniform_partition(Grid(9), 1)
    assert p.n_regions == 1
    assert np.all(p.cell_to_region == 0)


def test_uniform_partition_divisibility_error():
    with pytest.raises(ConfigurationError, match="m=9.*k=3"):
        make_uniform_partition(Grid(9), 3)


def test_refine_partition_dyadic():
    p = make_uniform_partition(Grid(9), 2)
    q = refine_partition(p, 2)
    assert q.n_regions == 16
    assert q.level == p.level + 1
    assert q.parent is p
    # child->parent map surjective with fibers of size 4
    fibers = np.bincount(q.child_to_parent, minlength=4)
    assert np.all(fibers == 4)
    # nesting: each child region sits inside its parent region
    for child in range(16):
        cells = q.region_cells(child)
        assert np.all(p.cell_to_region[cells] == q.child_to_parent[child])


def test_refine_from_single_region():
    p = make_uniform_partition(Grid(9), 1)
    q = refine_partition(p, 2)
    assert q.n_regions == 4


def test_split_region_quadrants():
    p = make_uniform_partition(Grid(9), 2)
    q = split_region(p, 3)
    assert q.n_regions == 7
    fibers = np.bincount(q.child_to_parent, minlength=4)
    assert sorted(fibers) == [1, 1, 1, 4]
    assert q.region_areas.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------- projection


def _two_vertical_strips(grid):
    cps = grid.cells_per_side
    cj = np.arange(grid.n_cells) % cps
    c2r = (cj >= cps // 2).astype(np.int64)
    return Partition(grid=grid, cell_to_region=c2r, n_regions=2, level=0,
                     r0=float(np.hypot(0.5, 1.0)))


def test_project_constant_is_fixed_point():
    g = Grid(9)
    p = make_uniform_partition(g, 2)
    f = NodalField(g, np.full(g.n_nodes, 5.0))
    out = project(f, p, bounds=(1.0, 10.0))
    assert np.allclose(out.coeffs, 5.0)


def test_project_linear_over_strips_exact():
    g = Grid(9)
    p = _two_vertical_strips(g)
    f = NodalField.from_function(g, lambda x, y: x)
    out = project(f, p, bounds=(1e-9, 1.0))
    assert out.coeffs == pytest.approx([0.25, 0.75], abs=1e-15)


def _region_integral_reference(f: NodalField, p: Partition, region: int) -> float:
    """Independent quadrature: loop over the region's cells, average the four
    corner values, multiply by the cell area."""
    g = f.grid
    corners = cell_corners(g)
    total = 0.0
    for cell in p.region_cells(region):
        vals = [f.values[n] for n in corners[cell]]
        total += (sum(vals) / 4.0) * g.h ** 2
    return total


def test_project_zero_mean_residual_against_quadrature_oracle(rng):
    g = Grid(9)
    p = make_uniform_partition(g, 2)
    f = NodalField(g, rng.standard_normal(g.n_nodes))
    pf = project(f, p, bounds=(1e-9, 1.0))
    for j in range(p.n_regions):
        int_f = _region_integral_reference(f, p, j)
        int_pf = pf.coeffs[j] * p.region_areas[j]
        assert int_f - int_pf == pytest.approx(0.0, abs=1e-14)


def test_project_idempotent_and_pwc_fixed_point(rng):
    g = Grid(9)
    p = make_uniform_partition(g, 2)
    f = NodalField(g, rng.standard_normal(g.n_nodes))
    once = project(f, p, bounds=(1e-9, 1.0))
    twice = project(once, p)
    assert np.allclose(twice.coeffs, once.coeffs, rtol=1e-14, atol=0.0)
    field = PwcField(p, np.array([1.0, 2.0, 3.0, 4.0]), (0.5, 5.0))
    assert np.array_equal(project(field, p).coeffs, field.coeffs)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_project_nonexpansive(seed):
    g = Grid(9)
    p = make_uniform_partition(g, 2)
    r = np.random.default_rng(seed)
    f = NodalField(g, r.standard_normal(g.n_nodes))
    gg = NodalField(g, r.standard_normal(g.n_nodes))
    pf, pg = project(f, p, bounds=(1e-9, 1.0)), project(gg, p, bounds=(1e-9, 1.0))
    assert l2_dist(pf, pg) <= l2_dist(f, gg) + 1e-12


def test_project_tower_property(rng):
    g = Grid(9)
    coarse = make_uniform_partition(g, 2)
    fine = refine_partition(coarse, 2)
    f = NodalField(g, rng.standard_normal(g.n_nodes))
    via_fine = project(project(f, fine, bounds=(1e-9, 1.0)), coarse)
    direct = project(f, coarse, bounds=(1e-9, 1.0))
    assert np.allclose(via_fine.coeffs, direct.coeffs, atol=1e-14)


def test_clamp_examples():
    g = Grid(9)
    p = _two_vertical_strips(g)
    f = PwcField(p, np.array([0.5, 1.5]), (1.0, 2.0))
    assert np.array_equal(clamp_to_bounds(f).coeffs, [1.0, 1.5])
    ok = PwcField(p, np.array([1.2, 1.8]), (1.0, 2.0))
    assert np.array_equal(clamp_to_bounds(ok).coeffs, ok.coeffs)
    high = PwcField(p, np.array([3.0, 2.5]), (1.0, 2.0))
    assert np.array_equal(clamp_to_bounds(high).coeffs, [2.0, 2.0])


# ---------------------------------------------------------------- norms


def test_norms_trivial_values():
    g = Grid(9)
    p = make_uniform_partition(g, 1)
    one = PwcField(p, np.array([1.0]), (0.5, 2.0))
    tiny = PwcField(p, np.array([1e-12]), (1e-13, 2.0))
    assert l2_dist(one, one) == 0.0
    assert l2_norm(one) == pytest.approx(1.0)
    assert l2_dist(one, tiny) == pytest.approx(1.0, abs=1e-9)
    assert bregman(one, tiny) == pytest.approx(0.5, abs=1e-9)


def test_norm_triangle_inequality(rng):
    g = Grid(9)
    p = make_uniform_partition(g, 2)
    for _ in range(10):
        a, b, c = (PwcField(p, rng.standard_normal(4) + 2.0, (1e-9, 10.0)) for _ in range(3))
        assert l2_dist(a, c) <= l2_dist(a, b) + l2_dist(b, c) + 1e-12


def test_norm_mismatched_grids_rejected():
    f = PwcField(make_uniform_partition(Grid(9), 1), np.array([1.0]), (0.5, 2.0))
    g = PwcField(make_uniform_partition(Grid(17), 1), np.array([1.0]), (0.5, 2.0))
    with pytest.raises(DiscretizationMismatchError):
        l2_dist(f, g)
    nodal = NodalField(Grid(9), np.zeros(81))
    with pytest.raises(DiscretizationMismatchError):
        l2_dist(f, nodal)


def test_embed_preserves_norm_exactly():
    g = Grid(9)
    coarse = make_uniform_partition(g, 2)
    fine = refine_partition(coarse, 2)
    f = PwcField(coarse, np.array([1.0, 2.0, 3.0, 4.0]), (0.5, 5.0))
    lifted = embed(f, fine)
    assert l2_norm(lifted) == pytest.approx(l2_norm(f), rel=1e-15)
    assert l2_dist(lifted, f) == 0.0


# ---------------------------------------------------------------- file format


def test_pwc_field_file_round_trip(tmp_path):
    g = Grid(9)
    p = make_uniform_partition(g, 2)
    f = PwcField(p, np.array([1.25, 1.5, 1.75, 2.0]), (1.0, 2.0))
    path = tmp_path / "field.txt"
    save_field(path, f)
    text = path.read_text()
    assert text.startswith("pwc 4 0\n")
    back = load_pwc_field(path, p, f.bounds)
    assert np.array_equal(back.coeffs, f.coeffs)


def test_nodal_field_file_round_trip(tmp_path):
    g = Grid(5)
    f = NodalField(g, np.linspace(0.0, 1.0, g.n_nodes))
    path = tmp_path / "nodal.txt"
    save_field(path, f)
    assert path.read_text().startswith("nodal 5\n")
    back = load_nodal_field(path, g)
    assert np.array_equal(back.values, f.values)


def test_field_file_header_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nonsense 1 2\n")
    with pytest.raises(ConfigurationError):
        load_pwc_field(path, make_uniform_partition(Grid(9), 1), (1.0, 2.0))
    good = tmp_path / "good.txt"
    save_field(good, PwcField(make_uniform_partition(Grid(9), 2),
                              np.ones(4), (0.5, 2.0)))
    with pytest.raises(DiscretizationMismatchError):
        load_pwc_field(good, make_uniform_partition(Grid(9), 1), (1.0, 2.0))
