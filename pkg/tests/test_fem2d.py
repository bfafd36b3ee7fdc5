import numpy as np
import pytest

from wxtopo import (
    DensityField,
    ElasticModel,
    GridSpec,
    StressField,
    max_stress,
    pnorm_sensitivity,
    pnorm_stress,
    solve_displacement,
    von_mises,
)
from wxtopo.errors import EmptySolidSet, GridMismatch
from wxtopo.fem2d import compliance, pnorm_objective_grad

from conftest import cantilever_bc, patch_bc, symmetric_patch_bc


def solid(grid):
    return DensityField(grid, np.ones(grid.n))


class TestSolveDisplacement:
    @pytest.mark.parametrize("nx,ny,thickness", [(8, 5, 1.0), (6, 9, 2.0)])
    def test_patch_solution(self, nx, ny, thickness):
        # uniform tension: sigma_yy = traction / thickness, linear displacement
        g = GridSpec(nx, ny, 1.0, 1.0)
        e0 = 2.5
        model = ElasticModel(grid=g, e0=e0, thickness=thickness)
        bc = patch_bc(g)
        u = solve_displacement(model, solid(g), bc)
        sigma = 1.0 / thickness
        nnx = g.nx + 1
        for j in range(g.ny + 1):
            for i in range(g.nx + 1):
                node = j * nnx + i
                uy_expect = sigma * (j * g.hy) / e0
                assert u[2 * node + 1] == pytest.approx(uy_expect, abs=1e-8)

    def test_zero_load(self):
        g = GridSpec(6, 6, 1.0, 1.0)
        model = ElasticModel(grid=g)
        bc = patch_bc(g, traction=0.0)
        u = solve_displacement(model, solid(g), bc)
        assert np.all(u == 0.0)

    def test_stiffness_linearity(self):
        g = GridSpec(6, 6, 1.0, 1.0)
        bc = patch_bc(g)
        u1 = solve_displacement(ElasticModel(grid=g, e0=1.0), solid(g), bc)
        u2 = solve_displacement(ElasticModel(grid=g, e0=2.0), solid(g), bc)
        np.testing.assert_allclose(u2, u1 / 2.0, atol=1e-14)

    def test_grid_mismatch(self):
        g = GridSpec(6, 6, 1.0, 1.0)
        model = ElasticModel(grid=g)
        bc = patch_bc(GridSpec(4, 4, 1.0, 1.0))
        with pytest.raises(GridMismatch):
            solve_displacement(model, solid(g), bc)

    def test_compliance_monotone_in_density(self, rng):
        g = GridSpec(8, 8, 1.0, 1.0)
        model = ElasticModel(grid=g)
        bc = cantilever_bc(g)
        base = rng.uniform(0.2, 0.8, g.n)
        c0 = compliance(bc, solve_displacement(model, DensityField(g, base), bc))
        for _ in range(5):
            e = rng.integers(0, g.n)
            bumped = base.copy()
            bumped[e] = min(1.0, bumped[e] + 0.2)
            c1 = compliance(bc, solve_displacement(model, DensityField(g, bumped), bc))
            assert c1 <= c0 + 1e-12


class TestVonMises:
    def test_uniaxial_patch(self):
        g = GridSpec(8, 5, 1.0, 1.0)
        model = ElasticModel(grid=g)
        u = solve_displacement(model, solid(g), patch_bc(g))
        sf = von_mises(model, solid(g), u)
        np.testing.assert_allclose(sf.sigma_vm, 1.0, rtol=1e-8)

    def test_pure_shear_manufactured_field(self):
        # nodal field ux = c*y, uy = c*x gives engineering shear 2c and
        # zero normal strain, so vm = sqrt(3) * G * 2c
        g = GridSpec(4, 4, 1.0, 1.0)
        model = ElasticModel(grid=g, e0=1.0, nu=0.3)
        c = 0.01
        nnx = g.nx + 1
        u = np.zeros(2 * nnx * (g.ny + 1))
        for j in range(g.ny + 1):
            for i in range(g.nx + 1):
                node = j * nnx + i
                u[2 * node] = c * (j * g.hy)
                u[2 * node + 1] = c * (i * g.hx)
        sf = von_mises(model, solid(g), u)
        shear_mod = model.e0 / (2 * (1 + model.nu))
        expected = np.sqrt(3.0) * shear_mod * 2 * c
        np.testing.assert_allclose(sf.sigma_vm, expected, rtol=1e-12)

    def test_relaxation_scales_stress(self):
        g = GridSpec(4, 4, 1.0, 1.0)
        model = ElasticModel(grid=g, q_rel=0.5)
        u = solve_displacement(model, solid(g), patch_bc(g))
        half = DensityField(g, np.full(g.n, 0.25))
        sf = von_mises(model, half, u)
        np.testing.assert_allclose(sf.sigma_vm, 0.5, rtol=1e-8)  # 0.25**0.5


class TestPnorm:
    def test_single_element(self):
        g = GridSpec(2, 2, 1.0, 1.0)
        sf = StressField(g, [5.0, 0.0, 0.0, 0.0])
        for p in (1.0, 8.0, 64.0):
            assert pnorm_stress(sf, p) == pytest.approx(5.0)

    def test_large_p_approaches_max(self):
        g = GridSpec(2, 2, 1.0, 1.0)
        sf = StressField(g, [3.0, 4.0, 0.0, 0.0])
        expected = (3.0**64 + 4.0**64) ** (1.0 / 64.0)
        value = pnorm_stress(sf, 64.0)
        assert value == pytest.approx(expected, rel=1e-12)
        assert abs(value - 4.0) / 4.0 < 0.02

    def test_norm_inequalities(self, rng):
        g = GridSpec(4, 4, 1.0, 1.0)
        for p in (1.0, 2.0, 8.0, 32.0):
            sigma = rng.random(g.n) * 10
            sf = StressField(g, sigma)
            v = pnorm_stress(sf, p)
            assert v >= sigma.max() - 1e-12
            assert v <= g.n ** (1.0 / p) * sigma.max() + 1e-12


class TestMaxStress:
    def test_patch_plate(self):
        g = GridSpec(6, 4, 1.0, 1.0)
        model = ElasticModel(grid=g)
        u = solve_displacement(model, solid(g), patch_bc(g))
        sf = von_mises(model, solid(g), u)
        assert max_stress(sf, solid(g)) == pytest.approx(1.0, rel=1e-8)

    def test_threshold_masks_void(self):
        g = GridSpec(2, 2, 1.0, 1.0)
        sf = StressField(g, [10.0, 1.0, 2.0, 3.0])
        density = DensityField(g, [0.2, 1.0, 1.0, 0.4])
        assert max_stress(sf, density, 0.5) == 2.0

    def test_all_void(self):
        g = GridSpec(2, 2, 1.0, 1.0)
        sf = StressField(g, np.ones(4))
        with pytest.raises(EmptySolidSet):
            max_stress(sf, DensityField(g, np.zeros(4)), 0.5)

    def test_bounded_by_pnorm(self, rng):
        g = GridSpec(5, 5, 1.0, 1.0)
        sf = StressField(g, rng.random(g.n) * 7)
        density = DensityField(g, rng.random(g.n))
        if not np.any(density.values >= 0.5):
            density = DensityField(g, np.clip(density.values + 0.5, 0, 1))
        for p in (1.0, 2.0, 8.0, 64.0):
            assert max_stress(sf, density) <= pnorm_stress(sf, p) + 1e-12


class TestPnormSensitivity:
    def test_matches_central_differences(self, rng):
        g = GridSpec(6, 3, 2.0, 1.0)
        model = ElasticModel(grid=g)
        bc = cantilever_bc(g)
        x = rng.uniform(0.3, 0.9, g.n)
        p = 8.0
        grad = pnorm_sensitivity(model, DensityField(g, x), bc, p)

        def objective(xv):
            return pnorm_objective_grad(model, DensityField(g, xv), bc, p)[0]

        h = 1e-6
        for e in rng.choice(g.n, 10, replace=False):
            xp, xm = x.copy(), x.copy()
            xp[e] += h
            xm[e] -= h
            fd = (objective(xp) - objective(xm)) / (2 * h)
            assert abs(fd - grad[e]) / max(abs(fd), 1e-30) < 1e-3

    def test_mirror_symmetry(self):
        g = GridSpec(6, 4, 1.0, 1.0)
        model = ElasticModel(grid=g)
        bc = symmetric_patch_bc(g)
        grad = pnorm_sensitivity(model, DensityField(g, np.full(g.n, 0.6)), bc, 8.0)
        mat = grad.reshape(g.ny, g.nx)
        np.testing.assert_allclose(mat, mat[:, ::-1], atol=1e-9)

    def test_volume_gradient_is_constant(self):
        # the companion (constraint) functional: volume fraction has the
        # trivially constant gradient v_e / V_total
        g = GridSpec(5, 3, 1.0, 1.0)
        cell_v = g.hx * g.hy
        total = cell_v * g.n

        def vol(values):
            return cell_v * values.sum() / total

        x = np.full(g.n, 0.37)
        h = 1e-7
        for e in (0, 7, g.n - 1):
            xp, xm = x.copy(), x.copy()
            xp[e] += h
            xm[e] -= h
            fd = (vol(xp) - vol(xm)) / (2 * h)
            assert fd == pytest.approx(cell_v / total, rel=1e-6)
