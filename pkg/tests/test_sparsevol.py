"""Voxelization, pruning, block packing, perfect hashing, occupancy bits."""

import numpy as np
import pytest

from vmesh.core import Aabb, CameraPose
from vmesh.mesher import TriMesh
from vmesh.scene import parse_scene
from vmesh.sparsevol import (PshBuildError, SparseVolume, VoxelGrid,
                             build_occupancy, compute_contributions,
                             occupancy_from_bytes, occupied_world_bounds,
                             pack_blocks, positive_density_bounds, prune,
                             psh_build, psh_initial_r, psh_lookup, voxelize)

from _util import scene_text

# slab faces sit at voxel centers of layers 23 and 40 when the [-1, 1]
# domain is split into 64 cells, so those layers are exactly half covered
SLAB = "slab axis z min -0.265625 max 0.265625 density 1.6"
BLOB = "blob center 0 0 0 radius 0.1 density 50"


def lone_cam(width=32, height=32, distance=3.0):
    return CameraPose(position=(0.0, 0.0, distance), look_at=(0.0, 0.0, 0.0),
                      up=(0.0, 1.0, 0.0), fov_deg=45.0,
                      width=width, height=height)


@pytest.fixture(scope="module")
def slab_grid():
    return voxelize(parse_scene(scene_text(volume=SLAB)), 64)


class TestVoxelize:
    def test_interior_layers_hold_full_density(self, slab_grid):
        core = slab_grid.density[:, :, 24:40]
        assert np.allclose(core, 1.6, atol=1e-12)

    def test_boundary_layers_half_covered(self, slab_grid):
        for k in (23, 40):
            assert np.allclose(slab_grid.density[:, :, k], 0.8, atol=1e-12)

    def test_outside_is_exact_zero(self, slab_grid):
        assert np.all(slab_grid.density[:, :, :23] == 0.0)
        assert np.all(slab_grid.density[:, :, 41:] == 0.0)

    def test_constant_materials_at_live_voxels(self, slab_grid):
        live = slab_grid.density > 0.0
        assert np.allclose(slab_grid.diffuse[live], [0.5, 0.4, 0.3])
        assert np.allclose(slab_grid.tint[live], [0.2, 0.2, 0.2])
        assert np.allclose(slab_grid.weights[live], [0.7, 0.2, 0.06, 0.04])
        assert np.allclose(slab_grid.metallic[live], 0.1)

    def test_normals_unit_length(self, slab_grid):
        live = slab_grid.density > 0.0
        norms = np.linalg.norm(slab_grid.normal[live], axis=-1)
        assert np.allclose(norms, 1.0, atol=1e-9)

    def test_blob_support_limits_evaluation(self):
        grid = voxelize(parse_scene(scene_text(volume=BLOB)), 32)
        # kernel is truncated at four radii, so |p| > 0.4 stays zero
        centers = -1.0 + (np.arange(32) + 0.5) * (2.0 / 32)
        px, py, pz = np.meshgrid(centers, centers, centers, indexing="ij")
        dist = np.sqrt(px**2 + py**2 + pz**2)
        far = dist > 0.4 + np.sqrt(3) * (2.0 / 32)
        assert np.all(grid.density[far] == 0.0)
        assert grid.density.max() > 0.0

    def test_grid_must_be_positive(self):
        with pytest.raises(ValueError):
            voxelize(parse_scene(scene_text(volume=BLOB)), 0)

    def test_positive_density_bounds_snaps_to_faces(self, slab_grid):
        box = positive_density_bounds(slab_grid)
        edge = 2.0 / 64
        assert np.allclose(box.min, [-1.0, -1.0, -1.0 + 23 * edge])
        assert np.allclose(box.max, [1.0, 1.0, -1.0 + 41 * edge])

    def test_positive_density_bounds_none_when_empty(self):
        grid = voxelize(parse_scene(scene_text(volume="")), 16)
        assert positive_density_bounds(grid) is None


@pytest.fixture(scope="module")
def blob_grid():
    return voxelize(parse_scene(scene_text(volume=BLOB)), 32)


class TestContributions:

    def test_visible_volume_contributes(self, blob_grid):
        contrib = compute_contributions(blob_grid, [lone_cam()])
        assert contrib.max() > 0.01
        assert contrib.shape == (32, 32, 32)

    def test_occluding_mesh_zeroes_contributions(self, blob_grid):
        quad = TriMesh(
            np.array([[-2.0, -2.0, 0.8], [2.0, -2.0, 0.8], [2.0, 2.0, 0.8],
                      [-2.0, 2.0, 0.8]]),
            np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32))
        contrib = compute_contributions(blob_grid, [lone_cam()], mesh=quad)
        assert np.all(contrib == 0.0)

    def test_requires_a_camera(self, blob_grid):
        with pytest.raises(ValueError):
            compute_contributions(blob_grid, [])

    def test_deterministic(self, blob_grid):
        a = compute_contributions(blob_grid, [lone_cam()])
        b = compute_contributions(blob_grid, [lone_cam()])
        assert np.array_equal(a, b)


def synthetic_grid(n=16):
    """Hand-built grid with recognizable per-voxel values."""
    rng = np.random.default_rng(11)
    density = np.zeros((n, n, n))
    density[2, 3, 4] = 5.0
    density[9, 9, 9] = 2.0
    density[15, 0, 1] = 7.0
    return VoxelGrid(
        bounds=Aabb([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
        density=density,
        normal=rng.normal(size=(n, n, n, 3)),
        diffuse=rng.random((n, n, n, 3)),
        tint=rng.random((n, n, n, 3)),
        weights=rng.random((n, n, n, 4)),
        metallic=rng.random((n, n, n)),
    )


class TestPrune:
    def test_threshold_and_density_both_required(self):
        grid = synthetic_grid()
        contrib = np.zeros((16, 16, 16))
        contrib[2, 3, 4] = 0.5       # live voxel above threshold
        contrib[9, 9, 9] = 0.001     # live voxel below threshold
        contrib[0, 0, 0] = 0.9       # zero-density voxel
        sparse = prune(grid, contrib, 0.01, block_b=8)
        assert sparse.occupied[2, 3, 4]
        assert not sparse.occupied[9, 9, 9]
        assert not sparse.occupied[0, 0, 0]

    def test_zero_threshold_keeps_all_live_voxels(self):
        grid = synthetic_grid()
        sparse = prune(grid, np.zeros((16, 16, 16)), 0.0, block_b=8)
        assert np.array_equal(sparse.occupied, grid.density > 0.0)

    def test_negative_threshold_rejected(self):
        grid = synthetic_grid()
        with pytest.raises(ValueError):
            prune(grid, np.zeros((16, 16, 16)), -0.1, block_b=8)

    def test_grid_must_tile_into_blocks(self):
        grid = synthetic_grid()
        with pytest.raises(ValueError):
            prune(grid, np.zeros((16, 16, 16)), 0.0, block_b=7)

    def test_block_coords_cover_occupied_voxels(self):
        grid = synthetic_grid()
        sparse = prune(grid, np.zeros((16, 16, 16)), 0.0, block_b=8)
        # voxels (2,3,4), (9,9,9), (15,0,1) fall in blocks (0,0,0), (1,1,1), (1,0,0)
        want = {(0, 0, 0), (1, 1, 1), (1, 0, 0)}
        assert {tuple(c) for c in sparse.block_coords} == want


class TestPackBlocks:
    @pytest.fixture()
    def packed(self):
        grid = synthetic_grid()
        sparse = prune(grid, np.zeros((16, 16, 16)), 0.0, block_b=8)
        return grid, sparse, pack_blocks(sparse, grid)

    def test_brick_shapes(self, packed):
        _, sparse, out = packed
        nb = sparse.n_blocks
        assert out.bricks["density"].shape == (nb, 8, 8, 8)
        assert out.bricks["normal"].shape == (nb, 8, 8, 8, 3)
        assert out.bricks["weights"].shape == (nb, 8, 8, 8, 4)

    def test_occupied_values_copied(self, packed):
        grid, _, out = packed
        order = {tuple(c): i for i, c in enumerate(out.block_coords)}
        bi = order[(0, 0, 0)]
        assert out.bricks["density"][bi][2, 3, 4] == grid.density[2, 3, 4]
        assert np.array_equal(out.bricks["diffuse"][bi][2, 3, 4],
                              grid.diffuse[2, 3, 4])

    def test_pruned_voxels_zeroed(self, packed):
        _, _, out = packed
        # each brick holds exactly one live voxel; everything else is zero
        for bi in range(out.n_blocks):
            assert np.count_nonzero(out.bricks["density"][bi]) == 1
        assert np.count_nonzero(out.bricks["metallic"]) == 3

    def test_block_coords_sorted_by_packed_key(self, packed):
        _, _, out = packed
        c = out.block_coords.astype(np.int64)
        keys = (c[:, 0] * 2 + c[:, 1]) * 2 + c[:, 2]
        assert np.all(np.diff(keys) > 0)


def random_coords(rng, n, domain):
    lin = rng.choice(domain**3, size=n, replace=False)
    return np.stack([lin // (domain * domain),
                     (lin // domain) % domain,
                     lin % domain], axis=-1).astype(np.int64)


def assert_injective(table, coords):
    slots = psh_lookup(table, coords)
    lin = (slots[..., 0] * table.m_bar + slots[..., 1]) * table.m_bar \
        + slots[..., 2]
    assert len(np.unique(lin)) == len(coords)
    looked = table.hash_table[slots[..., 0], slots[..., 1], slots[..., 2]]
    assert np.array_equal(looked, np.arange(len(coords)))


class TestPerfectHash:
    def test_injective_and_compact(self):
        rng = np.random.default_rng(101)
        coords = random_coords(rng, 500, 64)
        table = psh_build(coords, 64)
        assert table.m_bar**3 <= 8 * 500
        assert_injective(table, coords)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        coords = random_coords(rng, 64, 32)
        a = psh_build(coords, 32)
        b = psh_build(coords, 32)
        assert a.m_bar == b.m_bar and a.r_bar == b.r_bar
        assert np.array_equal(a.offsets, b.offsets)
        assert np.array_equal(a.hash_table, b.hash_table)

    def test_single_block(self):
        table = psh_build(np.array([[5, 6, 7]]), 16)
        assert table.m_bar == 1 and table.r_bar == 2
        assert table.hash_table.shape == (1, 1, 1)
        assert np.array_equal(psh_lookup(table, np.array([5, 6, 7])), [0, 0, 0])

    def test_residue_collision_resolved_by_wide_offsets(self):
        # both blocks share position mod 2, forcing the fallback search
        # over offset tables wider than the hash table
        coords = np.array([[0, 0, 0], [2, 0, 0]])
        table = psh_build(coords, 3)
        assert table.r_bar > table.m_bar
        assert_injective(table, coords)

    def test_duplicate_coords_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            psh_build(np.array([[1, 2, 3], [1, 2, 3]]), 8)

    def test_out_of_domain_rejected(self):
        with pytest.raises(ValueError):
            psh_build(np.array([[0, 0, 8]]), 8)
        with pytest.raises(ValueError):
            psh_build(np.array([[-1, 0, 0]]), 8)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            psh_build(np.zeros((0, 3), dtype=np.int64), 8)

    def test_initial_offset_occupancy_window(self):
        # starting offset-table budget keeps mean bucket load in [1/6, 1)
        for n in range(9, 4097):
            r = psh_initial_r(n)
            sigma = r**3 / n
            assert 1.0 / 6.0 <= sigma < 1.0, f"n={n} r={r} sigma={sigma}"


class TestOccupancy:
    def make_sparse(self, occupied, block_b=8):
        n = occupied.shape[0]
        coords = np.zeros((0, 3), dtype=np.int32)
        return SparseVolume(grid_n=n, block_b=block_b,
                            bounds=Aabb([-1.0] * 3, [1.0] * 3),
                            occupied=occupied, block_coords=coords)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        occ = rng.random((32, 32, 32)) < 0.2
        data = build_occupancy(self.make_sparse(occ))
        assert len(data) == 32**3 // 8
        assert np.array_equal(occupancy_from_bytes(data, 32), occ)

    def test_bit_layout_x_fastest(self):
        occ = np.zeros((16, 16, 16), dtype=bool)
        occ[0, 0, 0] = True
        occ[9, 0, 0] = True
        data = build_occupancy(self.make_sparse(occ))
        assert data[0] == 0x01
        assert data[1] == 0x02
        assert sum(data[2:]) == 0

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError, match="occupancy blob"):
            occupancy_from_bytes(b"\x00" * 10, 16)

    def test_world_bounds_single_voxel(self):
        occ = np.zeros((16, 16, 16), dtype=bool)
        occ[3, 4, 5] = True
        box = occupied_world_bounds(self.make_sparse(occ))
        edge = 2.0 / 16
        assert np.allclose(box.min, [-1 + 3 * edge, -1 + 4 * edge, -1 + 5 * edge])
        assert np.allclose(box.max, box.min + edge)

    def test_world_bounds_none_when_empty(self):
        occ = np.zeros((16, 16, 16), dtype=bool)
        assert occupied_world_bounds(self.make_sparse(occ)) is None
