//! Orthographic silhouette rendering of binary voxel grids.
//!
//! View 0 projects along x (pixel row = flipped z, column = y), view 1
//! along y (row = flipped z, column = x), view 2 along z (row = flipped y,
//! column = x). The row flips put the top of the object at the top of the
//! image.

use crate::image::{ImageBuf, SilhouetteSet};
use crate::voxel::VoxelGrid;

pub fn render_silhouettes(grid: &VoxelGrid) -> SilhouetteSet {
    let s = grid.size();
    let mut vx = ImageBuf::new(s, s);
    let mut vy = ImageBuf::new(s, s);
    let mut vz = ImageBuf::new(s, s);
    for z in 0..s as i32 {
        for y in 0..s as i32 {
            for x in 0..s as i32 {
                if !grid.is_occupied(x, y, z) {
                    continue;
                }
                let zr = s - 1 - z as usize;
                let yr = s - 1 - y as usize;
                vx.set(zr, y as usize, 1.0);
                vy.set(zr, x as usize, 1.0);
                vz.set(yr, x as usize, 1.0);
            }
        }
    }
    SilhouetteSet { views: [vx, vy, vz] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brick::{BrickPose, BrickShape};

    #[test]
    fn empty_grid_renders_blank() {
        let set = render_silhouettes(&VoxelGrid::new(8));
        for v in &set.views {
            assert_eq!(v.on_pixel_count(), 0);
        }
    }

    #[test]
    fn single_brick_projection_counts() {
        let mut grid = VoxelGrid::new(32);
        grid.occupy(BrickPose::new(16, 16, 16, 0), BrickShape::default()).unwrap();
        let set = render_silhouettes(&grid);
        // 2 cells along x, 4 along y, 1 along z.
        assert_eq!(set.views[0].on_pixel_count(), 4); // x view: y spread
        assert_eq!(set.views[1].on_pixel_count(), 2); // y view: x spread
        assert_eq!(set.views[2].on_pixel_count(), 8); // z view: full footprint
    }

    #[test]
    fn matches_scalar_triple_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = 12usize;
            let mut grid = VoxelGrid::new(s);
            for z in 0..s as i32 {
                for y in 0..s as i32 {
                    for x in 0..s as i32 {
                        if rng.gen_bool(0.1) {
                            grid.set(x, y, z, 1.0);
                        }
                    }
                }
            }
            let set = render_silhouettes(&grid);

            // Independent oracle: per-pixel max over the ray, written as
            // plain scalar loops over each output image.
            for (view, img) in set.views.iter().enumerate() {
                for row in 0..s {
                    for col in 0..s {
                        let mut m = 0.0f32;
                        for t in 0..s as i32 {
                            let (x, y, z) = match view {
                                0 => (t, col as i32, (s - 1 - row) as i32),
                                1 => (col as i32, t, (s - 1 - row) as i32),
                                _ => (col as i32, (s - 1 - row) as i32, t),
                            };
                            m = m.max(grid.get(x, y, z));
                        }
                        assert_eq!(img.get(row, col), m);
                    }
                }
            }
        }
    }
}
