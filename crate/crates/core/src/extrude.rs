//! Voxelization of 2D images by extrusion, plus a synthetic stroke-glyph
//! generator for silhouette-only datasets.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::image::ImageBuf;
use crate::voxel::VoxelGrid;

/// Binarize `img` at `threshold` and extrude it through `depth` y-layers,
/// centered in the grid. Image columns map to x; rows map to z top-down, so
/// the top image row lands at the highest z layer.
pub fn extrude_image(
    img: &ImageBuf,
    threshold: f32,
    depth: usize,
    grid_size: usize,
) -> Result<VoxelGrid> {
    if img.width > grid_size || img.height > grid_size || depth > grid_size || depth == 0 {
        return Err(CoreError::TooLarge {
            w: img.width,
            h: img.height,
            depth,
            size: grid_size,
        });
    }
    let x0 = (grid_size - img.width) / 2;
    let z0 = (grid_size - img.height) / 2;
    let y0 = (grid_size - depth) / 2;
    let mut grid = VoxelGrid::new(grid_size);
    for row in 0..img.height {
        for col in 0..img.width {
            if img.get(row, col) >= threshold {
                let x = (x0 + col) as i32;
                let z = (z0 + img.height - 1 - row) as i32;
                for dy in 0..depth {
                    grid.set(x, (y0 + dy) as i32, z, 1.0);
                }
            }
        }
    }
    Ok(grid)
}

/// Draw a random thick-stroke glyph: a momentum random walk stamped with a
/// small square brush. Produces connected digit-like blobs for synthetic
/// silhouette datasets.
pub fn stroke_glyph<R: Rng>(width: usize, height: usize, rng: &mut R) -> ImageBuf {
    let mut img = ImageBuf::new(width, height);
    let strokes = rng.gen_range(1..=2);
    for _ in 0..strokes {
        let mut x = rng.gen_range(width as i32 / 4..3 * width as i32 / 4) as f32;
        let mut y = rng.gen_range(height as i32 / 4..3 * height as i32 / 4) as f32;
        let mut angle: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
        let steps = rng.gen_range(20..40);
        for _ in 0..steps {
            stamp(&mut img, x as i32, y as i32, 1);
            angle += rng.gen_range(-0.5..0.5);
            x = (x + angle.cos()).clamp(2.0, width as f32 - 3.0);
            y = (y + angle.sin()).clamp(2.0, height as f32 - 3.0);
        }
    }
    img
}

fn stamp(img: &mut ImageBuf, cx: i32, cy: i32, radius: i32) {
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let x = cx + dx;
            let y = cy + dy;
            if x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height {
                img.set(y as usize, x as usize, 1.0);
            }
        }
    }
}
