//! Occupancy voxel grids and the bit-packed VOXL file format.
//!
//! A grid stores `size^3` values in `[0, 1]`, flat index
//! `(z * size + y) * size + x`. Binary grids (targets, collision masks)
//! contain only 0 and 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::brick::{offset_pose, BrickPose, ConnectionType, ConnectionVocab, Direction};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    size: usize,
    values: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(size: usize) -> Self {
        VoxelGrid { size, values: vec![0.0; size * size * size] }
    }

    pub fn from_values(size: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != size * size * size {
            return Err(CoreError::SizeMismatch { a: values.len(), b: size * size * size });
        }
        Ok(VoxelGrid { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn index(&self, x: i32, y: i32, z: i32) -> usize {
        debug_assert!(self.contains(x, y, z));
        ((z as usize * self.size) + y as usize) * self.size + x as usize
    }

    pub fn contains(&self, x: i32, y: i32, z: i32) -> bool {
        let s = self.size as i32;
        (0..s).contains(&x) && (0..s).contains(&y) && (0..s).contains(&z)
    }

    pub fn get(&self, x: i32, y: i32, z: i32) -> f32 {
        self.values[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: i32, y: i32, z: i32, v: f32) {
        let i = self.index(x, y, z);
        self.values[i] = v;
    }

    pub fn is_occupied(&self, x: i32, y: i32, z: i32) -> bool {
        self.get(x, y, z) != 0.0
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0 || *v == 1.0)
    }

    /// Set of occupied cell coordinates; handy for set-equality oracles.
    pub fn occupied_cells(&self) -> Vec<(i32, i32, i32)> {
        let s = self.size as i32;
        let mut out = Vec::new();
        for z in 0..s {
            for y in 0..s {
                for x in 0..s {
                    if self.is_occupied(x, y, z) {
                        out.push((x, y, z));
                    }
                }
            }
        }
        out
    }

    /// Mark the footprint of `pose` occupied. Fails without mutating if any
    /// cell is out of bounds or already occupied.
    pub fn occupy(&mut self, pose: BrickPose, shape: crate::brick::BrickShape) -> Result<()> {
        if !pose.in_bounds(shape, self.size) {
            return Err(CoreError::OutOfBounds {
                x: pose.x,
                y: pose.y,
                z: pose.z,
                r: pose.r,
                size: self.size,
            });
        }
        let cells = pose.footprint(shape);
        for &(x, y, z) in &cells {
            if self.is_occupied(x, y, z) {
                return Err(CoreError::Collision { x, y, z });
            }
        }
        for &(x, y, z) in &cells {
            self.set(x, y, z, 1.0);
        }
        Ok(())
    }

    /// True when every footprint cell of `pose` is free and inside the grid.
    pub fn placeable(&self, pose: BrickPose, shape: crate::brick::BrickShape) -> bool {
        pose.in_bounds(shape, self.size)
            && pose.footprint(shape).iter().all(|&(x, y, z)| !self.is_occupied(x, y, z))
    }

    /// Occupy every brick of an assembly, failing on the first collision.
    pub fn occupy_all(
        &mut self,
        poses: &[BrickPose],
        shape: crate::brick::BrickShape,
    ) -> Result<()> {
        for p in poses {
            self.occupy(*p, shape)?;
        }
        Ok(())
    }
}

/// All (type, direction) pairs whose child placement stays in bounds and
/// collision-free. Ordered by direction (up first) then type index, so that
/// decode tie-breaking is reproducible.
pub fn legal_placements(
    grid: &VoxelGrid,
    parent: BrickPose,
    vocab: &ConnectionVocab,
) -> Vec<(ConnectionType, Direction)> {
    let mut out = Vec::new();
    for dir in [Direction::Up, Direction::Down] {
        for t in vocab.types() {
            let child = offset_pose(parent, *t, dir);
            if grid.placeable(child, vocab.shape()) {
                out.push((*t, dir));
            }
        }
    }
    out
}

const VOXL_MAGIC: &[u8; 4] = b"VOXL";
const VOXL_VERSION: u32 = 1;

/// Serialize a binary grid: magic, LE u32 version, LE u32 size, then
/// ceil(size^3 / 8) bytes with bit i of byte b holding cell 8b+i.
/// Cells with value >= 0.5 are stored as 1.
pub fn write_voxl<W: Write>(mut w: W, grid: &VoxelGrid) -> Result<()> {
    w.write_all(VOXL_MAGIC)?;
    w.write_all(&VOXL_VERSION.to_le_bytes())?;
    w.write_all(&(grid.size() as u32).to_le_bytes())?;
    let n = grid.values().len();
    let mut bytes = vec![0u8; n.div_ceil(8)];
    for (i, v) in grid.values().iter().enumerate() {
        if *v >= 0.5 {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_voxl<R: Read>(mut r: R) -> Result<VoxelGrid> {
    let mut magic = [0u8; 4];
    read_exact_at(&mut r, &mut magic, 0)?;
    if &magic != VOXL_MAGIC {
        return Err(CoreError::Format { offset: 0, msg: "bad magic, expected VOXL".into() });
    }
    let mut buf4 = [0u8; 4];
    read_exact_at(&mut r, &mut buf4, 4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VOXL_VERSION {
        return Err(CoreError::Version { found: version, expected: VOXL_VERSION });
    }
    read_exact_at(&mut r, &mut buf4, 8)?;
    let size = u32::from_le_bytes(buf4) as usize;
    let n = size * size * size;
    let mut bytes = vec![0u8; n.div_ceil(8)];
    read_exact_at(&mut r, &mut bytes, 12)?;
    let mut values = vec![0.0f32; n];
    for (i, v) in values.iter_mut().enumerate() {
        if bytes[i / 8] >> (i % 8) & 1 == 1 {
            *v = 1.0;
        }
    }
    VoxelGrid::from_values(size, values)
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CoreError::Format { offset, msg: format!("truncated: needed {} bytes", buf.len()) }
        } else {
            CoreError::Io(e)
        }
    })
}

pub fn write_voxl_file<P: AsRef<Path>>(path: P, grid: &VoxelGrid) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_voxl(std::io::BufWriter::new(f), grid)
}

pub fn read_voxl_file<P: AsRef<Path>>(path: P) -> Result<VoxelGrid> {
    let f = std::fs::File::open(path)?;
    read_voxl(std::io::BufReader::new(f))
}
