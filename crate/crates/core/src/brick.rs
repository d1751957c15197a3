//! Brick footprints, the relative-placement vocabulary and global pose
//! arithmetic.
//!
//! A brick occupies `width x length x 1` cells. At rotation `r=0` the
//! footprint spans `width` cells along x and `length` along y; `r=1` swaps
//! the two. A connection type is a relative `(dx, dy, rot)` placement of a
//! child brick one layer above or below its parent, constrained so that the
//! two footprints share at least half of a brick's cells. For the standard
//! 2x4 brick that constraint is the classic "at least 4 of 8 studs" rule and
//! yields exactly 16 types.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Brick footprint in cells at rotation 0 (`width` along x, `length` along y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrickShape {
    pub width: u32,
    pub length: u32,
}

impl Default for BrickShape {
    fn default() -> Self {
        BrickShape { width: 2, length: 4 }
    }
}

impl BrickShape {
    pub fn new(width: u32, length: u32) -> Self {
        assert!(width >= 1 && length >= 1, "degenerate brick shape");
        BrickShape { width, length }
    }

    /// Number of cells in one footprint.
    pub fn cells(&self) -> u32 {
        self.width * self.length
    }

    /// Minimum footprint overlap for a legal connection: ceil(cells/2).
    pub fn min_overlap(&self) -> u32 {
        (self.cells() + 1) / 2
    }

    /// (x span, y span) of the footprint at rotation `r`.
    pub fn span(&self, r: u8) -> (i32, i32) {
        if r == 0 {
            (self.width as i32, self.length as i32)
        } else {
            (self.length as i32, self.width as i32)
        }
    }
}

/// Whether a child brick sits on top of (`Up`) or below (`Down`) its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up = 0,
    Down = 1,
}

impl Direction {
    pub fn index(self) -> usize {
        self as usize
    }

    /// Child z offset relative to the parent layer.
    pub fn dz(self) -> i32 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        match i {
            0 => Some(Direction::Up),
            1 => Some(Direction::Down),
            _ => None,
        }
    }
}

/// One relative child placement: stud offsets and relative rotation.
///
/// `index` is the rank of `(rot, dx, dy)` in lexicographic order within the
/// vocabulary it was enumerated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConnectionType {
    pub index: u8,
    pub dx: i32,
    pub dy: i32,
    pub rot: u8,
}

/// Global placement of one brick: footprint min-corner cell plus rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrickPose {
    pub x: i32,
    pub y: i32,
    pub z: i32,
    pub r: u8,
}

impl BrickPose {
    pub fn new(x: i32, y: i32, z: i32, r: u8) -> Self {
        debug_assert!(r <= 1);
        BrickPose { x, y, z, r }
    }

    /// The footprint cells of this pose, row-major over (x, y).
    pub fn footprint(&self, shape: BrickShape) -> Vec<(i32, i32, i32)> {
        let (sx, sy) = shape.span(self.r);
        let mut cells = Vec::with_capacity((sx * sy) as usize);
        for i in 0..sx {
            for j in 0..sy {
                cells.push((self.x + i, self.y + j, self.z));
            }
        }
        cells
    }

    /// True when every footprint cell lies inside `[0, size)^3`.
    pub fn in_bounds(&self, shape: BrickShape, size: usize) -> bool {
        let s = size as i32;
        let (sx, sy) = shape.span(self.r);
        self.x >= 0
            && self.y >= 0
            && self.z >= 0
            && self.x + sx <= s
            && self.y + sy <= s
            && self.z < s
    }

    /// Mirror across the x=y plane: swaps x/y and flips the rotation.
    pub fn transposed(&self) -> BrickPose {
        BrickPose { x: self.y, y: self.x, z: self.z, r: 1 - self.r }
    }

    pub fn translated(&self, dx: i32, dy: i32, dz: i32) -> BrickPose {
        BrickPose { x: self.x + dx, y: self.y + dy, z: self.z + dz, r: self.r }
    }
}

/// The enumerated connection vocabulary for one brick shape.
#[derive(Debug, Clone)]
pub struct ConnectionVocab {
    shape: BrickShape,
    types: Vec<ConnectionType>,
}

impl ConnectionVocab {
    /// Enumerate all (rot, dx, dy) placements whose footprint overlap with a
    /// parent at the origin is at least `shape.min_overlap()`, sorted by
    /// (rot, dx, dy).
    pub fn new(shape: BrickShape) -> Self {
        let max = shape.width.max(shape.length) as i32;
        let mut types = Vec::new();
        for rot in 0..=1u8 {
            for dx in -max..=max {
                for dy in -max..=max {
                    let candidate = ConnectionType { index: 0, dx, dy, rot };
                    if overlap_cells(shape, candidate) >= shape.min_overlap() {
                        types.push(candidate);
                    }
                }
            }
        }
        // The scan order above is already (rot, dx, dy) lexicographic.
        for (i, t) in types.iter_mut().enumerate() {
            t.index = i as u8;
        }
        ConnectionVocab { shape, types }
    }

    /// The standard 2x4 brick vocabulary (16 types).
    pub fn standard() -> Self {
        ConnectionVocab::new(BrickShape::default())
    }

    pub fn shape(&self) -> BrickShape {
        self.shape
    }

    pub fn types(&self) -> &[ConnectionType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<ConnectionType> {
        self.types.get(index).copied()
    }

    /// Look a type up by its raw offsets (used when reading label files).
    pub fn find(&self, dx: i32, dy: i32, rot: u8) -> Result<ConnectionType> {
        self.types
            .iter()
            .find(|t| t.dx == dx && t.dy == dy && t.rot == rot)
            .copied()
            .ok_or(CoreError::UnknownConnection { dx, dy, rot })
    }
}

/// Footprint overlap in cells between a parent at the origin (r=0) and a
/// child placed by `t`.
pub fn stud_overlap(vocab: &ConnectionVocab, t: ConnectionType) -> u32 {
    overlap_cells(vocab.shape(), t)
}

fn overlap_cells(shape: BrickShape, t: ConnectionType) -> u32 {
    let (pw, pl) = shape.span(0);
    let (cw, cl) = shape.span(t.rot);
    let ox = axis_overlap(0, pw, t.dx, cw);
    let oy = axis_overlap(0, pl, t.dy, cl);
    (ox * oy) as u32
}

fn axis_overlap(a0: i32, alen: i32, b0: i32, blen: i32) -> i32 {
    let lo = a0.max(b0);
    let hi = (a0 + alen).min(b0 + blen);
    (hi - lo).max(0)
}

/// Child pose arithmetic without any bounds checking.
///
/// A rotated parent composes with the local offset by swapping dx/dy; that
/// transpose rule is self-inverse and preserves footprint overlap for every
/// type in the vocabulary.
pub fn offset_pose(parent: BrickPose, t: ConnectionType, dir: Direction) -> BrickPose {
    let (dx, dy) = if parent.r == 0 { (t.dx, t.dy) } else { (t.dy, t.dx) };
    BrickPose {
        x: parent.x + dx,
        y: parent.y + dy,
        z: parent.z + dir.dz(),
        r: parent.r ^ t.rot,
    }
}

/// Place a child relative to `parent`, checking that it stays inside the grid.
pub fn child_pose(
    parent: BrickPose,
    t: ConnectionType,
    dir: Direction,
    shape: BrickShape,
    grid_size: usize,
) -> Result<BrickPose> {
    let child = offset_pose(parent, t, dir);
    if child.in_bounds(shape, grid_size) {
        Ok(child)
    } else {
        Err(CoreError::OutOfBounds {
            x: child.x,
            y: child.y,
            z: child.z,
            r: child.r,
            size: grid_size,
        })
    }
}

/// The inverse of `child_pose`: the unique (type, direction) connecting two
/// poses, if any. Distinct (rot, dx, dy) triples always produce distinct
/// child poses, so the answer is unique when it exists.
pub fn placement_between(
    a: BrickPose,
    b: BrickPose,
    vocab: &ConnectionVocab,
) -> Option<(ConnectionType, Direction)> {
    let dir = match b.z - a.z {
        1 => Direction::Up,
        -1 => Direction::Down,
        _ => return None,
    };
    vocab
        .types()
        .iter()
        .find(|t| offset_pose(a, **t, dir) == b)
        .map(|t| (*t, dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: count overlap by enumerating and intersecting
    /// explicit cell sets instead of using interval arithmetic.
    fn overlap_by_cells(shape: BrickShape, t: ConnectionType) -> usize {
        let parent = BrickPose::new(0, 0, 0, 0).footprint(shape);
        let child_pose = BrickPose::new(t.dx, t.dy, 0, t.rot);
        let child = child_pose.footprint(shape);
        parent.iter().filter(|c| child.contains(c)).count()
    }

    #[test]
    fn vocabulary_has_sixteen_types_matching_brute_force() {
        let vocab = ConnectionVocab::standard();
        assert_eq!(vocab.len(), 16);

        // Brute-force enumeration over a generous offset range (the grid is
        // [-3,3]^2 x {0,1}), keeping placements with cell overlap >= 4.
        let shape = BrickShape::default();
        let mut expected = Vec::new();
        for rot in 0..=1u8 {
            for dx in -3..=3 {
                for dy in -3..=3 {
                    let t = ConnectionType { index: 0, dx, dy, rot };
                    if overlap_by_cells(shape, t) >= 4 {
                        expected.push((rot, dx, dy));
                    }
                }
            }
        }
        let actual: Vec<_> = vocab.types().iter().map(|t| (t.rot, t.dx, t.dy)).collect();
        assert_eq!(actual, expected);
    }

    #[test]
    fn vocabulary_index_is_lexicographic_rank() {
        let vocab = ConnectionVocab::standard();
        let mut keys: Vec<_> = vocab.types().iter().map(|t| (t.rot, t.dx, t.dy)).collect();
        let sorted = {
            let mut s = keys.clone();
            s.sort();
            s
        };
        assert_eq!(keys, sorted);
        keys.dedup();
        assert_eq!(keys.len(), 16);
        for (i, t) in vocab.types().iter().enumerate() {
            assert_eq!(t.index as usize, i);
        }
    }

    #[test]
    fn vocabulary_offset_ranges() {
        let vocab = ConnectionVocab::standard();
        for t in vocab.types() {
            if t.rot == 0 {
                assert!((-1..=1).contains(&t.dx) && (-2..=2).contains(&t.dy));
                assert!((2 - t.dx.abs()) * (4 - t.dy.abs()) >= 4);
            } else {
                assert!((-2..=0).contains(&t.dx) && (0..=2).contains(&t.dy));
            }
        }
    }

    #[test]
    fn stud_overlap_examples() {
        let vocab = ConnectionVocab::standard();
        let aligned = vocab.find(0, 0, 0).unwrap();
        assert_eq!(stud_overlap(&vocab, aligned), 8);
        let shifted = vocab.find(0, 2, 0).unwrap();
        assert_eq!(stud_overlap(&vocab, shifted), 4);
        let rotated = vocab.find(-2, 0, 1).unwrap();
        assert_eq!(stud_overlap(&vocab, rotated), 4);
    }

    #[test]
    fn stud_overlap_matches_cell_oracle_for_all_types() {
        let vocab = ConnectionVocab::standard();
        for t in vocab.types() {
            assert_eq!(stud_overlap(&vocab, *t) as usize, overlap_by_cells(vocab.shape(), *t));
        }
    }

    #[test]
    fn footprint_has_eight_distinct_cells() {
        let shape = BrickShape::default();
        for r in 0..=1u8 {
            let cells = BrickPose::new(5, 6, 7, r).footprint(shape);
            assert_eq!(cells.len(), 8);
            let mut dedup = cells.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), 8);
        }
    }

    #[test]
    fn child_pose_examples() {
        let vocab = ConnectionVocab::standard();
        let shape = vocab.shape();
        let t = vocab.find(0, 2, 0).unwrap();

        let parent = BrickPose::new(16, 16, 16, 0);
        let child = child_pose(parent, t, Direction::Up, shape, 32).unwrap();
        assert_eq!(child, BrickPose::new(16, 18, 17, 0));

        // Rotated parent: offsets transpose.
        let parent = BrickPose::new(16, 16, 16, 1);
        let child = child_pose(parent, t, Direction::Down, shape, 32).unwrap();
        assert_eq!(child, BrickPose::new(18, 16, 15, 1));

        // Both x and z leave the grid.
        let parent = BrickPose::new(0, 0, 0, 0);
        let t = vocab.find(-1, 0, 0).unwrap();
        assert!(matches!(
            child_pose(parent, t, Direction::Down, shape, 32),
            Err(CoreError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn child_overlap_holds_for_both_parent_rotations() {
        // Transpose-convention closure: every type keeps >= 4 cells of
        // footprint overlap no matter how the parent is rotated.
        let vocab = ConnectionVocab::standard();
        let shape = vocab.shape();
        for parent_r in 0..=1u8 {
            let parent = BrickPose::new(10, 10, 10, parent_r);
            let pcells = parent.footprint(shape);
            for t in vocab.types() {
                for dir in [Direction::Up, Direction::Down] {
                    let child = offset_pose(parent, *t, dir);
                    let ccells: Vec<_> = child
                        .footprint(shape)
                        .into_iter()
                        .map(|(x, y, _)| (x, y, parent.z))
                        .collect();
                    let overlap = pcells.iter().filter(|c| ccells.contains(c)).count();
                    assert!(overlap >= 4, "type {:?} parent_r {}", t, parent_r);
                }
            }
        }
    }

    #[test]
    fn placement_between_round_trips_all_pairs() {
        let vocab = ConnectionVocab::standard();
        for parent_r in 0..=1u8 {
            let parent = BrickPose::new(12, 13, 14, parent_r);
            for t in vocab.types() {
                for dir in [Direction::Up, Direction::Down] {
                    let child = offset_pose(parent, *t, dir);
                    let (t2, d2) = placement_between(parent, child, &vocab).unwrap();
                    assert_eq!((t2, d2), (*t, dir));
                }
            }
        }
    }

    #[test]
    fn placement_between_rejects_bad_layers() {
        let vocab = ConnectionVocab::standard();
        let a = BrickPose::new(16, 16, 16, 0);
        assert!(placement_between(a, a, &vocab).is_none());
        let far = BrickPose::new(16, 16, 19, 0);
        assert!(placement_between(a, far, &vocab).is_none());
    }

    #[test]
    fn small_brick_vocabulary_uses_half_cell_rule() {
        // Brick(1,2): 2 cells, overlap >= 1.
        let vocab = ConnectionVocab::new(BrickShape::new(1, 2));
        assert_eq!(vocab.shape().min_overlap(), 1);
        assert!(!vocab.is_empty());
        for t in vocab.types() {
            assert!(overlap_by_cells(vocab.shape(), *t) >= 1);
        }
        // rot=0: dx=0, dy in {-1,0,1}; rot=1: dx in {-1,0}, dy in {0,1}.
        assert_eq!(vocab.len(), 7);
    }
}
