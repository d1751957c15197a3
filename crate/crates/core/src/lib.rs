//! Brick assembly fundamentals: footprint geometry, the connection-type
//! vocabulary, occupancy grids, BFS assembly trees with their action codec,
//! synthetic data generation, silhouette rendering, dataset persistence and
//! evaluation metrics.

pub mod brick;
pub mod dataset;
pub mod error;
pub mod extrude;
pub mod generate;
pub mod image;
pub mod metrics;
pub mod render;
pub mod tree;
pub mod voxel;

pub use brick::{
    child_pose, offset_pose, placement_between, stud_overlap, BrickPose, BrickShape,
    ConnectionType, ConnectionVocab, Direction,
};
pub use error::{CoreError, Result};
pub use tree::{
    actions_from_tree, bfs_tree, graph_from_bricks, reorder_actions, tree_from_actions,
    validate_tree, ActionRecord, DecodeReport, LegoTree,
};
pub use voxel::{legal_placements, VoxelGrid};
