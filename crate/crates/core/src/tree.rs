//! BFS assembly trees and the action-sequence codec.
//!
//! An assembly is decoded breadth-first from per-brick action records: brick
//! n spawns one child per connection type listed in its up set, then its
//! down set, ascending by type index. Children whose placement leaves the
//! grid or collides with the occupancy built so far are dropped silently;
//! the decode report counts them. The inverse direction rebuilds the
//! connectivity graph from poses and re-derives a tree by BFS, which is also
//! how re-rooting (action reordering) works.

use std::collections::{BTreeSet, VecDeque};

use crate::brick::{
    offset_pose, BrickPose, ConnectionType, ConnectionVocab, Direction,
};
use crate::error::{CoreError, Result};
use crate::voxel::VoxelGrid;

/// A BFS-ordered assembly tree. Index 0 is the root; `parent[i] < i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegoTree {
    pub bricks: Vec<BrickPose>,
    pub parent: Vec<Option<usize>>,
    pub edge: Vec<Option<(ConnectionType, Direction)>>,
    pub depth: Vec<usize>,
}

impl LegoTree {
    pub fn len(&self) -> usize {
        self.bricks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bricks.is_empty()
    }

    pub fn root(&self) -> BrickPose {
        self.bricks[0]
    }

    /// Binary occupancy of the whole assembly.
    pub fn occupancy(&self, vocab: &ConnectionVocab, grid_size: usize) -> Result<VoxelGrid> {
        let mut grid = VoxelGrid::new(grid_size);
        grid.occupy_all(&self.bricks, vocab.shape())?;
        Ok(grid)
    }
}

/// Per-brick two-sided action: the connection-type indices of children
/// spawned above (`up`) and below (`down`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActionRecord {
    pub up: BTreeSet<u8>,
    pub down: BTreeSet<u8>,
}

impl ActionRecord {
    pub fn is_stop(&self) -> bool {
        self.up.is_empty() && self.down.is_empty()
    }

    pub fn side(&self, dir: Direction) -> &BTreeSet<u8> {
        match dir {
            Direction::Up => &self.up,
            Direction::Down => &self.down,
        }
    }
}

/// Diagnostics from a decode or BFS traversal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeReport {
    /// Bricks placed (including the root).
    pub placed: usize,
    /// Children dropped because of collisions, bounds, or the brick cap.
    pub dropped: usize,
    /// Action records consumed (one per processed brick).
    pub actions_consumed: usize,
    /// Prediction-work counter: one per processed node plus one per child.
    pub comparisons: usize,
    /// Graph edges excluded from the tree because they close cycles.
    pub non_tree_edges: Vec<(usize, usize)>,
}

/// Decode an action sequence into a tree, rooted at the grid-center cell
/// with rotation 0.
pub fn tree_from_actions(
    actions: &[ActionRecord],
    vocab: &ConnectionVocab,
    grid_size: usize,
    max_bricks: usize,
) -> Result<(LegoTree, DecodeReport)> {
    let c = (grid_size / 2) as i32;
    let root = BrickPose::new(c, c, c, 0);
    decode_actions_with_root(actions, root, vocab, grid_size, max_bricks)
}

/// Decode with an explicit root placement. The public entry point pins the
/// root at the grid center; tests and re-rooting use this directly.
pub fn decode_actions_with_root(
    actions: &[ActionRecord],
    root: BrickPose,
    vocab: &ConnectionVocab,
    grid_size: usize,
    max_bricks: usize,
) -> Result<(LegoTree, DecodeReport)> {
    if actions.is_empty() {
        return Err(CoreError::EmptyInput("action sequence"));
    }
    let shape = vocab.shape();
    let mut grid = VoxelGrid::new(grid_size);
    grid.occupy(root, shape)?;

    let mut tree = LegoTree {
        bricks: vec![root],
        parent: vec![None],
        edge: vec![None],
        depth: vec![0],
    };
    let mut report = DecodeReport { placed: 1, ..Default::default() };

    let mut next = 0usize;
    while next < tree.bricks.len() {
        let record = actions.get(next).cloned().unwrap_or_default();
        report.actions_consumed += 1;
        report.comparisons += 1;
        let parent_pose = tree.bricks[next];
        let parent_depth = tree.depth[next];
        for dir in [Direction::Up, Direction::Down] {
            for index in record.side(dir) {
                let Some(t) = vocab.get(*index as usize) else {
                    report.dropped += 1;
                    continue;
                };
                if tree.bricks.len() >= max_bricks {
                    report.dropped += 1;
                    continue;
                }
                let child = offset_pose(parent_pose, t, dir);
                if !grid.placeable(child, shape) {
                    report.dropped += 1;
                    continue;
                }
                grid.occupy(child, shape).expect("placeable was checked");
                tree.bricks.push(child);
                tree.parent.push(Some(next));
                tree.edge.push(Some((t, dir)));
                tree.depth.push(parent_depth + 1);
                report.placed += 1;
                report.comparisons += 1;
            }
        }
        next += 1;
    }
    Ok((tree, report))
}

/// Extract per-brick action labels; the exact inverse of decoding for trees
/// whose root sits wherever the decoder will put it.
pub fn actions_from_tree(tree: &LegoTree) -> Vec<ActionRecord> {
    let mut actions = vec![ActionRecord::default(); tree.len()];
    for i in 1..tree.len() {
        let p = tree.parent[i].expect("non-root has a parent");
        let (t, dir) = tree.edge[i].expect("non-root has an edge");
        match dir {
            Direction::Up => actions[p].up.insert(t.index),
            Direction::Down => actions[p].down.insert(t.index),
        };
    }
    actions
}

/// Undirected connectivity: i ~ j iff some connection type places one on
/// the other.
pub fn graph_from_bricks(poses: &[BrickPose], vocab: &ConnectionVocab) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); poses.len()];
    for i in 0..poses.len() {
        for j in (i + 1)..poses.len() {
            if crate::brick::placement_between(poses[i], poses[j], vocab).is_some() {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Breadth-first spanning tree of a connectivity graph. Children of each
/// node are visited up-side first, then down, ascending type index within a
/// side; edges whose endpoints are both already visited are recorded as
/// non-tree edges.
pub fn bfs_tree(
    adj: &[Vec<usize>],
    poses: &[BrickPose],
    root: usize,
    vocab: &ConnectionVocab,
) -> Result<(LegoTree, DecodeReport)> {
    assert!(root < poses.len(), "root index out of range");
    let n = poses.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut report = DecodeReport { placed: n, ..Default::default() };

    let mut tree = LegoTree {
        bricks: Vec::with_capacity(n),
        parent: Vec::with_capacity(n),
        edge: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
    };

    // new index of each original pose, for non-tree edge reporting
    let mut new_index = vec![usize::MAX; n];

    let mut queue = VecDeque::new();
    visited[root] = true;
    queue.push_back((root, None::<(usize, ConnectionType, Direction)>, 0usize));
    while let Some((node, via, depth)) = queue.pop_front() {
        let idx = tree.bricks.len();
        new_index[node] = idx;
        order.push(node);
        tree.bricks.push(poses[node]);
        tree.depth.push(depth);
        match via {
            None => {
                tree.parent.push(None);
                tree.edge.push(None);
            }
            Some((p, t, d)) => {
                tree.parent.push(Some(p));
                tree.edge.push(Some((t, d)));
                report.comparisons += 1;
            }
        }
        report.comparisons += 1;

        // Order the unvisited neighbors like the decoder would spawn them.
        let mut children: Vec<(Direction, u8, usize)> = Vec::new();
        for &nb in &adj[node] {
            if visited[nb] {
                // A visited neighbor that is not this node's parent closes a
                // cycle. Neighbors still waiting in the queue have no index
                // yet; that edge is recorded when they are processed.
                if new_index[nb] != usize::MAX && tree.parent[idx] != Some(new_index[nb]) {
                    let a = new_index[nb].min(idx);
                    let b = new_index[nb].max(idx);
                    if !report.non_tree_edges.contains(&(a, b)) {
                        report.non_tree_edges.push((a, b));
                    }
                }
                continue;
            }
            let (t, d) = crate::brick::placement_between(poses[node], poses[nb], vocab)
                .expect("adjacent poses must admit a placement");
            children.push((d, t.index, nb));
        }
        children.sort();
        for (d, tindex, nb) in children {
            visited[nb] = true;
            let t = vocab.get(tindex as usize).expect("index from vocab");
            queue.push_back((nb, Some((idx, t, d)), depth + 1));
        }
    }

    if let Some(i) = visited.iter().position(|v| !v) {
        return Err(CoreError::Disconnected { index: i });
    }
    Ok((tree, report))
}

/// Re-root a tree at `new_root`, recenter that brick at the grid-center
/// cell, and normalize its rotation to 0 by transposing every pose when
/// needed. Returns the new tree together with its action labels.
pub fn reorder_actions(
    tree: &LegoTree,
    new_root: usize,
    vocab: &ConnectionVocab,
    grid_size: usize,
) -> Result<(LegoTree, Vec<ActionRecord>)> {
    assert!(new_root < tree.len(), "new_root out of range");
    let mut poses = tree.bricks.clone();
    if poses[new_root].r == 1 {
        for p in &mut poses {
            *p = p.transposed();
        }
    }
    let c = (grid_size / 2) as i32;
    let anchor = poses[new_root];
    let (dx, dy, dz) = (c - anchor.x, c - anchor.y, c - anchor.z);
    for p in &mut poses {
        *p = p.translated(dx, dy, dz);
        if !p.in_bounds(vocab.shape(), grid_size) {
            return Err(CoreError::OutOfBounds {
                x: p.x,
                y: p.y,
                z: p.z,
                r: p.r,
                size: grid_size,
            });
        }
    }
    let adj = graph_from_bricks(&poses, vocab);
    let (new_tree, _) = bfs_tree(&adj, &poses, new_root, vocab)?;
    let actions = actions_from_tree(&new_tree);
    Ok((new_tree, actions))
}

/// Check every structural invariant of a tree. Used by tests and by decode
/// audits; returns the first violation found.
pub fn validate_tree(tree: &LegoTree, vocab: &ConnectionVocab, grid_size: usize) -> Result<()> {
    let n = tree.len();
    if n == 0 {
        return Err(CoreError::InvalidTree("empty tree".into()));
    }
    if tree.parent.len() != n || tree.edge.len() != n || tree.depth.len() != n {
        return Err(CoreError::InvalidTree("field lengths differ".into()));
    }
    if tree.parent[0].is_some() || tree.edge[0].is_some() || tree.depth[0] != 0 {
        return Err(CoreError::InvalidTree("index 0 is not a root".into()));
    }

    let mut grid = VoxelGrid::new(grid_size);
    for (i, pose) in tree.bricks.iter().enumerate() {
        grid.occupy(*pose, vocab.shape()).map_err(|e| {
            CoreError::InvalidTree(format!("brick {i} illegal: {e}"))
        })?;
    }

    for i in 1..n {
        let p = tree.parent[i].ok_or_else(|| {
            CoreError::InvalidTree(format!("brick {i} has no parent"))
        })?;
        if p >= i {
            return Err(CoreError::InvalidTree(format!(
                "parent[{i}] = {p} breaks BFS order"
            )));
        }
        let (t, d) = tree.edge[i].ok_or_else(|| {
            CoreError::InvalidTree(format!("brick {i} has no edge"))
        })?;
        if offset_pose(tree.bricks[p], t, d) != tree.bricks[i] {
            return Err(CoreError::InvalidTree(format!(
                "edge of brick {i} does not reproduce its pose"
            )));
        }
        if tree.depth[i] != tree.depth[p] + 1 {
            return Err(CoreError::InvalidTree(format!("depth[{i}] inconsistent")));
        }
    }

    // Children of each node: contiguous in dir-then-type order is implied by
    // BFS; verify the ordering among each node's children.
    for p in 0..n {
        let children: Vec<usize> = (1..n).filter(|i| tree.parent[*i] == Some(p)).collect();
        let keys: Vec<(usize, u8)> = children
            .iter()
            .map(|i| {
                let (t, d) = tree.edge[*i].unwrap();
                (d.index(), t.index)
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        if keys != sorted {
            return Err(CoreError::InvalidTree(format!(
                "children of {p} out of (dir, type) order"
            )));
        }
        let mut dedup = sorted.clone();
        dedup.dedup();
        if dedup.len() != sorted.len() {
            return Err(CoreError::InvalidTree(format!(
                "children of {p} repeat a (dir, type) slot"
            )));
        }
    }

    // BFS order check: depths are non-decreasing along indices.
    for i in 1..n {
        if tree.depth[i] + 1 < tree.depth[i - 1] + 1 && tree.depth[i] < tree.depth[i - 1] {
            return Err(CoreError::InvalidTree("depths not BFS-ordered".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brick::BrickShape;

    fn vocab() -> ConnectionVocab {
        ConnectionVocab::standard()
    }

    fn rec(up: &[u8], down: &[u8]) -> ActionRecord {
        ActionRecord {
            up: up.iter().copied().collect(),
            down: down.iter().copied().collect(),
        }
    }

    /// Six-brick fixture: a root with two up children, the first of which
    /// carries two up children and one down child; the second's child closes
    /// a cycle in the graph via an extra contact with the first child.
    fn six_brick_poses(v: &ConnectionVocab) -> Vec<BrickPose> {
        let s = v.shape();
        let b0 = BrickPose::new(16, 16, 16, 0);
        let t_m2 = v.find(0, -2, 0).unwrap();
        let t_p2 = v.find(0, 2, 0).unwrap();
        let b1 = crate::brick::child_pose(b0, t_m2, Direction::Up, s, 32).unwrap();
        let b2 = crate::brick::child_pose(b0, t_p2, Direction::Up, s, 32).unwrap();
        let b3 = crate::brick::child_pose(b1, t_m2, Direction::Up, s, 32).unwrap();
        let b4 = crate::brick::child_pose(b1, t_m2, Direction::Down, s, 32).unwrap();
        let b5 = crate::brick::child_pose(b2, t_m2, Direction::Up, s, 32).unwrap();
        vec![b0, b1, b2, b3, b4, b5]
    }

    #[test]
    fn single_action_gives_single_brick() {
        let v = vocab();
        let (tree, report) = tree_from_actions(&[rec(&[], &[])], &v, 32, 64).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root(), BrickPose::new(16, 16, 16, 0));
        assert_eq!(report.placed, 1);
        assert_eq!(report.dropped, 0);
        validate_tree(&tree, &v, 32).unwrap();
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let v = vocab();
        assert!(matches!(
            tree_from_actions(&[], &v, 32, 64),
            Err(CoreError::EmptyInput(_))
        ));
    }

    #[test]
    fn two_up_children_in_type_order() {
        let v = vocab();
        let t_a = v.find(0, -2, 0).unwrap(); // index 1
        let t_b = v.find(0, 2, 0).unwrap(); // index 5
        let (tree, _) =
            tree_from_actions(&[rec(&[t_b.index, t_a.index], &[])], &v, 32, 64).unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.depth, vec![0, 1, 1]);
        // Smaller type index becomes brick 1.
        assert_eq!(tree.edge[1].unwrap().0.index, t_a.index);
        assert_eq!(tree.edge[2].unwrap().0.index, t_b.index);
        validate_tree(&tree, &v, 32).unwrap();
    }

    #[test]
    fn colliding_child_is_dropped() {
        let v = vocab();
        let aligned = v.find(0, 0, 0).unwrap();
        // Brick 1 sits on the root; its down child would land exactly on the
        // root's cells.
        let actions = vec![rec(&[aligned.index], &[]), rec(&[], &[aligned.index])];
        let (tree, report) = tree_from_actions(&actions, &v, 32, 64).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(report.dropped, 1);
        validate_tree(&tree, &v, 32).unwrap();
    }

    #[test]
    fn brick_cap_drops_overflow() {
        let v = vocab();
        let t_a = v.find(0, -2, 0).unwrap();
        let t_b = v.find(0, 2, 0).unwrap();
        let actions = vec![rec(&[t_a.index, t_b.index], &[])];
        let (tree, report) = tree_from_actions(&actions, &v, 32, 2).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(report.dropped, 1);
    }

    #[test]
    fn action_round_trip_on_fixture() {
        let v = vocab();
        let poses = six_brick_poses(&v);
        let adj = graph_from_bricks(&poses, &v);
        let (tree, _) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        let actions = actions_from_tree(&tree);
        let (back, report) =
            decode_actions_with_root(&actions, tree.root(), &v, 32, 64).unwrap();
        assert_eq!(back, tree);
        assert_eq!(report.dropped, 0);
    }

    #[test]
    fn single_brick_labels_are_empty() {
        let v = vocab();
        let (tree, _) = tree_from_actions(&[rec(&[], &[])], &v, 32, 64).unwrap();
        let actions = actions_from_tree(&tree);
        assert_eq!(actions, vec![ActionRecord::default()]);
    }

    #[test]
    fn stacked_bricks_form_one_edge() {
        let v = vocab();
        let a = BrickPose::new(16, 16, 16, 0);
        let b = BrickPose::new(16, 16, 17, 0);
        let adj = graph_from_bricks(&[a, b], &v);
        assert_eq!(adj, vec![vec![1], vec![0]]);

        let far = BrickPose::new(16, 16, 18, 0);
        let adj = graph_from_bricks(&[a, far], &v);
        assert_eq!(adj, vec![Vec::<usize>::new(), Vec::new()]);
    }

    #[test]
    fn path_graph_gives_chain() {
        let v = vocab();
        let poses = vec![
            BrickPose::new(16, 16, 15, 0),
            BrickPose::new(16, 16, 16, 0),
            BrickPose::new(16, 16, 17, 0),
        ];
        let adj = graph_from_bricks(&poses, &v);
        let (tree, _) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        assert_eq!(tree.depth, vec![0, 1, 2]);
        assert_eq!(tree.parent, vec![None, Some(0), Some(1)]);
    }

    #[test]
    fn six_brick_graph_has_one_non_tree_edge() {
        let v = vocab();
        let poses = six_brick_poses(&v);
        let adj = graph_from_bricks(&poses, &v);
        // The cycle: b0-b1, b0-b2, b2-b5 plus the extra contact b1-b5.
        assert!(adj[1].contains(&5) && adj[5].contains(&1));
        let (tree, report) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        assert_eq!(tree.len(), 6);
        validate_tree(&tree, &v, 32).unwrap();
        // b5 is reached through b1 (processed before b2); its other graph
        // edge (to b2) must be recorded as a non-tree edge.
        assert_eq!(report.non_tree_edges.len(), 1);
        // BFS order: b0, b1, b2, then b1's children b3, b5(up), b4(down).
        assert_eq!(tree.bricks[4], poses[5]);
        assert_eq!(tree.depth, vec![0, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn bfs_comparisons_are_linear() {
        let v = vocab();
        let poses = six_brick_poses(&v);
        let adj = graph_from_bricks(&poses, &v);
        let (_, report) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        assert_eq!(report.comparisons, 2 * poses.len() - 1);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let v = vocab();
        let poses = vec![BrickPose::new(4, 4, 4, 0), BrickPose::new(20, 20, 20, 0)];
        let adj = graph_from_bricks(&poses, &v);
        assert!(matches!(
            bfs_tree(&adj, &poses, 0, &v),
            Err(CoreError::Disconnected { index: 1 })
        ));
    }

    #[test]
    fn reorder_at_root_recenters_only() {
        let v = vocab();
        let poses = six_brick_poses(&v);
        let adj = graph_from_bricks(&poses, &v);
        let (tree, _) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        let (re, _) = reorder_actions(&tree, 0, &v, 32).unwrap();
        assert_eq!(re, tree); // the fixture root is already centered at r=0
    }

    #[test]
    fn reorder_preserves_occupancy_up_to_rigid_motion() {
        let v = vocab();
        let poses = six_brick_poses(&v);
        let adj = graph_from_bricks(&poses, &v);
        let (tree, _) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        for new_root in 0..tree.len() {
            let (re, actions) = reorder_actions(&tree, new_root, &v, 32).unwrap();
            validate_tree(&re, &v, 32).unwrap();
            assert_eq!(re.len(), tree.len());
            assert_eq!(re.root(), BrickPose::new(16, 16, 16, 0));
            assert_eq!(actions, actions_from_tree(&re));

            // Map the original occupancy through the same transpose and
            // translation; the cell sets must agree exactly.
            let old_anchor = tree.bricks[new_root];
            let mut expect: Vec<(i32, i32, i32)> = Vec::new();
            for p in &tree.bricks {
                let q = if old_anchor.r == 1 { p.transposed() } else { *p };
                let a = if old_anchor.r == 1 { old_anchor.transposed() } else { old_anchor };
                let q = q.translated(16 - a.x, 16 - a.y, 16 - a.z);
                expect.extend(q.footprint(v.shape()));
            }
            expect.sort();
            let mut got: Vec<(i32, i32, i32)> = re
                .bricks
                .iter()
                .flat_map(|p| p.footprint(v.shape()))
                .collect();
            got.sort();
            assert_eq!(got, expect, "root {new_root}");
        }
    }

    #[test]
    fn reorder_out_of_bounds_is_reported() {
        let v = vocab();
        // A long strand near the grid edge: recentering the far end pushes
        // the rest outside.
        let s = v.shape();
        let t = v.find(0, 2, 0).unwrap();
        let mut poses = vec![BrickPose::new(8, 1, 8, 0)];
        for i in 0..5 {
            let next =
                crate::brick::child_pose(poses[i], t, Direction::Up, s, 16).unwrap();
            poses.push(next);
        }
        let adj = graph_from_bricks(&poses, &v);
        let (tree, _) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        let last = tree.len() - 1;
        assert!(matches!(
            reorder_actions(&tree, last, &v, 16),
            Err(CoreError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn validator_rejects_tampering() {
        let v = vocab();
        let poses = six_brick_poses(&v);
        let adj = graph_from_bricks(&poses, &v);
        let (tree, _) = bfs_tree(&adj, &poses, 0, &v).unwrap();
        validate_tree(&tree, &v, 32).unwrap();

        let mut bad = tree.clone();
        bad.bricks[3] = BrickPose::new(1, 1, 1, 0);
        assert!(validate_tree(&bad, &v, 32).is_err());

        let mut bad = tree.clone();
        bad.depth[2] = 5;
        assert!(validate_tree(&bad, &v, 32).is_err());

        let mut bad = tree;
        bad.parent[1] = Some(3);
        assert!(validate_tree(&bad, &v, 32).is_err());
    }

    #[test]
    fn small_shape_trees_validate() {
        let v = ConnectionVocab::new(BrickShape::new(1, 2));
        let aligned = v.find(0, 0, 0).unwrap();
        let (tree, _) =
            tree_from_actions(&[rec(&[aligned.index], &[])], &v, 16, 8).unwrap();
        assert_eq!(tree.len(), 2);
        validate_tree(&tree, &v, 16).unwrap();
    }
}
