//! Dataset persistence: one JSON object record per manifest line, PGM
//! silhouettes and optional VOXL voxels stored beside it.
//!
//! Records carry edges as raw `[dx, dy, rot, dir]` so label files stay
//! portable across type-index conventions.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::brick::{BrickPose, ConnectionVocab, Direction};
use crate::error::{CoreError, Result};
use crate::image::{read_pgm_file, write_pgm_file, SilhouetteSet};
use crate::tree::{validate_tree, LegoTree};
use crate::voxel::{read_voxl_file, write_voxl_file, VoxelGrid};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub class: String,
    pub grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<Vec<[i32; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<Vec<Option<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<Vec<Option<[i32; 4]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silhouettes: Option<[String; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxels: Option<String>,
    /// Extrusion depth for ingested images, recorded for reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl ObjectRecord {
    pub fn from_tree(id: &str, class: &str, grid: usize, tree: &LegoTree) -> Self {
        ObjectRecord {
            id: id.to_string(),
            class: class.to_string(),
            grid,
            poses: Some(tree.bricks.iter().map(|p| [p.x, p.y, p.z, p.r as i32]).collect()),
            parent: Some(tree.parent.clone()),
            edge: Some(
                tree.edge
                    .iter()
                    .map(|e| e.map(|(t, d)| [t.dx, t.dy, t.rot as i32, d.index() as i32]))
                    .collect(),
            ),
            silhouettes: None,
            voxels: None,
            depth: None,
        }
    }

    pub fn has_tree(&self) -> bool {
        self.poses.is_some()
    }

    /// Rebuild and validate the assembly tree stored in this record.
    pub fn to_tree(&self, vocab: &ConnectionVocab) -> Result<LegoTree> {
        let poses = self.poses.as_ref().ok_or(CoreError::EmptyInput("record poses"))?;
        let parent = self.parent.as_ref().ok_or(CoreError::EmptyInput("record parents"))?;
        let edge = self.edge.as_ref().ok_or(CoreError::EmptyInput("record edges"))?;
        if poses.len() != parent.len() || poses.len() != edge.len() {
            return Err(CoreError::LengthMismatch { a: poses.len(), b: parent.len() });
        }
        let mut tree = LegoTree {
            bricks: poses.iter().map(|p| BrickPose::new(p[0], p[1], p[2], p[3] as u8)).collect(),
            parent: parent.clone(),
            edge: Vec::with_capacity(edge.len()),
            depth: vec![0; poses.len()],
        };
        for e in edge {
            match e {
                None => tree.edge.push(None),
                Some([dx, dy, rot, dir]) => {
                    let t = vocab.find(*dx, *dy, *rot as u8)?;
                    let d = Direction::from_index(*dir as usize).ok_or(
                        CoreError::UnknownConnection { dx: *dx, dy: *dy, rot: *rot as u8 },
                    )?;
                    tree.edge.push(Some((t, d)));
                }
            }
        }
        for i in 1..tree.len() {
            let p = tree.parent[i].ok_or_else(|| {
                CoreError::InvalidTree(format!("record brick {i} lacks a parent"))
            })?;
            if p >= i {
                return Err(CoreError::InvalidTree(format!("record parent[{i}] = {p}")));
            }
            tree.depth[i] = tree.depth[p] + 1;
        }
        validate_tree(&tree, vocab, self.grid)?;
        Ok(tree)
    }
}

/// One dataset entry held in memory: the record plus its image/voxel assets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub record: ObjectRecord,
    pub silhouettes: SilhouetteSet,
    pub voxels: Option<VoxelGrid>,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub dir: PathBuf,
    pub records: Vec<ObjectRecord>,
}

impl DatasetManifest {
    pub fn load_silhouettes(&self, record: &ObjectRecord) -> Result<SilhouetteSet> {
        let names = record
            .silhouettes
            .as_ref()
            .ok_or(CoreError::EmptyInput("record silhouettes"))?;
        let views = [
            read_pgm_file(self.dir.join(&names[0]))?,
            read_pgm_file(self.dir.join(&names[1]))?,
            read_pgm_file(self.dir.join(&names[2]))?,
        ];
        Ok(SilhouetteSet { views })
    }

    pub fn load_voxels(&self, record: &ObjectRecord) -> Result<Option<VoxelGrid>> {
        match &record.voxels {
            None => Ok(None),
            Some(name) => Ok(Some(read_voxl_file(self.dir.join(name))?)),
        }
    }
}

/// Write a dataset directory: silhouettes as `<id>_{0,1,2}.pgm`, voxels as
/// `<id>.voxl` when present, and a manifest line per item.
pub fn write_dataset<P: AsRef<Path>>(dir: P, items: &[DatasetItem]) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut manifest = std::io::BufWriter::new(std::fs::File::create(dir.join(MANIFEST_NAME))?);
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        let mut record = item.record.clone();
        let names = [
            format!("{}_0.pgm", record.id),
            format!("{}_1.pgm", record.id),
            format!("{}_2.pgm", record.id),
        ];
        for (name, img) in names.iter().zip(&item.silhouettes.views) {
            write_pgm_file(dir.join(name), img)?;
        }
        record.silhouettes = Some(names);
        if let Some(grid) = &item.voxels {
            let name = format!("{}.voxl", record.id);
            write_voxl_file(dir.join(&name), grid)?;
            record.voxels = Some(name);
        }
        let line = serde_json::to_string(&record)
            .map_err(|e| CoreError::Parse { line: records.len() + 1, msg: e.to_string() })?;
        manifest.write_all(line.as_bytes())?;
        manifest.write_all(b"\n")?;
        records.push(record);
    }
    manifest.flush()?;
    Ok(DatasetManifest { dir: dir.to_path_buf(), records })
}

pub fn read_dataset<P: AsRef<Path>>(dir: P) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let file = std::fs::File::open(dir.join(MANIFEST_NAME))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ObjectRecord = serde_json::from_str(&line)
            .map_err(|e| CoreError::Parse { line: i + 1, msg: e.to_string() })?;
        records.push(record);
    }
    Ok(DatasetManifest { dir: dir.to_path_buf(), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_rad_object, GenConfig};
    use crate::render::render_silhouettes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_items(n: usize) -> (ConnectionVocab, Vec<DatasetItem>) {
        let vocab = ConnectionVocab::standard();
        let cfg = GenConfig { bricks: 6, ..Default::default() };
        let items = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                let tree = generate_rad_object(&cfg, &vocab, &mut rng).unwrap();
                let grid = tree.occupancy(&vocab, 32).unwrap();
                DatasetItem {
                    record: ObjectRecord::from_tree(&format!("obj{i:04}"), "rad", 32, &tree),
                    silhouettes: render_silhouettes(&grid),
                    voxels: Some(grid),
                }
            })
            .collect();
        (vocab, items)
    }

    #[test]
    fn round_trip_preserves_records_and_assets() {
        let (vocab, items) = sample_items(10);
        let dir = tempfile::tempdir().unwrap();
        let written = write_dataset(dir.path(), &items).unwrap();
        let read = read_dataset(dir.path()).unwrap();
        assert_eq!(written.records, read.records);
        for (record, item) in read.records.iter().zip(&items) {
            let silhouettes = read.load_silhouettes(record).unwrap();
            assert_eq!(silhouettes, item.silhouettes);
            let voxels = read.load_voxels(record).unwrap();
            assert_eq!(voxels.as_ref(), item.voxels.as_ref());
            let tree = record.to_tree(&vocab).unwrap();
            assert_eq!(tree.bricks.len(), item.record.poses.as_ref().unwrap().len());
        }
    }

    #[test]
    fn truncated_manifest_reports_the_line() {
        let (_, items) = sample_items(3);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &items).unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let cut = lines[2];
        let cut = &cut[..cut.len() / 2];
        lines[2] = cut;
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset(dir.path()) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn file_count_matches_record_count() {
        let (_, items) = sample_items(8);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &items).unwrap();
        let pgms = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref().unwrap().path().extension().map(|x| x == "pgm").unwrap_or(false)
            })
            .count();
        assert_eq!(pgms, 24);
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest.lines().count(), 8);
    }

    #[test]
    fn record_tree_round_trip() {
        let (vocab, items) = sample_items(5);
        for item in &items {
            let tree = item.record.to_tree(&vocab).unwrap();
            let again = ObjectRecord::from_tree(&item.record.id, "rad", 32, &tree);
            assert_eq!(again.poses, item.record.poses);
            assert_eq!(again.parent, item.record.parent);
            assert_eq!(again.edge, item.record.edge);
        }
    }
}
