use crate::error::{ModelError, Result};

/// Tree-transformer hyperparameters. Defaults follow the reference setup:
/// 4+4 layers, 8 heads, feature width 64, MLP width 512, 64px inputs cut
/// into 16x16 patches with the three views stacked as channels, and no
/// classification token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub mlp_dim: usize,
    pub image_size: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub n_types: usize,
    pub max_bricks: usize,
    pub grid: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: 64,
            enc_layers: 4,
            dec_layers: 4,
            heads: 8,
            mlp_dim: 512,
            image_size: 64,
            patch_size: 16,
            channels: 3,
            n_types: 16,
            max_bricks: 64,
            grid: 32,
        }
    }
}

impl ModelConfig {
    /// A shrunken configuration for fast tests.
    pub fn tiny() -> Self {
        ModelConfig {
            feature_dim: 16,
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            mlp_dim: 32,
            image_size: 16,
            patch_size: 8,
            channels: 3,
            n_types: 16,
            max_bricks: 20,
            grid: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size % self.patch_size != 0 {
            return Err(ModelError::Config(format!(
                "image size {} not divisible by patch size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.feature_dim % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "feature dim {} not divisible by {} heads",
                self.feature_dim, self.heads
            )));
        }
        if self.max_bricks == 0 || self.grid == 0 || self.n_types == 0 {
            return Err(ModelError::Config("zero-sized capacity".into()));
        }
        Ok(())
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn patch_count(&self) -> usize {
        self.patches_per_side() * self.patches_per_side()
    }

    pub fn patch_dim(&self) -> usize {
        self.channels * self.patch_size * self.patch_size
    }

    /// 16 type slots + 1 stop per side.
    pub fn side_slots(&self) -> usize {
        self.n_types + 1
    }

    pub fn head_slots(&self) -> usize {
        2 * self.side_slots()
    }

    /// Sentinel indices for the root query, which has no incoming edge.
    pub fn root_type_index(&self) -> usize {
        self.n_types
    }

    pub fn root_dir_index(&self) -> usize {
        2
    }

    /// Closed-form parameter count (regression guard).
    pub fn expected_param_count(&self) -> usize {
        let d = self.feature_dim;
        let ln = 2 * d;
        let attn = 4 * (d * d + d);
        let mlp = d * self.mlp_dim + self.mlp_dim + self.mlp_dim * d + d;
        let enc_block = 2 * ln + attn + mlp;
        let dec_block = 3 * ln + 2 * attn + mlp;
        let patch = self.patch_dim() * d + d;
        let pos = self.patch_count() * d;
        let emb = (self.n_types + 1) * d  // type + root sentinel
            + 3 * d                        // direction + sentinel
            + (self.max_bricks + 1) * d    // depth
            + (self.grid + 1) * d          // shared coordinate table
            + 2 * d; // rotation
        let head = 2 * (d * self.side_slots() + self.side_slots());
        patch + pos + self.enc_layers * enc_block + ln + emb + self.dec_layers * dec_block + ln + head
    }
}
