//! Transformer building blocks: multi-head attention and the MLP, wired
//! pre-norm.

use brickforge_autodiff::{Real, Tensor};

use crate::error::Result;
use crate::init::ParamBuilder;

const LN_EPS: f64 = 1e-5;

#[derive(Clone)]
pub struct LayerNormParams<T: Real> {
    pub gain: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> LayerNormParams<T> {
    pub fn build(b: &mut ParamBuilder<T>, prefix: &str, d: usize) -> Self {
        LayerNormParams {
            gain: b.ones(&format!("{prefix}.g"), vec![d]),
            bias: b.zeros(&format!("{prefix}.b"), vec![d]),
        }
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.layer_norm(&self.gain, &self.bias, LN_EPS)?)
    }
}

#[derive(Clone)]
pub struct AttentionParams<T: Real> {
    pub wq: Tensor<T>,
    pub bq: Tensor<T>,
    pub wk: Tensor<T>,
    pub bk: Tensor<T>,
    pub wv: Tensor<T>,
    pub bv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub heads: usize,
}

impl<T: Real> AttentionParams<T> {
    pub fn build(b: &mut ParamBuilder<T>, prefix: &str, d: usize, heads: usize) -> Self {
        AttentionParams {
            wq: b.normal(&format!("{prefix}.wq"), vec![d, d]),
            bq: b.zeros(&format!("{prefix}.bq"), vec![d]),
            wk: b.normal(&format!("{prefix}.wk"), vec![d, d]),
            bk: b.zeros(&format!("{prefix}.bk"), vec![d]),
            wv: b.normal(&format!("{prefix}.wv"), vec![d, d]),
            bv: b.zeros(&format!("{prefix}.bv"), vec![d]),
            wo: b.normal(&format!("{prefix}.wo"), vec![d, d]),
            bo: b.zeros(&format!("{prefix}.bo"), vec![d]),
            heads,
        }
    }

    /// Scaled dot-product attention of `q_in` [n,d] over `kv_in` [m,d].
    /// With `causal`, position i only attends to keys at or before i.
    pub fn apply(&self, q_in: &Tensor<T>, kv_in: &Tensor<T>, causal: bool) -> Result<Tensor<T>> {
        let n = q_in.shape()[0];
        let m = kv_in.shape()[0];
        let d = q_in.shape()[1];
        let h = self.heads;
        let dh = d / h;

        let q = q_in.matmul(&self.wq)?.add(&self.bq)?;
        let k = kv_in.matmul(&self.wk)?.add(&self.bk)?;
        let v = kv_in.matmul(&self.wv)?.add(&self.bv)?;

        // [n,d] -> [h,n,dh]
        let q = q.reshape(vec![n, h, dh])?.permute(&[1, 0, 2])?;
        // keys transposed straight to [h,dh,m]
        let k = k.reshape(vec![m, h, dh])?.permute(&[1, 2, 0])?;
        let v = v.reshape(vec![m, h, dh])?.permute(&[1, 0, 2])?;

        let mut scores = q.matmul(&k)?.scale(T::from_f64(1.0 / (dh as f64).sqrt()));
        if causal {
            let mut mask = vec![false; n * m];
            for i in 0..n {
                for j in (i + 1)..m {
                    mask[i * m + j] = true;
                }
            }
            scores = scores.masked_fill(&mask, T::from_f64(-1e9))?;
        }
        let attn = scores.softmax()?;
        let ctx = attn.matmul(&v)?; // [h,n,dh]
        let ctx = ctx.permute(&[1, 0, 2])?.reshape(vec![n, d])?;
        Ok(ctx.matmul(&self.wo)?.add(&self.bo)?)
    }
}

#[derive(Clone)]
pub struct MlpParams<T: Real> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

impl<T: Real> MlpParams<T> {
    pub fn build(b: &mut ParamBuilder<T>, prefix: &str, d: usize, hidden: usize) -> Self {
        MlpParams {
            w1: b.normal(&format!("{prefix}.w1"), vec![d, hidden]),
            b1: b.zeros(&format!("{prefix}.b1"), vec![hidden]),
            w2: b.normal(&format!("{prefix}.w2"), vec![hidden, d]),
            b2: b.zeros(&format!("{prefix}.b2"), vec![d]),
        }
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.matmul(&self.w1)?.add(&self.b1)?.gelu().matmul(&self.w2)?.add(&self.b2)?)
    }
}

pub struct EncoderBlock<T: Real> {
    pub ln1: LayerNormParams<T>,
    pub attn: AttentionParams<T>,
    pub ln2: LayerNormParams<T>,
    pub mlp: MlpParams<T>,
}

impl<T: Real> EncoderBlock<T> {
    pub fn build(b: &mut ParamBuilder<T>, prefix: &str, d: usize, heads: usize, mlp: usize) -> Self {
        EncoderBlock {
            ln1: LayerNormParams::build(b, &format!("{prefix}.ln1"), d),
            attn: AttentionParams::build(b, &format!("{prefix}.attn"), d, heads),
            ln2: LayerNormParams::build(b, &format!("{prefix}.ln2"), d),
            mlp: MlpParams::build(b, &format!("{prefix}.mlp"), d, mlp),
        }
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let a = self.attn.apply(&self.ln1.apply(x)?, &self.ln1.apply(x)?, false)?;
        let x = x.add(&a)?;
        let m = self.mlp.apply(&self.ln2.apply(&x)?)?;
        Ok(x.add(&m)?)
    }
}

pub struct DecoderBlock<T: Real> {
    pub ln1: LayerNormParams<T>,
    pub self_attn: AttentionParams<T>,
    pub ln2: LayerNormParams<T>,
    pub cross_attn: AttentionParams<T>,
    pub ln3: LayerNormParams<T>,
    pub mlp: MlpParams<T>,
}

impl<T: Real> DecoderBlock<T> {
    pub fn build(b: &mut ParamBuilder<T>, prefix: &str, d: usize, heads: usize, mlp: usize) -> Self {
        DecoderBlock {
            ln1: LayerNormParams::build(b, &format!("{prefix}.ln1"), d),
            self_attn: AttentionParams::build(b, &format!("{prefix}.self"), d, heads),
            ln2: LayerNormParams::build(b, &format!("{prefix}.ln2"), d),
            cross_attn: AttentionParams::build(b, &format!("{prefix}.cross"), d, heads),
            ln3: LayerNormParams::build(b, &format!("{prefix}.ln3"), d),
            mlp: MlpParams::build(b, &format!("{prefix}.mlp"), d, mlp),
        }
    }

    pub fn apply(&self, x: &Tensor<T>, memory: &Tensor<T>) -> Result<Tensor<T>> {
        let q = self.ln1.apply(x)?;
        let x = x.add(&self.self_attn.apply(&q, &q, true)?)?;
        let x = x.add(&self.cross_attn.apply(&self.ln2.apply(&x)?, memory, false)?)?;
        let m = self.mlp.apply(&self.ln3.apply(&x)?)?;
        Ok(x.add(&m)?)
    }
}
