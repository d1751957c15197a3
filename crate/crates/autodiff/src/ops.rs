//! Forward definitions of the op set. Each constructor validates shapes,
//! computes the forward value and records the backward rule on the tape.

use std::rc::Rc;
use std::sync::Arc;

use crate::error::{AdError, Result};
use crate::graph::{numel, Graph, Op, Tensor};
use crate::kernels;
use crate::real::Real;

fn mismatch(op: &'static str, detail: String) -> AdError {
    AdError::ShapeMismatch { op, detail }
}

fn same_graph<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if !Rc::ptr_eq(&a.graph.0, &b.graph.0) {
        return Err(mismatch(op, "tensors belong to different graphs".into()));
    }
    Ok(())
}

pub(crate) fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

pub(crate) fn gelu_scalar<T: Real>(x: T) -> (T, T) {
    let c = T::from_f64(0.7978845608028654); // sqrt(2/pi)
    let k = T::from_f64(0.044715);
    let u = c * (x + k * x.powi(3));
    let t = u.tanh();
    let half = T::from_f64(0.5);
    let y = half * x * (T::ONE + t);
    let du = c * (T::ONE + T::from_f64(3.0) * k * x.powi(2));
    let dy = half * (T::ONE + t) + half * x * (T::ONE - t * t) * du;
    (y, dy)
}

impl<T: Real> Tensor<T> {
    /// Batched matrix product: `[.., m, k] x [.., k, n] -> [.., m, n]` with
    /// identical leading dimensions.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_graph("matmul", self, other)?;
        self.check_live();
        other.check_live();
        let (sa, sb) = (&self.shape, &other.shape);
        if sa.len() < 2 || sb.len() < 2 || sa.len() != sb.len() {
            return Err(mismatch("matmul", format!("ranks {sa:?} x {sb:?}")));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(mismatch("matmul", format!("{sa:?} x {sb:?}")));
        }
        let batch: usize = sa[..sa.len() - 2].iter().product();
        let mut out_shape = sa.clone();
        let olen = out_shape.len();
        out_shape[olen - 1] = n;
        let mut out = vec![T::ZERO; batch * m * n];
        {
            let g = self.graph.0.borrow();
            let a = &g.nodes[self.id].data;
            let b = &g.nodes[other.id].data;
            for i in 0..batch {
                kernels::matmul(
                    &a[i * m * k..(i + 1) * m * k],
                    &b[i * k * n..(i + 1) * k * n],
                    m,
                    k,
                    n,
                    &mut out[i * m * n..(i + 1) * m * n],
                    g.parallel,
                );
            }
        }
        Ok(self.graph.push(out_shape, out, Op::Matmul { a: self.id, b: other.id }))
    }

    /// Elementwise sum; `other` may be a suffix shape broadcast over the
    /// leading dimensions (e.g. a bias row added to every row).
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_graph("add", self, other)?;
        self.check_live();
        other.check_live();
        let suffix_ok = self.shape.ends_with(&other.shape) && !other.shape.is_empty();
        if !suffix_ok {
            return Err(mismatch("add", format!("{:?} + {:?}", self.shape, other.shape)));
        }
        let blen = other.numel();
        let mut out;
        {
            let g = self.graph.0.borrow();
            out = g.nodes[self.id].data.clone();
            let b = &g.nodes[other.id].data;
            for chunk in out.chunks_mut(blen) {
                for (o, bv) in chunk.iter_mut().zip(b) {
                    *o += *bv;
                }
            }
        }
        Ok(self.graph.push(self.shape.clone(), out, Op::Add { a: self.id, b: other.id }))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_graph("sub", self, other)?;
        self.check_live();
        other.check_live();
        if self.shape != other.shape {
            return Err(mismatch("sub", format!("{:?} - {:?}", self.shape, other.shape)));
        }
        let mut out;
        {
            let g = self.graph.0.borrow();
            out = g.nodes[self.id].data.clone();
            for (o, bv) in out.iter_mut().zip(&g.nodes[other.id].data) {
                *o = *o - *bv;
            }
        }
        Ok(self.graph.push(self.shape.clone(), out, Op::Sub { a: self.id, b: other.id }))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_graph("mul", self, other)?;
        self.check_live();
        other.check_live();
        if self.shape != other.shape {
            return Err(mismatch("mul", format!("{:?} * {:?}", self.shape, other.shape)));
        }
        let mut out;
        {
            let g = self.graph.0.borrow();
            out = g.nodes[self.id].data.clone();
            for (o, bv) in out.iter_mut().zip(&g.nodes[other.id].data) {
                *o = *o * *bv;
            }
        }
        Ok(self.graph.push(self.shape.clone(), out, Op::Mul { a: self.id, b: other.id }))
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        self.check_live();
        let out: Vec<T> = self.with_value(|d| d.iter().map(|v| *v * c).collect());
        self.graph.push(self.shape.clone(), out, Op::Scale { a: self.id, c })
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.check_live();
        let out: Vec<T> = self.with_value(|d| d.iter().map(|v| sigmoid_scalar(*v)).collect());
        self.graph.push(self.shape.clone(), out, Op::Sigmoid { a: self.id })
    }

    /// Softmax over the last dimension.
    pub fn softmax(&self) -> Result<Tensor<T>> {
        self.check_live();
        let d = *self.shape.last().ok_or_else(|| mismatch("softmax", "rank 0".into()))?;
        if d == 0 {
            return Err(mismatch("softmax", "empty last dimension".into()));
        }
        let mut out = self.value();
        for row in out.chunks_mut(d) {
            let mut m = row[0];
            for v in row.iter() {
                m = m.max(*v);
            }
            let mut sum = T::ZERO;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        Ok(self.graph.push(self.shape.clone(), out, Op::Softmax { a: self.id }))
    }

    /// GELU with the tanh approximation.
    pub fn gelu(&self) -> Tensor<T> {
        self.check_live();
        let out: Vec<T> = self.with_value(|d| d.iter().map(|v| gelu_scalar(*v).0).collect());
        self.graph.push(self.shape.clone(), out, Op::Gelu { a: self.id })
    }

    /// Layer normalization over the last dimension with learnable gain/bias.
    pub fn layer_norm(&self, gain: &Tensor<T>, bias: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
        same_graph("layer_norm", self, gain)?;
        same_graph("layer_norm", self, bias)?;
        self.check_live();
        gain.check_live();
        bias.check_live();
        let d = *self.shape.last().ok_or_else(|| mismatch("layer_norm", "rank 0".into()))?;
        if gain.shape != [d] || bias.shape != [d] {
            return Err(mismatch(
                "layer_norm",
                format!("input {:?}, gain {:?}, bias {:?}", self.shape, gain.shape, bias.shape),
            ));
        }
        let mut out = self.value();
        {
            let g = self.graph.0.borrow();
            let gamma = &g.nodes[gain.id].data;
            let beta = &g.nodes[bias.id].data;
            let epsv = T::from_f64(eps);
            let inv_d = T::ONE / T::from_usize(d);
            for row in out.chunks_mut(d) {
                let mut mean = T::ZERO;
                for v in row.iter() {
                    mean += *v;
                }
                mean = mean * inv_d;
                let mut var = T::ZERO;
                for v in row.iter() {
                    let c = *v - mean;
                    var += c * c;
                }
                var = var * inv_d;
                let inv_std = T::ONE / (var + epsv).sqrt();
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (*v - mean) * inv_std * gamma[j] + beta[j];
                }
            }
        }
        Ok(self.graph.push(
            self.shape.clone(),
            out,
            Op::LayerNorm { a: self.id, gain: gain.id, bias: bias.id, eps },
        ))
    }

    /// Row lookup: treats `self` as a `[vocab, d]` table.
    pub fn lookup(&self, indices: &[usize]) -> Result<Tensor<T>> {
        self.check_live();
        if self.shape.len() != 2 {
            return Err(mismatch("lookup", format!("table must be 2-d, got {:?}", self.shape)));
        }
        let (v, d) = (self.shape[0], self.shape[1]);
        if let Some(bad) = indices.iter().find(|i| **i >= v) {
            return Err(AdError::IndexOutOfRange {
                op: "lookup",
                detail: format!("index {bad} into table of {v} rows"),
            });
        }
        let mut out = Vec::with_capacity(indices.len() * d);
        self.with_value(|data| {
            for &i in indices {
                out.extend_from_slice(&data[i * d..(i + 1) * d]);
            }
        });
        Ok(self.graph.push(
            vec![indices.len(), d],
            out,
            Op::Lookup { table: self.id, indices: Arc::new(indices.to_vec()) },
        ))
    }

    /// Arbitrary index map: `out[i] = self[indices[i]]`.
    pub fn gather(&self, indices: Vec<u32>, out_shape: Vec<usize>) -> Result<Tensor<T>> {
        self.check_live();
        if indices.len() != numel(&out_shape) {
            return Err(mismatch(
                "gather",
                format!("{} indices vs shape {:?}", indices.len(), out_shape),
            ));
        }
        let n = self.numel() as u32;
        if let Some(bad) = indices.iter().find(|i| **i >= n) {
            return Err(AdError::IndexOutOfRange {
                op: "gather",
                detail: format!("index {bad} into {n} elements"),
            });
        }
        let out: Vec<T> =
            self.with_value(|d| indices.iter().map(|i| d[*i as usize]).collect());
        Ok(self.graph.push(out_shape, out, Op::Gather { a: self.id, indices: Arc::new(indices) }))
    }

    /// Swap the last two dimensions.
    pub fn transpose(&self) -> Result<Tensor<T>> {
        let rank = self.shape.len();
        if rank < 2 {
            return Err(mismatch("transpose", format!("rank {rank}")));
        }
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(rank - 2, rank - 1);
        self.permute(&perm)
    }

    /// Reorder dimensions by `perm`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor<T>> {
        self.check_live();
        let rank = self.shape.len();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|p| *p >= rank || std::mem::replace(&mut seen[*p], true)) {
            return Err(mismatch("permute", format!("perm {perm:?} for shape {:?}", self.shape)));
        }
        let out_shape: Vec<usize> = perm.iter().map(|p| self.shape[*p]).collect();
        let in_strides = strides(&self.shape);
        let out_strides = strides(&out_shape);
        let n = self.numel();
        let mut indices = vec![0u32; n];
        for (i, slot) in indices.iter_mut().enumerate() {
            let mut rem = i;
            let mut src = 0usize;
            for (axis, os) in out_strides.iter().enumerate() {
                let coord = rem / os;
                rem %= os;
                src += coord * in_strides[perm[axis]];
            }
            *slot = src as u32;
        }
        self.gather(indices, out_shape)
    }

    /// Select index `i` along `axis`, removing that axis.
    pub fn index_axis(&self, axis: usize, i: usize) -> Result<Tensor<T>> {
        self.slice_axis(axis, i, 1).map(|t| {
            let mut shape = t.shape.clone();
            shape.remove(axis);
            t.reshape(shape).expect("numel unchanged")
        })
    }

    /// Contiguous range along one axis.
    pub fn slice_axis(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        self.check_live();
        if axis >= self.shape.len() || start + len > self.shape[axis] {
            return Err(mismatch(
                "slice",
                format!("axis {axis}, {start}..{} of {:?}", start + len, self.shape),
            ));
        }
        let mut out_shape = self.shape.clone();
        out_shape[axis] = len;
        let in_strides = strides(&self.shape);
        let out_strides = strides(&out_shape);
        let n = numel(&out_shape);
        let mut indices = vec![0u32; n];
        for (i, slot) in indices.iter_mut().enumerate() {
            let mut rem = i;
            let mut src = 0usize;
            for (ax, os) in out_strides.iter().enumerate() {
                let mut coord = rem / os;
                rem %= os;
                if ax == axis {
                    coord += start;
                }
                src += coord * in_strides[ax];
            }
            *slot = src as u32;
        }
        self.gather(indices, out_shape)
    }

    /// Reverse the first axis of a 2-d tensor (image row flip).
    pub fn flip_rows(&self) -> Result<Tensor<T>> {
        self.check_live();
        if self.shape.len() != 2 {
            return Err(mismatch("flip_rows", format!("need 2-d, got {:?}", self.shape)));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut indices = Vec::with_capacity(r * c);
        for i in 0..r {
            let src = (r - 1 - i) * c;
            indices.extend((src..src + c).map(|x| x as u32));
        }
        self.gather(indices, self.shape.clone())
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor<T>> {
        self.check_live();
        if numel(&shape) != self.numel() {
            return Err(mismatch("reshape", format!("{:?} -> {shape:?}", self.shape)));
        }
        let data = self.value();
        Ok(self.graph.push(shape, data, Op::Reshape { a: self.id }))
    }

    /// Mean over all elements, as a `[1]` scalar.
    pub fn mean(&self) -> Result<Tensor<T>> {
        self.check_live();
        let n = self.numel();
        if n == 0 {
            return Err(mismatch("mean", "empty tensor".into()));
        }
        let mut acc = T::ZERO;
        self.with_value(|d| {
            for v in d {
                acc += *v;
            }
        });
        let out = vec![acc / T::from_usize(n)];
        Ok(self.graph.push(vec![1], out, Op::Mean { a: self.id }))
    }

    /// Sum over all elements, as a `[1]` scalar.
    pub fn sum(&self) -> Result<Tensor<T>> {
        self.check_live();
        let mut acc = T::ZERO;
        self.with_value(|d| {
            for v in d {
                acc += *v;
            }
        });
        Ok(self.graph.push(vec![1], vec![acc], Op::Sum { a: self.id }))
    }

    /// Replace masked positions with `value`; the mask length must divide
    /// the tensor length and is tiled over leading dimensions.
    pub fn masked_fill(&self, mask: &[bool], value: T) -> Result<Tensor<T>> {
        self.check_live();
        let n = self.numel();
        if mask.is_empty() || n % mask.len() != 0 {
            return Err(mismatch(
                "masked_fill",
                format!("mask of {} over {n} elements", mask.len()),
            ));
        }
        let mlen = mask.len();
        let out: Vec<T> = self.with_value(|d| {
            d.iter()
                .enumerate()
                .map(|(i, v)| if mask[i % mlen] { value } else { *v })
                .collect()
        });
        Ok(self.graph.push(
            self.shape.clone(),
            out,
            Op::MaskedFill { a: self.id, mask: Arc::new(mask.to_vec()) },
        ))
    }

    /// Keep values at or above `alpha`, zero the rest. Gradient passes only
    /// through kept positions.
    pub fn threshold_keep(&self, alpha: T) -> Tensor<T> {
        self.check_live();
        let out: Vec<T> = self.with_value(|d| {
            d.iter().map(|v| if *v >= alpha { *v } else { T::ZERO }).collect()
        });
        self.graph.push(self.shape.clone(), out, Op::ThresholdKeep { a: self.id, alpha })
    }
}

/// Concatenate along `axis`; shapes must agree elsewhere.
pub fn concat<T: Real>(tensors: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = tensors.first().ok_or_else(|| mismatch("concat", "no inputs".into()))?;
    let rank = first.shape.len();
    if axis >= rank {
        return Err(mismatch("concat", format!("axis {axis} of rank {rank}")));
    }
    let mut axis_total = 0;
    for t in tensors {
        same_graph("concat", first, t)?;
        t.check_live();
        if t.shape.len() != rank {
            return Err(mismatch("concat", format!("ranks {:?} vs {:?}", first.shape, t.shape)));
        }
        for (ax, (a, b)) in first.shape.iter().zip(&t.shape).enumerate() {
            if ax != axis && a != b {
                return Err(mismatch(
                    "concat",
                    format!("shapes {:?} vs {:?} differ off-axis", first.shape, t.shape),
                ));
            }
        }
        axis_total += t.shape[axis];
    }
    let mut out_shape = first.shape.clone();
    out_shape[axis] = axis_total;
    let outer: usize = first.shape[..axis].iter().product();
    let inner: usize = first.shape[axis + 1..].iter().product();
    let mut out = Vec::with_capacity(numel(&out_shape));
    {
        let g = first.graph.0.borrow();
        for o in 0..outer {
            for t in tensors {
                let block = t.shape[axis] * inner;
                let data = &g.nodes[t.id].data;
                out.extend_from_slice(&data[o * block..(o + 1) * block]);
            }
        }
    }
    Ok(first.graph.push(
        out_shape,
        out,
        Op::Concat { inputs: tensors.iter().map(|t| t.id).collect(), axis },
    ))
}

/// Per element: the mean of strictly positive inputs, 0 when none are.
/// Gradient flows 1/k to each of the k positive contributors.
pub fn nonzero_mean<T: Real>(inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = inputs.first().ok_or_else(|| mismatch("nonzero_mean", "no inputs".into()))?;
    for t in inputs {
        same_graph("nonzero_mean", first, t)?;
        t.check_live();
        if t.shape != first.shape {
            return Err(mismatch(
                "nonzero_mean",
                format!("{:?} vs {:?}", first.shape, t.shape),
            ));
        }
    }
    let n = first.numel();
    let mut out = vec![T::ZERO; n];
    let mut counts = vec![0u32; n];
    {
        let g = first.graph.0.borrow();
        for t in inputs {
            let data = &g.nodes[t.id].data;
            for i in 0..n {
                if data[i] > T::ZERO {
                    out[i] += data[i];
                    counts[i] += 1;
                }
            }
        }
    }
    for i in 0..n {
        if counts[i] > 0 {
            out[i] = out[i] / T::from_usize(counts[i] as usize);
        }
    }
    Ok(first.graph.push(
        first.shape.clone(),
        out,
        Op::NonzeroMean { inputs: inputs.iter().map(|t| t.id).collect() },
    ))
}

/// Per element: the maximum over inputs. Gradient goes to the first input
/// attaining the maximum.
pub fn elementwise_max<T: Real>(inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = inputs.first().ok_or_else(|| mismatch("elementwise_max", "no inputs".into()))?;
    for t in inputs {
        same_graph("elementwise_max", first, t)?;
        t.check_live();
        if t.shape != first.shape {
            return Err(mismatch(
                "elementwise_max",
                format!("{:?} vs {:?}", first.shape, t.shape),
            ));
        }
    }
    let n = first.numel();
    let mut out;
    {
        let g = first.graph.0.borrow();
        out = g.nodes[first.id].data.clone();
        for t in &inputs[1..] {
            let data = &g.nodes[t.id].data;
            for i in 0..n {
                out[i] = out[i].max(data[i]);
            }
        }
    }
    Ok(first.graph.push(
        first.shape.clone(),
        out,
        Op::EltMax { inputs: inputs.iter().map(|t| t.id).collect() },
    ))
}

/// Linear scatter: `out[cell] += x[c]` for every cell in `cells[c]`. The
/// per-class cell lists are compile-time constants of the op.
pub fn scatter_sum<T: Real>(
    x: &Tensor<T>,
    cells: Vec<Vec<u32>>,
    out_len: usize,
) -> Result<Tensor<T>> {
    x.check_live();
    if x.numel() != cells.len() {
        return Err(mismatch(
            "scatter_sum",
            format!("{} classes vs {} cell lists", x.numel(), cells.len()),
        ));
    }
    if let Some(bad) = cells.iter().flatten().find(|c| **c as usize >= out_len) {
        return Err(AdError::IndexOutOfRange {
            op: "scatter_sum",
            detail: format!("cell {bad} in grid of {out_len}"),
        });
    }
    let mut out = vec![T::ZERO; out_len];
    x.with_value(|d| {
        for (c, list) in cells.iter().enumerate() {
            let v = d[c];
            if v == T::ZERO {
                continue;
            }
            for cell in list {
                out[*cell as usize] += v;
            }
        }
    });
    Ok(x.graph.push(vec![out_len], out, Op::ScatterSum { a: x.id, cells: Arc::new(cells) }))
}

/// Numerically stable binary cross-entropy with logits, averaged over the
/// positions where `mask` is true. Targets and mask are constants.
pub fn bce_with_logits_mean<T: Real>(
    logits: &Tensor<T>,
    targets: &[T],
    mask: &[bool],
) -> Result<Tensor<T>> {
    logits.check_live();
    let n = logits.numel();
    if targets.len() != n || mask.len() != n {
        return Err(mismatch(
            "bce_with_logits_mean",
            format!("{n} logits, {} targets, {} mask", targets.len(), mask.len()),
        ));
    }
    let count = mask.iter().filter(|m| **m).count().max(1);
    let mut acc = T::ZERO;
    logits.with_value(|d| {
        for i in 0..n {
            if !mask[i] {
                continue;
            }
            let l = d[i];
            let y = targets[i];
            // max(l,0) - l*y + ln(1 + exp(-|l|))
            acc += l.max(T::ZERO) - l * y + (-l.abs()).exp().ln_1p();
        }
    });
    let out = vec![acc / T::from_usize(count)];
    Ok(logits.graph.push(
        vec![1],
        out,
        Op::BceMean {
            logits: logits.id,
            targets: Arc::new(targets.to_vec()),
            mask: Arc::new(mask.to_vec()),
        },
    ))
}

/// Stack equal-shape vectors as rows of a matrix.
pub fn stack_rows<T: Real>(rows: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = rows.first().ok_or_else(|| mismatch("stack_rows", "no inputs".into()))?;
    let width = first.numel();
    let reshaped: Vec<Tensor<T>> = rows
        .iter()
        .map(|r| r.reshape(vec![1, width]))
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor<T>> = reshaped.iter().collect();
    concat(&refs, 0)
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl<T: Real> Graph<T> {
    /// Leaf from f64 values (convenient for tests and constants).
    pub fn leaf_f64(&self, shape: Vec<usize>, data: &[f64]) -> Tensor<T> {
        self.leaf(shape, data.iter().map(|v| T::from_f64(*v)).collect())
    }
}
