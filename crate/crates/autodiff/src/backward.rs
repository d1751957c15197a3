//! Backward rules, one per op. `apply` consumes the scratch gradient of a
//! node and accumulates contributions into its inputs' scratch slots.

use crate::graph::{numel, GraphInner, Op};
use crate::kernels;
use crate::ops::{gelu_scalar, sigmoid_scalar};
use crate::real::Real;

fn slot<'a, T: Real>(
    scratch: &'a mut [Option<Vec<T>>],
    id: usize,
    len: usize,
) -> &'a mut Vec<T> {
    scratch[id].get_or_insert_with(|| vec![T::ZERO; len])
}

pub(crate) fn apply<T: Real>(g: &GraphInner<T>, id: usize, scratch: &mut [Option<Vec<T>>]) {
    let gout = scratch[id].take().expect("apply called without a gradient");
    let node = &g.nodes[id];
    match &node.op {
        Op::Leaf => {}

        Op::Matmul { a, b } => {
            let (sa, sb) = (&g.nodes[*a].shape, &g.nodes[*b].shape);
            let m = sa[sa.len() - 2];
            let k = sa[sa.len() - 1];
            let n = sb[sb.len() - 1];
            let batch: usize = sa[..sa.len() - 2].iter().product();
            let adata = &g.nodes[*a].data;
            let bdata = &g.nodes[*b].data;
            {
                let da = slot(scratch, *a, adata.len());
                for i in 0..batch {
                    kernels::matmul_nt(
                        &gout[i * m * n..(i + 1) * m * n],
                        &bdata[i * k * n..(i + 1) * k * n],
                        m,
                        n,
                        k,
                        &mut da[i * m * k..(i + 1) * m * k],
                        g.parallel,
                    );
                }
            }
            let db = slot(scratch, *b, bdata.len());
            for i in 0..batch {
                kernels::matmul_tn(
                    &adata[i * m * k..(i + 1) * m * k],
                    &gout[i * m * n..(i + 1) * m * n],
                    m,
                    k,
                    n,
                    &mut db[i * k * n..(i + 1) * k * n],
                    g.parallel,
                );
            }
        }

        Op::Add { a, b } => {
            let blen = numel(&g.nodes[*b].shape);
            {
                let da = slot(scratch, *a, gout.len());
                for (d, gv) in da.iter_mut().zip(&gout) {
                    *d += *gv;
                }
            }
            let db = slot(scratch, *b, blen);
            for chunk in gout.chunks(blen) {
                for (d, gv) in db.iter_mut().zip(chunk) {
                    *d += *gv;
                }
            }
        }

        Op::Sub { a, b } => {
            {
                let da = slot(scratch, *a, gout.len());
                for (d, gv) in da.iter_mut().zip(&gout) {
                    *d += *gv;
                }
            }
            let db = slot(scratch, *b, gout.len());
            for (d, gv) in db.iter_mut().zip(&gout) {
                *d += -*gv;
            }
        }

        Op::Mul { a, b } => {
            let adata = &g.nodes[*a].data;
            let bdata = &g.nodes[*b].data;
            {
                let da = slot(scratch, *a, adata.len());
                for i in 0..gout.len() {
                    da[i] += gout[i] * bdata[i];
                }
            }
            let db = slot(scratch, *b, bdata.len());
            for i in 0..gout.len() {
                db[i] += gout[i] * adata[i];
            }
        }

        Op::Scale { a, c } => {
            let da = slot(scratch, *a, gout.len());
            for (d, gv) in da.iter_mut().zip(&gout) {
                *d += *gv * *c;
            }
        }

        Op::Sigmoid { a } => {
            let y = &node.data;
            let da = slot(scratch, *a, y.len());
            for i in 0..y.len() {
                da[i] += gout[i] * y[i] * (T::ONE - y[i]);
            }
        }

        Op::Softmax { a } => {
            let y = &node.data;
            let d = *node.shape.last().unwrap();
            let da = slot(scratch, *a, y.len());
            for (row, (yrow, grow)) in y.chunks(d).zip(gout.chunks(d)).enumerate() {
                let mut dot = T::ZERO;
                for j in 0..d {
                    dot += yrow[j] * grow[j];
                }
                let out = &mut da[row * d..(row + 1) * d];
                for j in 0..d {
                    out[j] += yrow[j] * (grow[j] - dot);
                }
            }
        }

        Op::Gelu { a } => {
            let x = &g.nodes[*a].data;
            let da = slot(scratch, *a, x.len());
            for i in 0..x.len() {
                da[i] += gout[i] * gelu_scalar(x[i]).1;
            }
        }

        Op::LayerNorm { a, gain, bias, eps } => {
            let x = &g.nodes[*a].data;
            let gamma = &g.nodes[*gain].data;
            let d = gamma.len();
            let epsv = T::from_f64(*eps);
            let inv_d = T::ONE / T::from_usize(d);

            // dbeta and dgamma first (rows summed), then dx row by row.
            {
                let dbeta = slot(scratch, *bias, d);
                for grow in gout.chunks(d) {
                    for j in 0..d {
                        dbeta[j] += grow[j];
                    }
                }
            }
            let rows = x.len() / d;
            let mut xhat = vec![T::ZERO; x.len()];
            let mut inv_stds = vec![T::ZERO; rows];
            for r in 0..rows {
                let row = &x[r * d..(r + 1) * d];
                let mut mean = T::ZERO;
                for v in row {
                    mean += *v;
                }
                mean = mean * inv_d;
                let mut var = T::ZERO;
                for v in row {
                    let c = *v - mean;
                    var += c * c;
                }
                var = var * inv_d;
                let inv_std = T::ONE / (var + epsv).sqrt();
                inv_stds[r] = inv_std;
                for j in 0..d {
                    xhat[r * d + j] = (row[j] - mean) * inv_std;
                }
            }
            {
                let dgamma = slot(scratch, *gain, d);
                for r in 0..rows {
                    let grow = &gout[r * d..(r + 1) * d];
                    for j in 0..d {
                        dgamma[j] += grow[j] * xhat[r * d + j];
                    }
                }
            }
            let da = slot(scratch, *a, x.len());
            for r in 0..rows {
                let grow = &gout[r * d..(r + 1) * d];
                let xh = &xhat[r * d..(r + 1) * d];
                let mut mean_dxhat = T::ZERO;
                let mut mean_dxhat_xhat = T::ZERO;
                for j in 0..d {
                    let dxhat = grow[j] * gamma[j];
                    mean_dxhat += dxhat;
                    mean_dxhat_xhat += dxhat * xh[j];
                }
                mean_dxhat = mean_dxhat * inv_d;
                mean_dxhat_xhat = mean_dxhat_xhat * inv_d;
                let out = &mut da[r * d..(r + 1) * d];
                for j in 0..d {
                    let dxhat = grow[j] * gamma[j];
                    out[j] += (dxhat - mean_dxhat - xh[j] * mean_dxhat_xhat) * inv_stds[r];
                }
            }
        }

        Op::Lookup { table, indices } => {
            let d = g.nodes[*table].shape[1];
            let dt = slot(scratch, *table, g.nodes[*table].data.len());
            for (row, &i) in indices.iter().enumerate() {
                let grow = &gout[row * d..(row + 1) * d];
                let trow = &mut dt[i * d..(i + 1) * d];
                for j in 0..d {
                    trow[j] += grow[j];
                }
            }
        }

        Op::Concat { inputs, axis } => {
            let out_shape = &node.shape;
            let outer: usize = out_shape[..*axis].iter().product();
            let inner: usize = out_shape[*axis + 1..].iter().product();
            let mut offset_per_outer = Vec::with_capacity(inputs.len());
            let mut total_block = 0usize;
            for inp in inputs {
                let blk = g.nodes[*inp].shape[*axis] * inner;
                offset_per_outer.push((*inp, total_block, blk));
                total_block += blk;
            }
            for (inp, start, blk) in offset_per_outer {
                let dlen = g.nodes[inp].data.len();
                let di = slot(scratch, inp, dlen);
                for o in 0..outer {
                    let src = &gout[o * total_block + start..o * total_block + start + blk];
                    let dst = &mut di[o * blk..(o + 1) * blk];
                    for j in 0..blk {
                        dst[j] += src[j];
                    }
                }
            }
        }

        Op::Gather { a, indices } => {
            let da = slot(scratch, *a, g.nodes[*a].data.len());
            for (i, &src) in indices.iter().enumerate() {
                da[src as usize] += gout[i];
            }
        }

        Op::Reshape { a } => {
            let da = slot(scratch, *a, gout.len());
            for (d, gv) in da.iter_mut().zip(&gout) {
                *d += *gv;
            }
        }

        Op::Mean { a } => {
            let n = g.nodes[*a].data.len();
            let share = gout[0] / T::from_usize(n);
            let da = slot(scratch, *a, n);
            for d in da.iter_mut() {
                *d += share;
            }
        }

        Op::Sum { a } => {
            let n = g.nodes[*a].data.len();
            let da = slot(scratch, *a, n);
            for d in da.iter_mut() {
                *d += gout[0];
            }
        }

        Op::MaskedFill { a, mask } => {
            let mlen = mask.len();
            let da = slot(scratch, *a, gout.len());
            for i in 0..gout.len() {
                if !mask[i % mlen] {
                    da[i] += gout[i];
                }
            }
        }

        Op::ThresholdKeep { a, alpha } => {
            let x = &g.nodes[*a].data;
            let da = slot(scratch, *a, x.len());
            for i in 0..x.len() {
                if x[i] >= *alpha {
                    da[i] += gout[i];
                }
            }
        }

        Op::NonzeroMean { inputs } => {
            let n = gout.len();
            let mut counts = vec![0u32; n];
            for inp in inputs {
                let data = &g.nodes[*inp].data;
                for i in 0..n {
                    if data[i] > T::ZERO {
                        counts[i] += 1;
                    }
                }
            }
            for inp in inputs {
                // Split the borrow: read data first, then touch scratch.
                let positive: Vec<bool> =
                    g.nodes[*inp].data.iter().map(|v| *v > T::ZERO).collect();
                let di = slot(scratch, *inp, n);
                for i in 0..n {
                    if positive[i] && counts[i] > 0 {
                        di[i] += gout[i] / T::from_usize(counts[i] as usize);
                    }
                }
            }
        }

        Op::EltMax { inputs } => {
            let n = gout.len();
            let out = &node.data;
            let mut taken = vec![false; n];
            for inp in inputs {
                let hits: Vec<bool> = {
                    let data = &g.nodes[*inp].data;
                    (0..n).map(|i| !taken[i] && data[i] == out[i]).collect()
                };
                let di = slot(scratch, *inp, n);
                for i in 0..n {
                    if hits[i] {
                        di[i] += gout[i];
                        taken[i] = true;
                    }
                }
            }
        }

        Op::ScatterSum { a, cells } => {
            let da = slot(scratch, *a, cells.len());
            for (c, list) in cells.iter().enumerate() {
                let mut acc = T::ZERO;
                for cell in list {
                    acc += gout[*cell as usize];
                }
                da[c] += acc;
            }
        }

        Op::BceMean { logits, targets, mask } => {
            let x = &g.nodes[*logits].data;
            let count = T::from_usize(mask.iter().filter(|m| **m).count().max(1));
            let scale = gout[0] / count;
            let da = slot(scratch, *logits, x.len());
            for i in 0..x.len() {
                if mask[i] {
                    da[i] += scale * (sigmoid_scalar(x[i]) - targets[i]);
                }
            }
        }
    }
    scratch[id] = Some(gout);
}
