//! Batched jet propagation through the MLP and its hand-derived adjoint.
//!
//! Activations are stored per channel (`k` = derivative order) as row-major
//! `width x np` matrices, one column per time point, padded with inert columns
//! to a multiple of [`LANES`]. For a tanh layer with
//! pre-activation jet `(z0, z1, z2)`, `s = 1 - tanh(z0)^2` and `s' = -2 tanh(z0) s`:
//!
//! ```text
//! h0 = tanh(z0)
//! h1 = s z1
//! h2 = s z2 + s' z1^2
//! ```
//!
//! and the reverse pass uses `s'' = -2 s^2 - 2 tanh(z0) s'`.

use serde::{Deserialize, Serialize};

use super::{LayerSlot, MlpConfig};
use crate::autodiff::Block;

/// Highest time derivative a batch pass computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JetOrder {
    Zeroth,
    First,
    Second,
}

impl JetOrder {
    pub fn channels(self) -> usize {
        match self {
            JetOrder::Zeroth => 1,
            JetOrder::First => 2,
            JetOrder::Second => 3,
        }
    }

    pub fn from_derivative(order: usize) -> Self {
        match order {
            0 => JetOrder::Zeroth,
            1 => JetOrder::First,
            _ => JetOrder::Second,
        }
    }
}

struct TanhCache {
    s: Vec<f64>,
    ds: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

/// Forward state of one batched pass, kept for the reverse sweep.
pub(crate) struct JetPass {
    layers: Vec<LayerSlot>,
    scale: f64,
    n: usize,
    np: usize,
    channels: usize,
    // inputs[l][k]: input of layer l, channel k, fan_in x np
    inputs: Vec<Vec<Vec<f64>>>,
    hidden: Vec<TanhCache>,
    out: Vec<Vec<f64>>,
}

impl JetPass {
    pub(crate) fn forward(params: &[f64], config: &MlpConfig, times: &[f64], order: JetOrder) -> Self {
        let layers = config.layers();
        let n = times.len();
        let np = padded(n);
        let channels = order.channels();
        let (shift, gain) = config.input_map();
        let mut t: Vec<f64> = times.iter().map(|t| (t - shift) * gain).collect();
        t.resize(np, 0.0);
        let mut first = vec![t];
        if channels > 1 {
            first.push(vec![gain; np]);
        }
        if channels > 2 {
            first.push(vec![0.0; np]);
        }
        let mut inputs = vec![first];
        let mut hidden = Vec::with_capacity(layers.len() - 1);
        let mut out = Vec::new();
        for (l, slot) in layers.iter().enumerate() {
            let w = &params[slot.weights..slot.biases];
            let b = &params[slot.biases..slot.end()];
            let z: Vec<Vec<f64>> = inputs[l]
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let mut z = vec![0.0; slot.fan_out * np];
                    linear(w, (k == 0).then_some(b), a, slot.fan_in, np, &mut z);
                    z
                })
                .collect();
            if l + 1 == layers.len() {
                let scale = config.output_factor();
                out = z;
                if scale != 1.0 {
                    out.iter_mut().flatten().for_each(|v| *v *= scale);
                }
                break;
            }
            let mut z = z.into_iter();
            let z0 = z.next().expect("value channel");
            let z1 = z.next().unwrap_or_default();
            let z2 = z.next().unwrap_or_default();
            let mut h0 = vec![0.0; z0.len()];
            tanh_slice(&z0, &mut h0);
            let s: Vec<f64> = h0.iter().map(|h| 1.0 - h * h).collect();
            let mut next = Vec::with_capacity(channels);
            let mut ds = Vec::new();
            if channels > 1 {
                next.push(s.iter().zip(&z1).map(|(s, z)| s * z).collect());
            }
            if channels > 2 {
                ds = h0.iter().zip(&s).map(|(h, s)| -2.0 * h * s).collect();
                next.push(
                    s.iter()
                        .zip(&ds)
                        .zip(z1.iter().zip(&z2))
                        .map(|((s, ds), (z1, z2))| s * z2 + ds * z1 * z1)
                        .collect(),
                );
            }
            next.insert(0, h0);
            inputs.push(next);
            hidden.push(TanhCache { s, ds, z1, z2 });
        }
        Self { layers, scale: config.output_factor(), n, np, channels, inputs, hidden, out }
    }

    /// Output coefficients interleaved per point: `[u0(t0), u1(t0), .., u0(t1), ..]`.
    pub(crate) fn outputs(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n * self.channels);
        for p in 0..self.n {
            for k in 0..self.channels {
                v.push(self.out[k][p]);
            }
        }
        v
    }
}

impl Block for JetPass {
    fn backward(&self, params: &[f64], output_adjoints: &[f64], grad: &mut [f64]) {
        let np = self.np;
        let ch = self.channels;
        // padding columns carry zero adjoint and so contribute nothing
        let mut d: Vec<Vec<f64>> = (0..ch)
            .map(|k| {
                let mut col: Vec<f64> = (0..self.n).map(|p| output_adjoints[p * ch + k] * self.scale).collect();
                col.resize(np, 0.0);
                col
            })
            .collect();
        for l in (0..self.layers.len()).rev() {
            let slot = self.layers[l];
            if l + 1 < self.layers.len() {
                d = tanh_backward(&self.hidden[l], &self.inputs[l + 1][0], d);
            }
            let w = &params[slot.weights..slot.biases];
            let (dw, db) = grad[slot.weights..slot.end()].split_at_mut(slot.fan_in * slot.fan_out);
            for (k, dz) in d.iter().enumerate() {
                accumulate_weight_grad(dz, &self.inputs[l][k], slot.fan_in, slot.fan_out, np, dw);
            }
            for (j, b) in db.iter_mut().enumerate() {
                *b += d[0][j * np..(j + 1) * np].iter().sum::<f64>();
            }
            if l > 0 {
                d = d
                    .iter()
                    .map(|dz| {
                        let mut da = vec![0.0; slot.fan_in * np];
                        transpose_apply(w, dz, slot.fan_in, slot.fan_out, np, &mut da);
                        da
                    })
                    .collect();
            }
        }
    }
}

fn tanh_backward(cache: &TanhCache, h0: &[f64], mut dh: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let ch = dh.len();
    let s = &cache.s;
    if ch == 1 {
        for (g, s) in dh[0].iter_mut().zip(s) {
            *g *= s;
        }
        return dh;
    }
    let z1 = &cache.z1;
    if ch == 2 {
        // h1 = s z1 with s' = -2 h0 s
        let (d0, d1) = dh.split_at_mut(1);
        for i in 0..s.len() {
            let ds = -2.0 * h0[i] * s[i];
            d0[0][i] = d0[0][i] * s[i] + d1[0][i] * ds * z1[i];
            d1[0][i] *= s[i];
        }
        return dh;
    }
    let ds = &cache.ds;
    let z2 = &cache.z2;
    let (d0, rest) = dh.split_at_mut(1);
    let (d1, d2) = rest.split_at_mut(1);
    let (d0, d1, d2) = (&mut d0[0], &mut d1[0], &mut d2[0]);
    for i in 0..s.len() {
        let d2s = -2.0 * s[i] * s[i] - 2.0 * h0[i] * ds[i];
        let g0 = d0[i];
        let g1 = d1[i];
        let g2 = d2[i];
        d0[i] = g0 * s[i] + g1 * ds[i] * z1[i] + g2 * (ds[i] * z2[i] + d2s * z1[i] * z1[i]);
        d1[i] = g1 * s[i] + g2 * 2.0 * ds[i] * z1[i];
        d2[i] = g2 * s[i];
    }
    dh
}

/// Column block width; matrices are padded to a multiple of it.
pub(crate) const LANES: usize = 8;

pub(crate) fn padded(n: usize) -> usize {
    n.div_ceil(LANES) * LANES
}

/// `z = W a (+ b)` with `W` row-major `fan_out x fan_in`, `a` row-major `fan_in x np`.
fn linear(w: &[f64], b: Option<&[f64]>, a: &[f64], fan_in: usize, np: usize, z: &mut [f64]) {
    let fan_out = z.len() / np;
    let beta = match b {
        Some(b) => {
            for (zrow, &bj) in z.chunks_exact_mut(np).zip(b) {
                zrow.fill(bj);
            }
            1.0
        }
        None => 0.0,
    };
    gemm(fan_out, fan_in, np, w, (fan_in, 1), a, (np, 1), beta, z, np);
}

/// `da = W^T dz`.
fn transpose_apply(w: &[f64], dz: &[f64], fan_in: usize, fan_out: usize, np: usize, da: &mut [f64]) {
    gemm(fan_in, fan_out, np, w, (1, fan_in), dz, (np, 1), 0.0, da, np);
}

/// `dW += dz a^T`.
fn accumulate_weight_grad(dz: &[f64], a: &[f64], fan_in: usize, fan_out: usize, np: usize, dw: &mut [f64]) {
    gemm(fan_out, np, fan_in, dz, (np, 1), a, (1, np), 1.0, dw, fan_in);
}

/// `c = lhs * rhs + beta * c` for `m x k` times `k x n`, with (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    lhs: &[f64],
    lhs_stride: (usize, usize),
    rhs: &[f64],
    rhs_stride: (usize, usize),
    beta: f64,
    c: &mut [f64],
    c_row_stride: usize,
) {
    assert!(lhs.len() >= m * k && rhs.len() >= k * n && c.len() >= m * n);
    // SAFETY: the strides describe views that stay inside the asserted lengths.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            lhs.as_ptr(),
            lhs_stride.0 as isize,
            lhs_stride.1 as isize,
            rhs.as_ptr(),
            rhs_stride.0 as isize,
            rhs_stride.1 as isize,
            beta,
            c.as_mut_ptr(),
            c_row_stride as isize,
            1,
        );
    }
}

/// Elementwise tanh, branch-free so the loop vectorises.
///
/// Uses `tanh|x| = (1 - e) / (1 + e)` with `e = exp(-2|x|)` and a degree-13
/// Taylor polynomial for `exp` after reduction by powers of two. Absolute error
/// stays within a few ulps of 1.
pub(crate) fn tanh_slice(x: &[f64], out: &mut [f64]) {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const ROUND: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
                                                // 1/k! for k = 13 down to 0
    const C: [f64; 14] = [
        1.0 / 6_227_020_800.0,
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ];
    for (o, &v) in out.iter_mut().zip(x) {
        let a = (-2.0 * v.abs()).max(-60.0);
        let k = (a * std::f64::consts::LOG2_E + ROUND) - ROUND;
        let r = (a - k * LN2_HI) - k * LN2_LO;
        let mut p = C[0];
        for c in &C[1..] {
            p = p * r + c;
        }
        let scale = f64::from_bits(((k as i64 + 1023) as u64) << 52);
        let e = p * scale;
        *o = ((1.0 - e) / (1.0 + e)).copysign(v);
    }
}
