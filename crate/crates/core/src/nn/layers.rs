//! Layer kernels. The batched `*_fwd`/`*_bwd` pairs operate on a leading
//! batch dimension and are what [`super::Network`] uses; the `pub` functions
//! without a suffix are single-sample conveniences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Tensor};
use super::NnError;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), NnError> {
    if cond {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch(msg()))
    }
}

/// Element-wise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    pub(crate) fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------- dense

/// `x: [B, n]`, `w: [m, n]`, `b: [m]` → `[B, m]`.
pub(crate) fn dense_fwd(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    let (m, n) = (w.shape()[0], w.shape()[1]);
    let batch = x.batch();
    check(x.row_len() == n, || format!("dense expects {n} inputs, got {}", x.row_len()))?;
    check(b.len() == m, || format!("dense bias has {} values, expected {m}", b.len()))?;
    let mut out = Tensor::zeros(&[batch, m]);
    for row in out.data_mut().chunks_mut(m) {
        row.copy_from_slice(b.data());
    }
    gemm(batch, n, m, x.data(), false, w.data(), true, out.data_mut(), 1.0);
    Ok(out)
}

/// Returns `(dx, dw, db)`.
pub(crate) fn dense_bwd(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (m, n) = (w.shape()[0], w.shape()[1]);
    let batch = x.batch();
    let mut dx = Tensor::zeros(&[batch, n]);
    gemm(batch, m, n, dy.data(), false, w.data(), false, dx.data_mut(), 0.0);
    let mut dw = Tensor::zeros(&[m, n]);
    gemm(m, batch, n, dy.data(), true, x.data(), false, dw.data_mut(), 0.0);
    let mut db = Tensor::zeros(&[m]);
    for row in dy.data().chunks(m) {
        for (acc, v) in db.data_mut().iter_mut().zip(row) {
            *acc += v;
        }
    }
    (dx.reshape(x.shape()).expect("same size"), dw, db)
}

/// `weights · input + bias` for a single vector.
pub fn dense_forward(input: &[f64], weights: &Tensor, bias: &Tensor) -> Result<Vec<f64>, NnError> {
    check(weights.shape().len() == 2, || "dense weights must be 2-D".into())?;
    let x = Tensor::from_vec(&[1, input.len()], input.to_vec())?;
    Ok(dense_fwd(&x, weights, bias)?.into_data())
}

// ---------------------------------------------------------------- conv1d

/// Valid stride-1 cross-correlation. `x: [B, C_in, L]`, `w: [C_out, C_in, k]`,
/// `b: [C_out]` → `[B, C_out, L − k + 1]`.
pub(crate) fn conv1d_fwd(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    check(w.shape().len() == 3, || "conv1d weights must be 3-D".into())?;
    let (cout, cin, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    check(x.shape().len() == 3 && x.shape()[1] == cin, || {
        format!("conv1d expects input [B, {cin}, L], got {:?}", x.shape())
    })?;
    let (batch, len) = (x.shape()[0], x.shape()[2]);
    check(k >= 1 && len >= k, || format!("conv1d kernel {k} longer than input length {len}"))?;
    check(b.len() == cout, || format!("conv1d bias has {} values, expected {cout}", b.len()))?;
    let lo = len - k + 1;
    let mut out = Tensor::zeros(&[batch, cout, lo]);
    let (xd, wd) = (x.data(), w.data());
    let od = out.data_mut();
    for bi in 0..batch {
        for o in 0..cout {
            for p in 0..lo {
                let mut acc = b.data()[o];
                for c in 0..cin {
                    let xrow = &xd[(bi * cin + c) * len + p..];
                    let wrow = &wd[(o * cin + c) * k..(o * cin + c + 1) * k];
                    for j in 0..k {
                        acc += wrow[j] * xrow[j];
                    }
                }
                od[(bi * cout + o) * lo + p] = acc;
            }
        }
    }
    Ok(out)
}

pub(crate) fn conv1d_bwd(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (cout, cin, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let (batch, len) = (x.shape()[0], x.shape()[2]);
    let lo = len - k + 1;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[cout]);
    let (xd, wd, dyd) = (x.data(), w.data(), dy.data());
    for bi in 0..batch {
        for o in 0..cout {
            for p in 0..lo {
                let g = dyd[(bi * cout + o) * lo + p];
                db.data_mut()[o] += g;
                for c in 0..cin {
                    for j in 0..k {
                        let xi = (bi * cin + c) * len + p + j;
                        let wi = (o * cin + c) * k + j;
                        dw.data_mut()[wi] += g * xd[xi];
                        dx.data_mut()[xi] += g * wd[wi];
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Single-sample convolution: `input: [C_in, L]` → `[C_out, L − k + 1]`.
pub fn conv1d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    check(input.shape().len() == 2, || "conv1d input must be [C_in, L]".into())?;
    let mut shape = vec![1];
    shape.extend_from_slice(input.shape());
    let out = conv1d_fwd(&input.clone().reshape(&shape)?, weights, bias)?;
    let s = out.shape()[1..].to_vec();
    out.reshape(&s)
}

// ---------------------------------------------------------------- lstm

/// Parameters of a single-layer LSTM with gate blocks ordered
/// input, forget, cell candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    /// `[4H, d]`
    pub w_ih: &'a Tensor,
    /// `[4H, H]`
    pub w_hh: &'a Tensor,
    /// `[4H]`
    pub bias: &'a Tensor,
}

impl LstmParams<'_> {
    fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    fn inputs(&self) -> usize {
        self.w_ih.shape()[1]
    }
}

pub(crate) struct LstmStep {
    h_prev: Tensor,
    c_prev: Tensor,
    /// Activated gates `[B, 4H]`.
    gates: Tensor,
    tanh_c: Tensor,
}

pub(crate) struct LstmCache {
    input: Tensor,
    steps: Vec<LstmStep>,
}

/// `x: [B, T, d]` → final hidden state `[B, H]`. Initial states are zero.
pub(crate) fn lstm_fwd(x: &Tensor, p: LstmParams<'_>) -> Result<(Tensor, LstmCache), NnError> {
    let (h, d) = (p.hidden(), p.inputs());
    check(p.w_ih.shape() == [4 * h, d], || "lstm input weights must be [4H, d]".into())?;
    check(p.w_hh.shape() == [4 * h, h], || "lstm recurrent weights must be [4H, H]".into())?;
    check(p.bias.len() == 4 * h, || "lstm bias must have 4H values".into())?;
    let batch = x.batch();
    check(x.row_len().is_multiple_of(d) && x.row_len() > 0, || {
        format!("lstm expects a non-empty sequence of {d}-vectors, got {:?}", x.shape())
    })?;
    let steps = x.row_len() / d;
    let mut h_prev = Tensor::zeros(&[batch, h]);
    let mut c_prev = Tensor::zeros(&[batch, h]);
    let mut cache = Vec::with_capacity(steps);
    let mut xt = vec![0.0; batch * d];
    for t in 0..steps {
        for bi in 0..batch {
            xt[bi * d..(bi + 1) * d].copy_from_slice(&x.row(bi)[t * d..(t + 1) * d]);
        }
        let mut z = Tensor::zeros(&[batch, 4 * h]);
        for row in z.data_mut().chunks_mut(4 * h) {
            row.copy_from_slice(p.bias.data());
        }
        gemm(batch, d, 4 * h, &xt, false, p.w_ih.data(), true, z.data_mut(), 1.0);
        if t > 0 {
            gemm(batch, h, 4 * h, h_prev.data(), false, p.w_hh.data(), true, z.data_mut(), 1.0);
        }
        let mut c = Tensor::zeros(&[batch, h]);
        let mut tanh_c = Tensor::zeros(&[batch, h]);
        let mut h_next = Tensor::zeros(&[batch, h]);
        for bi in 0..batch {
            let zr = &mut z.data_mut()[bi * 4 * h..(bi + 1) * 4 * h];
            let (ig, rest) = zr.split_at_mut(h);
            let (fg, rest) = rest.split_at_mut(h);
            let (gg, og) = rest.split_at_mut(h);
            for j in 0..h {
                ig[j] = sigmoid(ig[j]);
                fg[j] = sigmoid(fg[j]);
                gg[j] = gg[j].tanh();
                og[j] = sigmoid(og[j]);
                let cj = fg[j] * c_prev.data()[bi * h + j] + ig[j] * gg[j];
                let tc = cj.tanh();
                c.data_mut()[bi * h + j] = cj;
                tanh_c.data_mut()[bi * h + j] = tc;
                h_next.data_mut()[bi * h + j] = og[j] * tc;
            }
        }
        cache.push(LstmStep {
            h_prev: std::mem::replace(&mut h_prev, h_next),
            c_prev: std::mem::replace(&mut c_prev, c),
            gates: z,
            tanh_c,
        });
    }
    Ok((
        h_prev,
        LstmCache {
            input: x.clone(),
            steps: cache,
        },
    ))
}

/// Backpropagation through time. Returns `(dx, dw_ih, dw_hh, dbias)`.
pub(crate) fn lstm_bwd(cache: &LstmCache, p: LstmParams<'_>, dh_last: &Tensor) -> (Tensor, Tensor, Tensor, Tensor) {
    let (h, d) = (p.hidden(), p.inputs());
    let x = &cache.input;
    let batch = x.batch();
    let mut dx = Tensor::zeros(x.shape());
    let mut dw_ih = Tensor::zeros(p.w_ih.shape());
    let mut dw_hh = Tensor::zeros(p.w_hh.shape());
    // recurrent-weight gradient is accumulated once over all steps t ≥ 1
    let recurrent = cache.steps.len().saturating_sub(1) * batch;
    let mut dz_hist = vec![0.0; recurrent * 4 * h];
    let mut h_hist = vec![0.0; recurrent * h];
    let mut db = Tensor::zeros(&[4 * h]);
    let mut dh = dh_last.data().to_vec();
    let mut dc = vec![0.0; batch * h];
    let mut dz = vec![0.0; batch * 4 * h];
    let mut xt = vec![0.0; batch * d];
    let mut dxt = vec![0.0; batch * d];
    for (t, step) in cache.steps.iter().enumerate().rev() {
        for bi in 0..batch {
            let g = &step.gates.data()[bi * 4 * h..(bi + 1) * 4 * h];
            let dzr = &mut dz[bi * 4 * h..(bi + 1) * 4 * h];
            for j in 0..h {
                let k = bi * h + j;
                let (i, f, gc, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = step.tanh_c.data()[k];
                let d_o = dh[k] * tc;
                let dcell = dc[k] + dh[k] * o * (1.0 - tc * tc);
                dzr[j] = dcell * gc * i * (1.0 - i);
                dzr[h + j] = dcell * step.c_prev.data()[k] * f * (1.0 - f);
                dzr[2 * h + j] = dcell * i * (1.0 - gc * gc);
                dzr[3 * h + j] = d_o * o * (1.0 - o);
                dc[k] = dcell * f;
            }
        }
        for row in dz.chunks(4 * h) {
            for (acc, v) in db.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        for bi in 0..batch {
            xt[bi * d..(bi + 1) * d].copy_from_slice(&x.row(bi)[t * d..(t + 1) * d]);
        }
        gemm(4 * h, batch, d, &dz, true, &xt, false, dw_ih.data_mut(), 1.0);
        gemm(batch, 4 * h, d, &dz, false, p.w_ih.data(), false, &mut dxt, 0.0);
        for bi in 0..batch {
            dx.data_mut()[bi * x.row_len() + t * d..bi * x.row_len() + (t + 1) * d]
                .copy_from_slice(&dxt[bi * d..(bi + 1) * d]);
        }
        if t > 0 {
            let off = (t - 1) * batch;
            dz_hist[off * 4 * h..(off + batch) * 4 * h].copy_from_slice(&dz);
            h_hist[off * h..(off + batch) * h].copy_from_slice(step.h_prev.data());
            gemm(batch, 4 * h, h, &dz, false, p.w_hh.data(), false, &mut dh, 0.0);
        }
    }
    if recurrent > 0 {
        gemm(4 * h, recurrent, h, &dz_hist, true, &h_hist, false, dw_hh.data_mut(), 0.0);
    }
    (dx, dw_ih, dw_hh, db)
}

/// Runs a single sequence `inputs: [T, d]` and returns the final hidden state.
pub fn lstm_forward(inputs: &Tensor, params: LstmParams<'_>) -> Result<Vec<f64>, NnError> {
    check(inputs.shape().len() == 2 && inputs.shape()[0] > 0, || {
        "lstm input must be a non-empty [T, d] sequence".into()
    })?;
    let mut shape = vec![1];
    shape.extend_from_slice(inputs.shape());
    let (h, _) = lstm_fwd(&inputs.clone().reshape(&shape)?, params)?;
    Ok(h.into_data())
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout scale factors (`0` or `1/(1−rate)`) for `n` elements.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout; the identity outside training mode or at `rate = 0`.
pub fn dropout<R: Rng + ?Sized>(input: &Tensor, rate: f64, training: bool, rng: &mut R) -> Tensor {
    if !training || rate == 0.0 {
        return input.clone();
    }
    let mask = dropout_mask(input.len(), rate, rng);
    let mut out = input.clone();
    for (v, m) in out.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    out
}
