//! Forward recurrence and backpropagation through time.

use crate::error::{Error, Result};
use crate::nn::params::{Gate, LstmParams};
use crate::types::BlockageSequence;

/// Probability floor used by the loss so `-ln 0` never happens.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pre-activations `b + W_x x + W_h h` for all four gates.
fn gate_preactivations(x: f64, h: &[f64], params: &LstmParams, z: &mut [f64]) {
    let hidden = params.hidden();
    z.copy_from_slice(&params.gate_biases);
    if x != 0.0 {
        for (zr, wx) in z.iter_mut().zip(&params.input_weights) {
            *zr += wx * x;
        }
    }
    for (zr, row) in z.iter_mut().zip(params.recurrent_weights.chunks_exact(hidden)) {
        let mut acc = 0.0;
        for (w, hv) in row.iter().zip(h) {
            acc += w * hv;
        }
        *zr += acc;
    }
}

/// Applies gate nonlinearities in place and reports the first non-finite gate.
fn activate(z: &mut [f64], hidden: usize) -> Result<()> {
    for (r, v) in z.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(Gate::from_row(r, hidden).name().into()));
        }
        *v = if r / hidden == Gate::Cell as usize {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
    Ok(())
}

/// One LSTM step: returns the next hidden and cell state.
pub fn lstm_step(x: f64, h: &[f64], c: &[f64], params: &LstmParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = params.hidden();
    if h.len() != hidden || c.len() != hidden {
        return Err(Error::LengthMismatch {
            expected: hidden,
            actual: h.len().max(c.len()),
        });
    }
    let mut z = vec![0.0; 4 * hidden];
    gate_preactivations(x, h, params, &mut z);
    activate(&mut z, hidden)?;
    let (i, rest) = z.split_at(hidden);
    let (f, rest) = rest.split_at(hidden);
    let (g, o) = rest.split_at(hidden);
    let mut c_next = vec![0.0; hidden];
    let mut h_next = vec![0.0; hidden];
    for u in 0..hidden {
        c_next[u] = f[u] * c[u] + i[u] * g[u];
        h_next[u] = o[u] * c_next[u].tanh();
    }
    if let Some(u) = c_next.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cell state unit {u}")));
    }
    Ok((h_next, c_next))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln p[label]`, with `p` floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    hidden: usize,
    inputs: Vec<f64>,
    /// Activated gates per step, `w x 4H`.
    gates: Vec<f64>,
    /// Cell states, `(w+1) x H`; row 0 is the zero initial state.
    cells: Vec<f64>,
    /// `tanh` of the cell states, same layout as `cells`.
    cells_tanh: Vec<f64>,
    /// Hidden states, same layout as `cells`.
    hiddens: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardCache {
    pub fn final_hidden(&self) -> &[f64] {
        let t = self.inputs.len();
        &self.hiddens[t * self.hidden..(t + 1) * self.hidden]
    }
}

fn inputs_of(sequence: &BlockageSequence) -> Vec<f64> {
    sequence
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect()
}

/// Runs the network over a raw input stream, keeping intermediate states.
pub fn forward_inputs(inputs: &[f64], params: &LstmParams) -> Result<ForwardCache> {
    let hidden = params.hidden();
    let steps = inputs.len();
    if steps == 0 {
        return Err(Error::LengthMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let mut cache = ForwardCache {
        hidden,
        inputs: inputs.to_vec(),
        gates: vec![0.0; steps * 4 * hidden],
        cells: vec![0.0; (steps + 1) * hidden],
        cells_tanh: vec![0.0; (steps + 1) * hidden],
        hiddens: vec![0.0; (steps + 1) * hidden],
        probs: Vec::new(),
    };
    for (t, &x) in inputs.iter().enumerate() {
        let (h_prev, h_rest) = cache.hiddens.split_at_mut((t + 1) * hidden);
        let h_prev = &h_prev[t * hidden..];
        let z = &mut cache.gates[t * 4 * hidden..(t + 1) * 4 * hidden];
        gate_preactivations(x, h_prev, params, z);
        activate(z, hidden)?;
        let (c_prev, c_rest) = cache.cells.split_at_mut((t + 1) * hidden);
        let c_prev = &c_prev[t * hidden..];
        let c_next = &mut c_rest[..hidden];
        let tanh_next = &mut cache.cells_tanh[(t + 1) * hidden..(t + 2) * hidden];
        let h_next = &mut h_rest[..hidden];
        for u in 0..hidden {
            let (i, f, g, o) = (z[u], z[hidden + u], z[2 * hidden + u], z[3 * hidden + u]);
            let c = f * c_prev[u] + i * g;
            c_next[u] = c;
            tanh_next[u] = c.tanh();
            h_next[u] = o * tanh_next[u];
        }
    }
    let h_last = cache.final_hidden();
    let logits: Vec<f64> = params
        .dense_weights
        .chunks_exact(hidden)
        .zip(&params.dense_bias)
        .map(|(row, b)| b + row.iter().zip(h_last).map(|(w, h)| w * h).sum::<f64>())
        .collect();
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("dense layer output".into()));
    }
    cache.probs = softmax(&logits);
    Ok(cache)
}

/// Class probabilities for one sequence, starting from zero state.
pub fn forward(sequence: &BlockageSequence, params: &LstmParams) -> Result<Vec<f64>> {
    Ok(forward_inputs(&inputs_of(sequence), params)?.probs)
}

/// Forward pass retaining the cache needed by [`backward_into`].
pub fn forward_cached(sequence: &BlockageSequence, params: &LstmParams) -> Result<ForwardCache> {
    forward_inputs(&inputs_of(sequence), params)
}

/// Accumulates `scale * d loss / d params` into `grads` by reverse-mode
/// accumulation over every step. Returns the loss.
pub fn backward_into(
    cache: &ForwardCache,
    label: usize,
    params: &LstmParams,
    grads: &mut LstmParams,
    scale: f64,
) -> Result<f64> {
    let hidden = params.hidden();
    let classes = params.classes();
    let loss = cross_entropy(&cache.probs, label)?;

    let mut dlogits = cache.probs.clone();
    dlogits[label] -= 1.0;
    for d in &mut dlogits {
        *d *= scale;
    }

    let h_last = cache.final_hidden();
    let mut dh = vec![0.0; hidden];
    for k in 0..classes {
        let dk = dlogits[k];
        grads.dense_bias[k] += dk;
        let row = &params.dense_weights[k * hidden..(k + 1) * hidden];
        let grow = &mut grads.dense_weights[k * hidden..(k + 1) * hidden];
        for u in 0..hidden {
            grow[u] += dk * h_last[u];
            dh[u] += dk * row[u];
        }
    }

    let mut dc = vec![0.0; hidden];
    let mut dz = vec![0.0; 4 * hidden];
    let mut dh_prev = vec![0.0; hidden];
    for t in (0..cache.inputs.len()).rev() {
        let gates = &cache.gates[t * 4 * hidden..(t + 1) * 4 * hidden];
        let c_prev = &cache.cells[t * hidden..(t + 1) * hidden];
        let tanh_c = &cache.cells_tanh[(t + 1) * hidden..(t + 2) * hidden];
        let h_prev = &cache.hiddens[t * hidden..(t + 1) * hidden];
        for u in 0..hidden {
            let (i, f, g, o) = (
                gates[u],
                gates[hidden + u],
                gates[2 * hidden + u],
                gates[3 * hidden + u],
            );
            let do_ = dh[u] * tanh_c[u];
            let dcu = dc[u] + dh[u] * o * (1.0 - tanh_c[u] * tanh_c[u]);
            dz[u] = dcu * g * i * (1.0 - i);
            dz[hidden + u] = dcu * c_prev[u] * f * (1.0 - f);
            dz[2 * hidden + u] = dcu * i * (1.0 - g * g);
            dz[3 * hidden + u] = do_ * o * (1.0 - o);
            dc[u] = dcu * f;
        }

        let x = cache.inputs[t];
        for (gb, d) in grads.gate_biases.iter_mut().zip(&dz) {
            *gb += d;
        }
        if x != 0.0 {
            for (gw, d) in grads.input_weights.iter_mut().zip(&dz) {
                *gw += d * x;
            }
        }
        dh_prev.fill(0.0);
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &params.recurrent_weights[r * hidden..(r + 1) * hidden];
            let grow = &mut grads.recurrent_weights[r * hidden..(r + 1) * hidden];
            for u in 0..hidden {
                grow[u] += d * h_prev[u];
                dh_prev[u] += d * row[u];
            }
        }
        std::mem::swap(&mut dh, &mut dh_prev);
    }

    if dh.iter().chain(&dc).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(loss)
}

/// Gradient of the cross-entropy loss for one labeled sequence.
pub fn backward(sequence: &BlockageSequence, label: usize, params: &LstmParams) -> Result<LstmParams> {
    let cache = forward_cached(sequence, params)?;
    let mut grads = LstmParams::zeros(params.arch());
    backward_into(&cache, label, params, &mut grads, 1.0)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Architecture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arch(h: usize, k: usize) -> Architecture {
        Architecture::new(h, k).unwrap()
    }

    fn random_params(h: usize, k: usize, seed: u64) -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::zeros(arch(h, k));
        for v in p.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
        p
    }

    fn random_sequence(w: usize, seed: u64) -> BlockageSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BlockageSequence::from_bits((0..w).map(|_| rng.random_bool(0.3)).collect(), 1.0)
    }

    #[test]
    fn zero_params_step() {
        let p = LstmParams::zeros(arch(3, 2));
        let (h, c) = lstm_step(0.0, &[0.0; 3], &[0.0; 3], &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut p = LstmParams::zeros(arch(2, 2));
        let h = 2;
        p.gate_biases[h..2 * h].fill(50.0); // forget -> 1
        p.gate_biases[..h].fill(-50.0); // input -> 0
        let c = [0.7, -1.3];
        let (_, c_next) = lstm_step(1.0, &[0.2, -0.4], &c, &p).unwrap();
        for (a, b) in c_next.iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_matches_scalar_reference() {
        let p = random_params(5, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (h1, c1) = lstm_step(1.0, &h, &c, &p).unwrap();

        let hd = 5;
        let gate = |g: usize, u: usize| {
            let r = g * hd + u;
            let mut s = p.gate_biases[r] + p.input_weights[r];
            for j in 0..hd {
                s += p.recurrent_weights[r * hd + j] * h[j];
            }
            s
        };
        for u in 0..hd {
            let i = 1.0 / (1.0 + (-gate(0, u)).exp());
            let f = 1.0 / (1.0 + (-gate(1, u)).exp());
            let g = gate(2, u).tanh();
            let o = 1.0 / (1.0 + (-gate(3, u)).exp());
            let cn = f * c[u] + i * g;
            assert!((c1[u] - cn).abs() < 1e-12);
            assert!((h1[u] - o * cn.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gate_named() {
        let mut p = LstmParams::zeros(arch(2, 2));
        p.gate_biases[2 * 2] = f64::NAN;
        let err = lstm_step(0.0, &[0.0; 2], &[0.0; 2], &p).unwrap_err();
        assert!(err.to_string().contains("cell candidate"), "{err}");
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let p = LstmParams::zeros(arch(4, 5));
        let probs = forward(&random_sequence(20, 1), &p).unwrap();
        for q in probs {
            assert!((q - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn outputs_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..1000 {
            let h = rng.random_range(1..6);
            let k = rng.random_range(2..7);
            let w = rng.random_range(1..25);
            let p = random_params(h, k, trial);
            let probs = forward(&random_sequence(w, trial + 5000), &p).unwrap();
            assert!(probs.iter().all(|&q| q >= 0.0));
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_examples() {
        let u = vec![0.25; 4];
        assert!((cross_entropy(&u, 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        let l = cross_entropy(&[0.7, 0.2, 0.1], 1).unwrap();
        assert!((l - 1.6094379124341003).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 0.0], 1).unwrap() + PROB_FLOOR.ln()).abs() < 1e-12);
        assert!(matches!(
            cross_entropy(&u, 4),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn dense_bias_gradient_is_softmax_minus_onehot() {
        let mut p = LstmParams::zeros(arch(4, 3));
        p.dense_bias.copy_from_slice(&[0.3, -0.2, 0.5]);
        let s = BlockageSequence::zeros(10, 1.0);
        let probs = forward(&s, &p).unwrap();
        let g = backward(&s, 1, &p).unwrap();
        for k in 0..3 {
            let expect = probs[k] - if k == 1 { 1.0 } else { 0.0 };
            assert!((g.dense_bias[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn unused_class_row_scales_with_its_probability() {
        let p = random_params(4, 3, 21);
        let s = random_sequence(12, 4);
        let cache = forward_cached(&s, &p).unwrap();
        let g = backward(&s, 0, &p).unwrap();
        let h = cache.final_hidden();
        for k in 1..3 {
            assert!(g.dense_bias[k] > 0.0);
            for u in 0..4 {
                assert!((g.dense_weights[k * 4 + u] - cache.probs[k] * h[u]).abs() < 1e-14);
            }
        }
    }

    fn loss_at(p: &LstmParams, s: &BlockageSequence, label: usize) -> f64 {
        cross_entropy(&forward(s, p).unwrap(), label).unwrap()
    }

    /// Central differences against the analytic gradient for every entry.
    fn check_gradient(h: usize, k: usize, w: usize, seed: u64) {
        let p = random_params(h, k, seed);
        let s = random_sequence(w, seed ^ 0xabcd);
        let label = (seed as usize) % k;
        let g = backward(&s, label, &p).unwrap();
        let step = 1e-5;
        for (ti, (grad_t, len)) in g
            .tensors()
            .iter()
            .map(|t| (t.to_vec(), t.len()))
            .enumerate()
        {
            for j in 0..len {
                let mut plus = p.clone();
                plus.tensors_mut()[ti][j] += step;
                let mut minus = p.clone();
                minus.tensors_mut()[ti][j] -= step;
                let fd = (loss_at(&plus, &s, label) - loss_at(&minus, &s, label)) / (2.0 * step);
                let denom = grad_t[j].abs().max(fd.abs()).max(1e-6);
                let rel = (grad_t[j] - fd).abs() / denom;
                assert!(
                    rel < 1e-4,
                    "{}[{j}]: analytic {} vs numeric {fd}",
                    LstmParams::NAMES[ti],
                    grad_t[j]
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(8, 4, 20, 1);
        check_gradient(3, 2, 5, 2);
    }
}
