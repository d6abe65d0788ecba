//! Small neural building blocks: linear layers, MLP heads, a one-layer
//! attention path encoder, and a two-layer convolution stack for layout
//! grids. Parameters are plain `f64` with seeded reproducible init; forward
//! passes run on the [`Tape`] so gradients are available with respect to
//! inputs (sizing) or parameters (training), depending on how they are bound.

use crate::layout::FeatureGrid;
use crate::tape::{Tape, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

fn seeded_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> f64 {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.gen_range(-s..s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// Row-major `[out][in]`.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn seeded(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: (0..n_out)
                .map(|_| (0..n_in).map(|_| seeded_uniform(rng, n_in, n_out)).collect())
                .collect(),
            b: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn n_out(&self) -> usize {
        self.w.len()
    }

    /// Bind parameters onto the tape as constants (no parameter gradients).
    pub fn on_tape(&self, tape: &mut Tape) -> LinearT {
        LinearT {
            w: self
                .w
                .iter()
                .map(|row| row.iter().map(|&v| tape.c(v)).collect())
                .collect(),
            b: self.b.iter().map(|&v| tape.c(v)).collect(),
        }
    }

    /// Bind parameters onto the tape as variables and append them to `flat`
    /// in deterministic order (training).
    pub fn vars_on_tape(&self, tape: &mut Tape, flat: &mut Vec<Var>) -> LinearT {
        let bind = |tape: &mut Tape, flat: &mut Vec<Var>, v: f64| {
            let var = tape.var(v);
            flat.push(var);
            var
        };
        LinearT {
            w: self
                .w
                .iter()
                .map(|row| row.iter().map(|&v| bind(tape, flat, v)).collect())
                .collect(),
            b: self.b.iter().map(|&v| bind(tape, flat, v)).collect(),
        }
    }

    /// Overwrite parameters from a flat slice, advancing the cursor. Inverse
    /// of the `vars_on_tape` ordering.
    pub fn load_flat(&mut self, flat: &[f64], cursor: &mut usize) {
        for row in &mut self.w {
            for v in row {
                *v = flat[*cursor];
                *cursor += 1;
            }
        }
        for v in &mut self.b {
            *v = flat[*cursor];
            *cursor += 1;
        }
    }

    pub fn store_flat(&self, flat: &mut Vec<f64>) {
        for row in &self.w {
            flat.extend_from_slice(row);
        }
        flat.extend_from_slice(&self.b);
    }
}

/// Linear layer bound to a tape.
pub struct LinearT {
    pub w: Vec<Vec<Var>>,
    pub b: Vec<Var>,
}

impl LinearT {
    pub fn apply(&self, tape: &mut Tape, x: &[Var]) -> Vec<Var> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, &b)| {
                debug_assert_eq!(row.len(), x.len());
                let mut acc = b;
                for (&wi, &xi) in row.iter().zip(x) {
                    let t = tape.mul(wi, xi);
                    acc = tape.add(acc, t);
                }
                acc
            })
            .collect()
    }
}

/// Plain MLP: ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn seeded(dims: &[usize], rng: &mut impl Rng) -> Self {
        Mlp {
            layers: dims
                .windows(2)
                .map(|d| Linear::seeded(d[0], d[1], rng))
                .collect(),
        }
    }

    pub fn on_tape(&self, tape: &mut Tape) -> MlpT {
        MlpT {
            layers: self.layers.iter().map(|l| l.on_tape(tape)).collect(),
        }
    }

    pub fn vars_on_tape(&self, tape: &mut Tape, flat: &mut Vec<Var>) -> MlpT {
        MlpT {
            layers: self
                .layers
                .iter()
                .map(|l| l.vars_on_tape(tape, flat))
                .collect(),
        }
    }

    pub fn load_flat(&mut self, flat: &[f64], cursor: &mut usize) {
        for l in &mut self.layers {
            l.load_flat(flat, cursor);
        }
    }

    pub fn store_flat(&self, flat: &mut Vec<f64>) {
        for l in &self.layers {
            l.store_flat(flat);
        }
    }
}

pub struct MlpT {
    pub layers: Vec<LinearT>,
}

impl MlpT {
    pub fn apply(&self, tape: &mut Tape, x: &[Var]) -> Vec<Var> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(tape, &h);
            if i != last {
                h = h.iter().map(|&v| tape.relu(v)).collect();
            }
        }
        h
    }
}

/// Sinusoidal position code so the encoder distinguishes gate order along a
/// path.
pub fn positional_encoding(pos: usize, width: usize) -> Vec<f64> {
    (0..width)
        .map(|i| {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / width as f64);
            let angle = pos as f64 * rate;
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// One-layer self-attention + feedforward sequence encoder. Takes the
/// ordered gate features of one path and emits one encoding per gate. The
/// final projection has no residual, so zeroing it zeroes every encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEncoder {
    pub width: usize,
    pub w_in: Linear,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ffn1: Linear,
    pub ffn2: Linear,
    pub w_out: Linear,
}

impl PathEncoder {
    pub fn seeded(feature_dim: usize, width: usize, rng: &mut impl Rng) -> Self {
        PathEncoder {
            width,
            w_in: Linear::seeded(feature_dim, width, rng),
            wq: Linear::seeded(width, width, rng),
            wk: Linear::seeded(width, width, rng),
            wv: Linear::seeded(width, width, rng),
            wo: Linear::seeded(width, width, rng),
            ffn1: Linear::seeded(width, width, rng),
            ffn2: Linear::seeded(width, width, rng),
            w_out: Linear::seeded(width, width, rng),
        }
    }

    pub fn on_tape(&self, tape: &mut Tape) -> PathEncoderT {
        PathEncoderT {
            width: self.width,
            w_in: self.w_in.on_tape(tape),
            wq: self.wq.on_tape(tape),
            wk: self.wk.on_tape(tape),
            wv: self.wv.on_tape(tape),
            wo: self.wo.on_tape(tape),
            ffn1: self.ffn1.on_tape(tape),
            ffn2: self.ffn2.on_tape(tape),
            w_out: self.w_out.on_tape(tape),
        }
    }

    pub fn vars_on_tape(&self, tape: &mut Tape, flat: &mut Vec<Var>) -> PathEncoderT {
        PathEncoderT {
            width: self.width,
            w_in: self.w_in.vars_on_tape(tape, flat),
            wq: self.wq.vars_on_tape(tape, flat),
            wk: self.wk.vars_on_tape(tape, flat),
            wv: self.wv.vars_on_tape(tape, flat),
            wo: self.wo.vars_on_tape(tape, flat),
            ffn1: self.ffn1.vars_on_tape(tape, flat),
            ffn2: self.ffn2.vars_on_tape(tape, flat),
            w_out: self.w_out.vars_on_tape(tape, flat),
        }
    }

    pub fn load_flat(&mut self, flat: &[f64], cursor: &mut usize) {
        self.w_in.load_flat(flat, cursor);
        self.wq.load_flat(flat, cursor);
        self.wk.load_flat(flat, cursor);
        self.wv.load_flat(flat, cursor);
        self.wo.load_flat(flat, cursor);
        self.ffn1.load_flat(flat, cursor);
        self.ffn2.load_flat(flat, cursor);
        self.w_out.load_flat(flat, cursor);
    }

    pub fn store_flat(&self, flat: &mut Vec<f64>) {
        self.w_in.store_flat(flat);
        self.wq.store_flat(flat);
        self.wk.store_flat(flat);
        self.wv.store_flat(flat);
        self.wo.store_flat(flat);
        self.ffn1.store_flat(flat);
        self.ffn2.store_flat(flat);
        self.w_out.store_flat(flat);
    }
}

pub struct PathEncoderT {
    pub width: usize,
    pub w_in: LinearT,
    pub wq: LinearT,
    pub wk: LinearT,
    pub wv: LinearT,
    pub wo: LinearT,
    pub ffn1: LinearT,
    pub ffn2: LinearT,
    pub w_out: LinearT,
}

impl PathEncoderT {
    /// Encode one path; `inputs[k]` is gate k's feature vector in
    /// launch-to-capture order. Returns one width-sized encoding per gate.
    pub fn encode(&self, tape: &mut Tape, inputs: &[Vec<Var>]) -> Vec<Vec<Var>> {
        assert!(!inputs.is_empty(), "cannot encode an empty path");
        let len = inputs.len();
        let h0: Vec<Vec<Var>> = inputs
            .iter()
            .enumerate()
            .map(|(pos, x)| {
                let proj = self.w_in.apply(tape, x);
                let pe = positional_encoding(pos, self.width);
                proj.iter()
                    .zip(&pe)
                    .map(|(&v, &p)| tape.addc(v, p))
                    .collect()
            })
            .collect();

        let qs: Vec<Vec<Var>> = h0.iter().map(|h| self.wq.apply(tape, h)).collect();
        let ks: Vec<Vec<Var>> = h0.iter().map(|h| self.wk.apply(tape, h)).collect();
        let vs: Vec<Vec<Var>> = h0.iter().map(|h| self.wv.apply(tape, h)).collect();

        let scale = 1.0 / (self.width as f64).sqrt();
        let mut attended = Vec::with_capacity(len);
        for q in &qs {
            // Scores against every key, softmax-normalized with a constant
            // max shift for stability.
            let mut scores = Vec::with_capacity(len);
            for k in &ks {
                let mut acc = tape.c(0.0);
                for (&qi, &ki) in q.iter().zip(k) {
                    let t = tape.mul(qi, ki);
                    acc = tape.add(acc, t);
                }
                scores.push(tape.mulc(acc, scale));
            }
            let m = scores
                .iter()
                .map(|&s| tape.value(s))
                .fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<Var> = scores
                .iter()
                .map(|&s| {
                    let sh = tape.addc(s, -m);
                    tape.exp(sh)
                })
                .collect();
            let denom = tape.sum(&exps);
            let weights: Vec<Var> = exps.iter().map(|&e| tape.div(e, denom)).collect();
            let mut ctx = vec![tape.c(0.0); self.width];
            for (w, v) in weights.iter().zip(&vs) {
                for (c, &vi) in ctx.iter_mut().zip(v) {
                    let t = tape.mul(*w, vi);
                    *c = tape.add(*c, t);
                }
            }
            attended.push(ctx);
        }

        (0..len)
            .map(|i| {
                let o = self.wo.apply(tape, &attended[i]);
                let res1: Vec<Var> = o
                    .iter()
                    .zip(&h0[i])
                    .map(|(&a, &b)| tape.add(a, b))
                    .collect();
                let f1 = self.ffn1.apply(tape, &res1);
                let f1r: Vec<Var> = f1.iter().map(|&v| tape.relu(v)).collect();
                let f2 = self.ffn2.apply(tape, &f1r);
                let res2: Vec<Var> = f2
                    .iter()
                    .zip(&res1)
                    .map(|(&a, &b)| tape.add(a, b))
                    .collect();
                self.w_out.apply(tape, &res2)
            })
            .collect()
    }
}

/// 3x3 same-padded convolution over layout grids, plain `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    /// `[out][in][3*3]`
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<f64>,
}

impl Conv2d {
    pub fn seeded(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        Conv2d {
            w: (0..n_out)
                .map(|_| {
                    (0..n_in)
                        .map(|_| (0..9).map(|_| seeded_uniform(rng, n_in * 9, n_out * 9)).collect())
                        .collect()
                })
                .collect(),
            b: vec![0.0; n_out],
        }
    }

    pub fn apply(&self, channels: &[FeatureGrid]) -> Vec<FeatureGrid> {
        assert!(!channels.is_empty());
        let m = channels[0].m;
        self.w
            .iter()
            .zip(&self.b)
            .map(|(per_in, &bias)| {
                let mut out = FeatureGrid::zeros(m);
                for y in 0..m {
                    for x in 0..m {
                        let mut acc = bias;
                        for (cin, kernel) in channels.iter().zip(per_in) {
                            for dy in 0..3usize {
                                for dx in 0..3usize {
                                    let sy = y as isize + dy as isize - 1;
                                    let sx = x as isize + dx as isize - 1;
                                    if sy < 0 || sx < 0 || sy >= m as isize || sx >= m as isize {
                                        continue;
                                    }
                                    acc += kernel[dy * 3 + dx]
                                        * cin.at(sx as usize, sy as usize);
                                }
                            }
                        }
                        *out.at_mut(x, y) = acc;
                    }
                }
                out
            })
            .collect()
    }
}

/// Two 3x3 convolutions with a ReLU between: the logit stack producing
/// per-scale attention scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvStack {
    pub c1: Conv2d,
    pub c2: Conv2d,
}

impl ConvStack {
    pub fn seeded(n_in: usize, hidden: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        ConvStack {
            c1: Conv2d::seeded(n_in, hidden, rng),
            c2: Conv2d::seeded(hidden, n_out, rng),
        }
    }

    pub fn apply(&self, channels: &[FeatureGrid]) -> Vec<FeatureGrid> {
        let mut h = self.c1.apply(channels);
        for grid in &mut h {
            for v in grid.cells.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        self.c2.apply(&h)
    }
}
