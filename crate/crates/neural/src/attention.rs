//! Multi-head self-attention with gated geometric, scalar and topological
//! pair biases.
//!
//! Per head `h` the logits are
//! `⟨q_i, k_j⟩/√d + σ(g_h0)·G_ij + σ(g_h1)·E_ij + σ(g_h2)·T_ij` with
//! `G = geo_proj(P_i − P_j)` (or of `‖P_i − P_j‖`), `E = quant_proj(q_i − q_j)`
//! and `T = topo_proj(⟨t1_i, t1_j⟩)`. The projections are linear without
//! offsets: a per-head constant would cancel in the row softmax.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dropout::{self, DropoutKey};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamSet};
use crate::tape::{BiasTerm, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoMode {
    /// Linear map of the displacement vector; not rotation invariant.
    #[default]
    Displacement,
    /// Linear map of the pair distance.
    Distance,
}

/// Fixed pair quantities the biases are built from.
pub struct AttentionContext {
    pub n: usize,
    geo: Arc<Vec<Tensor>>,
    quant: Arc<Vec<Tensor>>,
    topo: Arc<Vec<Tensor>>,
}

impl AttentionContext {
    pub fn new(positions: &[[f64; 3]], scalars: &[f64], t1: &[[f64; 3]], mode: GeoMode) -> Result<Self> {
        let n = positions.len();
        if scalars.len() != n || t1.len() != n {
            return Err(Error::invalid(format!(
                "{n} positions but {} scalars and {} t1 vectors",
                scalars.len(),
                t1.len()
            )));
        }
        let pair = |f: &dyn Fn(usize, usize) -> f64| {
            let mut t = Tensor::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    t.data[i * n + j] = f(i, j);
                }
            }
            t
        };
        let geo = match mode {
            GeoMode::Displacement => (0..3).map(|c| pair(&|i, j| positions[i][c] - positions[j][c])).collect(),
            GeoMode::Distance => vec![pair(&|i, j| {
                (0..3)
                    .map(|c| (positions[i][c] - positions[j][c]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })],
        };
        let quant = vec![pair(&|i, j| scalars[i] - scalars[j])];
        let topo = vec![pair(&|i, j| (0..3).map(|c| t1[i][c] * t1[j][c]).sum())];
        Ok(AttentionContext {
            n,
            geo: Arc::new(geo),
            quant: Arc::new(quant),
            topo: Arc::new(topo),
        })
    }
}

/// Layout and hyperparameters of one block; weights live in a [`ParamSet`]
/// under `{prefix}.*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBlock {
    pub prefix: String,
    pub width: usize,
    pub heads: usize,
    pub geo_mode: GeoMode,
    pub dropout: f64,
}

pub struct AttentionOutput {
    pub out: Var,
    /// Row-softmax weights, one N×N node per head.
    pub weights: Vec<Var>,
}

impl AttentionBlock {
    pub fn new(prefix: impl Into<String>, width: usize, heads: usize, geo_mode: GeoMode, dropout: f64) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::invalid(format!("width {width} is not divisible by {heads} heads")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid("dropout rate must lie in [0, 1)"));
        }
        Ok(AttentionBlock {
            prefix: prefix.into(),
            width,
            heads,
            geo_mode,
            dropout,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    fn geo_inputs(&self) -> usize {
        match self.geo_mode {
            GeoMode::Displacement => 3,
            GeoMode::Distance => 1,
        }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut impl Rng) {
        let f = self.width;
        let h = self.heads;
        let s = (1.0 / f as f64).sqrt();
        for w in ["wq", "wk", "wv", "wo"] {
            params.insert_normal(self.name(w), f, f, s, rng);
        }
        params.insert_normal(self.name("geo_proj"), self.geo_inputs(), h, 0.1, rng);
        params.insert_normal(self.name("quant_proj"), 1, h, 0.5, rng);
        params.insert_normal(self.name("topo_proj"), 1, h, 0.5, rng);
        params.insert_filled(self.name("gate_logits"), h, 3, 0.0);
        params.insert_normal(self.name("ffn_w1"), f, 4 * f, s, rng);
        params.insert_filled(self.name("ffn_b1"), 1, 4 * f, 0.0);
        params.insert_normal(self.name("ffn_w2"), 4 * f, f, (1.0 / (4 * f) as f64).sqrt(), rng);
        params.insert_filled(self.name("ffn_b2"), 1, f, 0.0);
        for ln in ["ln1", "ln2"] {
            params.insert_filled(self.name(&format!("{ln}_gamma")), 1, f, 1.0);
            params.insert_filled(self.name(&format!("{ln}_beta")), 1, f, 0.0);
        }
    }

    fn geo_index(&self, head: usize) -> Vec<usize> {
        (0..self.geo_inputs()).map(|c| c * self.heads + head).collect()
    }

    /// `x` is N×F with one point per row. `layer` seeds the dropout streams.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        ctx: &AttentionContext,
        dropout_key: Option<&DropoutKey>,
        layer: u64,
    ) -> Result<AttentionOutput> {
        let [n, f] = tape.value(x).shape();
        if f != self.width || n != ctx.n {
            return Err(Error::invalid(format!(
                "block expects {}×{}, got {n}×{f}",
                ctx.n, self.width
            )));
        }
        let p = |s: &str| bound.var(&self.name(s));
        let d = self.head_dim();
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();

        let h = tape.layer_norm(x, p("ln1_gamma"), p("ln1_beta"));
        let q = tape.matmul(h, p("wq"));
        let k = tape.matmul(h, p("wk"));
        let v = tape.matmul(h, p("wv"));
        let gates = tape.sigmoid(p("gate_logits"));
        let mut heads = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for hd in 0..self.heads {
            let qh = tape.cols(q, hd * d, d);
            let kh = tape.cols(k, hd * d, d);
            let vh = tape.cols(v, hd * d, d);
            let dots = tape.matmul_nt(qh, kh);
            let scaled = tape.scale(dots, inv_sqrt_d);
            let terms = vec![
                BiasTerm {
                    consts: ctx.geo.clone(),
                    weight: p("geo_proj"),
                    idx: self.geo_index(hd),
                    gate: hd * 3,
                },
                BiasTerm {
                    consts: ctx.quant.clone(),
                    weight: p("quant_proj"),
                    idx: vec![hd],
                    gate: hd * 3 + 1,
                },
                BiasTerm {
                    consts: ctx.topo.clone(),
                    weight: p("topo_proj"),
                    idx: vec![hd],
                    gate: hd * 3 + 2,
                },
            ];
            let logits = tape.gated_bias(scaled, gates, terms);
            tape.check()?;
            let a = tape.softmax_rows(logits);
            weights.push(a);
            heads.push(tape.matmul(a, vh));
        }
        let o = tape.concat_cols(&heads);
        let o = tape.matmul(o, p("wo"));
        let o = dropout::apply(tape, o, self.dropout, dropout_key, layer, 0);
        let x1 = tape.add(x, o);

        let y = tape.layer_norm(x1, p("ln2_gamma"), p("ln2_beta"));
        let y = tape.matmul(y, p("ffn_w1"));
        let y = tape.add_row(y, p("ffn_b1"));
        let y = tape.gelu(y);
        let y = tape.matmul(y, p("ffn_w2"));
        let y = tape.add_row(y, p("ffn_b2"));
        let y = dropout::apply(tape, y, self.dropout, dropout_key, layer, 1);
        let out = tape.add(x1, y);
        tape.check()?;
        Ok(AttentionOutput { out, weights })
    }

    /// Ungated `[G, E, T]` bias matrices of every head.
    pub fn bias_tensors(&self, params: &ParamSet, ctx: &AttentionContext) -> Vec<[Tensor; 3]> {
        let combine = |consts: &[Tensor], w: &Tensor, idx: &[usize]| {
            let mut out = Tensor::zeros(ctx.n, ctx.n);
            for (c, &i) in consts.iter().zip(idx) {
                for (o, x) in out.data.iter_mut().zip(&c.data) {
                    *o += w.data[i] * x;
                }
            }
            out
        };
        (0..self.heads)
            .map(|hd| {
                [
                    combine(&ctx.geo, params.get(&self.name("geo_proj")), &self.geo_index(hd)),
                    combine(&ctx.quant, params.get(&self.name("quant_proj")), &[hd]),
                    combine(&ctx.topo, params.get(&self.name("topo_proj")), &[hd]),
                ]
            })
            .collect()
    }
}
