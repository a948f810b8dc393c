//! The point-cloud regressor/classifier: edge convolutions over positions,
//! a pointwise embedding of scalar and topology channels, relational
//! attention, pooled readout and an optional fingerprint head.

use amptcr_core::cloudstore::AmptcrCloud;
use amptcr_core::evalkit::Task;
use amptcr_core::fingerprint::Fingerprint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionBlock, AttentionContext, GeoMode};
use crate::dropout::DropoutKey;
use crate::error::{Error, Result};
use crate::graph::{edge_conv, knn_graph, positions_tensor, EdgeWeights, KnnGraph};
use crate::params::{Bound, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_FP_WEIGHT_BINARY: f64 = 0.25;
pub const DEFAULT_FP_WEIGHT_REGRESSION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_points: usize,
    pub k_nn: usize,
    /// Feature width F.
    pub width: usize,
    pub heads: usize,
    /// Attention blocks.
    pub layers: usize,
    pub edge_layers: usize,
    /// Blend weight of the fingerprint head; `None` picks the task default.
    pub fp_weight: Option<f64>,
    pub fp_hidden: usize,
    pub task: Task,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub geo_mode: GeoMode,
    /// Jitter clouds whenever a training batch is fetched.
    pub jitter: bool,
    /// Train regression heads on z-scored labels.
    pub standardize_targets: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_points: amptcr_core::surface::DEFAULT_POINT_COUNT,
            k_nn: 20,
            width: 64,
            heads: 4,
            layers: 2,
            edge_layers: 2,
            fp_weight: None,
            fp_hidden: 32,
            task: Task::Regression,
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 8,
            dropout: 0.1,
            geo_mode: GeoMode::Displacement,
            jitter: true,
            standardize_targets: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn fp_weight(&self) -> f64 {
        self.fp_weight.unwrap_or(match self.task {
            Task::Binary => DEFAULT_FP_WEIGHT_BINARY,
            Task::Regression => DEFAULT_FP_WEIGHT_REGRESSION,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_nn == 0 {
            return Err(Error::invalid("k_nn must be at least 1"));
        }
        let w = self.fp_weight();
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid(format!("fp_weight {w} is outside [0, 1]")));
        }
        if self.width == 0 || self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::invalid("width must be a positive multiple of heads"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    fn blocks(&self) -> Result<Vec<AttentionBlock>> {
        (0..self.layers)
            .map(|l| AttentionBlock::new(format!("attn{l}"), self.width, self.heads, self.geo_mode, self.dropout))
            .collect()
    }
}

/// `(1 − w)·cloud + w·fp`.
pub fn fp_blend(cloud_out: f64, fp_out: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid(format!("blend weight {w} is outside [0, 1]")));
    }
    Ok((1.0 - w) * cloud_out + w * fp_out)
}

/// Everything the forward pass needs from one cloud.
pub struct ModelInput {
    pub positions: Vec<[f64; 3]>,
    /// N × (1 + C): scalar then topology channels.
    pub point_features: Tensor,
    pub graph: Option<KnnGraph>,
    pub context: Option<AttentionContext>,
    pub fingerprint: Option<Tensor>,
}

fn t1_columns(cloud: &AmptcrCloud) -> Result<[usize; 3]> {
    let layout = &cloud.meta.channel_layout;
    let find = |name: &str| {
        layout
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("cloud {} lacks channel {name}", cloud.meta.name)))
    };
    Ok([find("t1.x")?, find("t1.y")?, find("t1.z")?])
}

impl ModelInput {
    pub fn new(cloud: &AmptcrCloud, fingerprint: Option<&Fingerprint>, config: &ModelConfig) -> Result<Self> {
        let n = cloud.len();
        let positions: Vec<[f64; 3]> = cloud.positions.iter().map(|p| p.map(f64::from)).collect();
        let c = cloud.channels();
        let mut feats = Vec::with_capacity(n * (1 + c));
        for i in 0..n {
            feats.push(f64::from(cloud.scalars[i]));
            feats.extend(cloud.topo_row(i).iter().map(|&v| f64::from(v)));
        }
        let graph = if config.edge_layers > 0 {
            Some(knn_graph(&positions, config.k_nn)?)
        } else {
            None
        };
        let context = if config.layers > 0 {
            let cols = t1_columns(cloud)?;
            let t1: Vec<[f64; 3]> = (0..n)
                .map(|i| {
                    let r = cloud.topo_row(i);
                    cols.map(|k| f64::from(r[k]))
                })
                .collect();
            let scalars: Vec<f64> = cloud.scalars.iter().map(|&s| f64::from(s)).collect();
            Some(AttentionContext::new(&positions, &scalars, &t1, config.geo_mode)?)
        } else {
            None
        };
        let fingerprint = match fingerprint {
            Some(fp) => Some(Tensor::from_vec(1, fp.nbits(), fp.to_dense())),
            None if config.fp_weight() > 0.0 => {
                return Err(Error::invalid(format!(
                    "cloud {} has no fingerprint but fp_weight is {}",
                    cloud.meta.name,
                    config.fp_weight()
                )))
            }
            None => None,
        };
        Ok(ModelInput {
            positions,
            point_features: Tensor::from_vec(n, 1 + c, feats),
            graph,
            context,
            fingerprint,
        })
    }
}

/// Affine map between labels and the head's training target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn identity() -> Self {
        TargetScale { mean: 0.0, std: 1.0 }
    }

    pub fn fit(labels: &[f64]) -> Self {
        let n = labels.len().max(1) as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        TargetScale { mean, std }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Graph of one forward pass.
pub struct Forward {
    pub tape: Tape,
    pub bound: Bound,
    /// Blended 1×1 output (a logit for binary tasks).
    pub out: Var,
    pub cloud_out: Var,
    pub fp_out: Option<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub target: TargetScale,
}

impl Model {
    /// Fresh parameters for clouds with `channels` topology channels and
    /// fingerprints of `fp_bits` bits (0 without a fingerprint head).
    pub fn init(config: ModelConfig, channels: usize, fp_bits: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamSet::new();
        let f = config.width;
        let mut edge_in = 3;
        for l in 0..config.edge_layers {
            p.insert_normal(format!("edge{l}.w"), 2 * edge_in, f, (2.0 / (2 * edge_in) as f64).sqrt(), &mut rng);
            p.insert_filled(format!("edge{l}.b"), 1, f, 0.0);
            edge_in = f;
        }
        let embed_in = if config.edge_layers > 0 { f } else { 0 } + 1 + channels;
        p.insert_normal("embed.w", embed_in, f, (1.0 / embed_in as f64).sqrt(), &mut rng);
        p.insert_filled("embed.b", 1, f, 0.0);
        for b in config.blocks()? {
            b.init(&mut p, &mut rng);
        }
        p.insert_normal("head.w1", 2 * f, f, (2.0 / (2 * f) as f64).sqrt(), &mut rng);
        p.insert_filled("head.b1", 1, f, 0.0);
        p.insert_normal("head.w2", f, 1, (1.0 / f as f64).sqrt(), &mut rng);
        p.insert_filled("head.b2", 1, 1, 0.0);
        if fp_bits > 0 {
            let h = config.fp_hidden;
            p.insert_normal("fp.w1", fp_bits, h, (2.0 / fp_bits as f64).sqrt(), &mut rng);
            p.insert_filled("fp.b1", 1, h, 0.0);
            p.insert_normal("fp.w2", h, 1, (1.0 / h as f64).sqrt(), &mut rng);
            p.insert_filled("fp.b2", 1, 1, 0.0);
        }
        Ok(Model {
            config,
            params: p,
            target: TargetScale::identity(),
        })
    }

    pub fn forward(&self, input: &ModelInput, dropout_key: Option<&DropoutKey>) -> Result<Forward> {
        let cfg = &self.config;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let feats = tape.constant(input.point_features.clone());
        let x_in = match &input.graph {
            Some(graph) => {
                let mut x = tape.constant(positions_tensor(&input.positions));
                for l in 0..cfg.edge_layers {
                    let w = EdgeWeights {
                        w: bound.var(&format!("edge{l}.w")),
                        b: bound.var(&format!("edge{l}.b")),
                    };
                    x = edge_conv(&mut tape, x, graph, &w);
                }
                tape.concat_cols(&[x, feats])
            }
            None => feats,
        };
        let x = tape.matmul(x_in, bound.var("embed.w"));
        let mut x = tape.add_row(x, bound.var("embed.b"));
        if let Some(ctx) = &input.context {
            for (l, block) in cfg.blocks()?.iter().enumerate() {
                x = block.forward(&mut tape, &bound, x, ctx, dropout_key, l as u64)?.out;
            }
        }
        let mx = tape.max_rows(x);
        let mean = tape.mean_rows(x);
        let pooled = tape.concat_cols(&[mx, mean]);
        let hd = tape.matmul(pooled, bound.var("head.w1"));
        let hd = tape.add_row(hd, bound.var("head.b1"));
        let hd = tape.gelu(hd);
        let hd = tape.matmul(hd, bound.var("head.w2"));
        let cloud_out = tape.add_row(hd, bound.var("head.b2"));

        let w = cfg.fp_weight();
        let (out, fp_out) = match (&input.fingerprint, self.params.contains("fp.w1")) {
            (Some(fp), true) => {
                let fpv = tape.constant(fp.clone());
                let h = tape.matmul(fpv, bound.var("fp.w1"));
                let h = tape.add_row(h, bound.var("fp.b1"));
                let h = tape.gelu(h);
                let h = tape.matmul(h, bound.var("fp.w2"));
                let fp_out = tape.add_row(h, bound.var("fp.b2"));
                let a = tape.scale(cloud_out, 1.0 - w);
                let b = tape.scale(fp_out, w);
                (tape.add(a, b), Some(fp_out))
            }
            _ if w > 0.0 => return Err(Error::invalid("fp_weight > 0 needs a fingerprint head and input")),
            _ => (cloud_out, None),
        };
        tape.check()?;
        Ok(Forward {
            tape,
            bound,
            out,
            cloud_out,
            fp_out,
        })
    }

    /// Label-space prediction: a regression value or a positive-class
    /// probability.
    pub fn predict(&self, input: &ModelInput) -> Result<f64> {
        let f = self.forward(input, None)?;
        let z = f.tape.value(f.out).item();
        Ok(match self.config.task {
            Task::Regression => self.target.inverse(z),
            Task::Binary => crate::kernels::sigmoid(z),
        })
    }
}
