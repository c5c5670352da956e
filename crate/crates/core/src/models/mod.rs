//! Parameter-conditioned neural surrogates: the conditioning network plus
//! two surrogate bodies (PointNet-style and GraphSAGE-style), with concat or
//! FiLM conditioning.

mod adjacency;
mod checkpoint;
mod encoding;
mod film;
mod params;
mod pointnet;
mod sage;

pub use adjacency::AdjacencyIndex;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointSidecar, CHECKPOINT_MAGIC};
pub use encoding::sinusoidal_features;
pub use film::film_modulate;
pub use params::{ParamLayoutEntry, ParamSet};

use crate::datagen::{MeshSample, TaskSpec};
use crate::tensor::{Result, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    PointNet,
    Sage,
}

impl Architecture {
    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::PointNet => "pointnet",
            Architecture::Sage => "sage",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pointnet" => Ok(Architecture::PointNet),
            "sage" => Ok(Architecture::Sage),
            other => Err(format!("unknown architecture '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditioningMode {
    Concat,
    Film,
}

impl ConditioningMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditioningMode::Concat => "concat",
            ConditioningMode::Film => "film",
        }
    }
}

impl std::str::FromStr for ConditioningMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "concat" => Ok(ConditioningMode::Concat),
            "film" => Ok(ConditioningMode::Film),
            other => Err(format!("unknown conditioning mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub conditioning: ConditioningMode,
    pub coord_dim: usize,
    pub param_dim: usize,
    pub field_count: usize,
    /// Conditioner output dimension; 8 unless explicitly overridden.
    pub latent_dim: usize,
    pub conditioner_hidden: usize,
    pub pointnet_width: usize,
    pub sage_width: usize,
    pub sage_layers: usize,
    /// Sinusoidal encoding: number of frequencies per input scalar.
    pub freq_count: usize,
    /// Geometric frequency ladder base.
    pub freq_base: f64,
}

impl ModelConfig {
    pub fn for_task(task: &TaskSpec, architecture: Architecture, conditioning: ConditioningMode) -> ModelConfig {
        ModelConfig {
            architecture,
            conditioning,
            coord_dim: if task.name == "rod-bending" { 1 } else { 2 },
            param_dim: task.params.len(),
            field_count: task.field_names.len(),
            latent_dim: 8,
            conditioner_hidden: 32,
            pointnet_width: 32,
            sage_width: 64,
            sage_layers: 4,
            freq_count: 8,
            freq_base: 1e3,
        }
    }

    fn coord_feat_dim(&self) -> usize {
        self.coord_dim * 2 * self.freq_count
    }

    fn param_feat_dim(&self) -> usize {
        self.param_dim * 2 * self.freq_count
    }
}

/// Per-sample constant inputs, precomputed once and shared across steps.
#[derive(Debug, Clone)]
pub struct SampleInput {
    pub n_nodes: usize,
    pub coord_feats: Tensor,
    pub param_feats: Tensor,
    pub adjacency: AdjacencyIndex,
}

pub fn prepare_input(sample: &MeshSample, task: &TaskSpec, cfg: &ModelConfig) -> Result<SampleInput> {
    let n = sample.n_nodes();
    let scale = task.coord_scale();
    let scaled: Vec<f64> = sample.coords.data().iter().map(|&v| v / scale).collect();
    let coord_feats = sinusoidal_features(&scaled, n, sample.dim(), cfg.freq_count, cfg.freq_base)?;
    let normed = task.normalize_params(&sample.params);
    let param_feats = sinusoidal_features(&normed, 1, normed.len(), cfg.freq_count, cfg.freq_base)?
        .reshaped(vec![cfg.param_feat_dim()])?;
    Ok(SampleInput {
        n_nodes: n,
        coord_feats,
        param_feats,
        adjacency: AdjacencyIndex::from_cells(n, &sample.cells, sample.cell_arity()),
    })
}

/// Conditioned field predictor with a flat leaf-parameter list.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub config: ModelConfig,
    pub params: ParamSet,
}

/// Parameter variables bound onto a tape for one forward pass.
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    fn get(&self, set: &ParamSet, name: &str) -> Var {
        self.vars[set.index_of(name)]
    }
}

pub struct ForwardOutput {
    /// N x F field predictions.
    pub prediction: Var,
    /// Conditioner latent, the representation aligned by the UDA losses.
    pub latent: Var,
}

impl SurrogateModel {
    pub fn new(config: ModelConfig, seed: u64) -> SurrogateModel {
        let params = build_params(&config, seed);
        SurrogateModel { config, params }
    }

    /// Registers every parameter tensor on the tape, as trainable leaves or
    /// frozen constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let vars = self
            .params
            .tensors()
            .map(|t| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        BoundParams { vars }
    }

    /// Leaf variables in flat parameter order (for optimizer updates).
    pub fn bound_vars(bound: &BoundParams) -> &[Var] {
        &bound.vars
    }

    /// z = MLP(sinusoidal(params)); deterministic in the parameter vector.
    pub fn encode_condition(&self, tape: &mut Tape, bound: &BoundParams, input: &SampleInput) -> Result<Var> {
        let p = &self.params;
        let feats = tape.constant(input.param_feats.reshaped(vec![1, self.config.param_feat_dim()])?);
        let h = linear(tape, feats, bound.get(p, "cond.l0.w"), bound.get(p, "cond.l0.b"), 1)?;
        let h = tape.gelu(h)?;
        let z = linear(tape, h, bound.get(p, "cond.l1.w"), bound.get(p, "cond.l1.b"), 1)?;
        tape.reshape(z, vec![self.config.latent_dim])
    }

    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, input: &SampleInput) -> Result<ForwardOutput> {
        let z = self.encode_condition(tape, bound, input)?;
        self.forward_with_latent(tape, bound, input, z)
    }

    /// Body forward with an externally supplied latent. Training uses this to
    /// stitch per-sample body tapes to a shared conditioner tape.
    pub fn forward_with_latent(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        input: &SampleInput,
        z: Var,
    ) -> Result<ForwardOutput> {
        let prediction = match self.config.architecture {
            Architecture::PointNet => pointnet::forward(self, tape, bound, input, z)?,
            Architecture::Sage => sage::forward(self, tape, bound, input, z)?,
        };
        Ok(ForwardOutput { prediction, latent: z })
    }
}

pub(crate) fn linear(tape: &mut Tape, x: Var, w: Var, b: Var, rows: usize) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let bb = tape.broadcast_rows(b, rows)?;
    tape.add(xw, bb)
}

fn build_params(cfg: &ModelConfig, seed: u64) -> ParamSet {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut set = ParamSet::new();

    set.push_linear(&mut rng, "cond.l0", cfg.param_feat_dim(), cfg.conditioner_hidden);
    set.push_linear(&mut rng, "cond.l1", cfg.conditioner_hidden, cfg.latent_dim);

    match cfg.architecture {
        Architecture::PointNet => {
            let w = cfg.pointnet_width;
            set.push_linear(&mut rng, "pn.enc0", cfg.coord_feat_dim(), w);
            set.push_linear(&mut rng, "pn.enc1", w, w);
            let global = match cfg.conditioning {
                ConditioningMode::Concat => w + cfg.latent_dim,
                ConditioningMode::Film => w,
            };
            let dec_in = w + global;
            if cfg.conditioning == ConditioningMode::Film {
                set.push_film(&mut rng, "pn.film0", cfg.latent_dim, dec_in);
                set.push_film(&mut rng, "pn.film1", cfg.latent_dim, w);
            }
            set.push_linear(&mut rng, "pn.dec0", dec_in, w);
            set.push_linear(&mut rng, "pn.dec1", w, cfg.field_count);
        }
        Architecture::Sage => {
            let w = cfg.sage_width;
            let enc_in = match cfg.conditioning {
                ConditioningMode::Concat => cfg.coord_feat_dim() + cfg.latent_dim,
                ConditioningMode::Film => cfg.coord_feat_dim(),
            };
            set.push_linear(&mut rng, "sg.enc0", enc_in, w);
            set.push_linear(&mut rng, "sg.enc1", w, w);
            for layer in 0..cfg.sage_layers {
                if cfg.conditioning == ConditioningMode::Film {
                    set.push_film(&mut rng, &format!("sg.film{layer}"), cfg.latent_dim, w);
                }
                set.push_linear(&mut rng, &format!("sg.mp{layer}"), 2 * w, w);
            }
            set.push_linear(&mut rng, "sg.dec0", w, w);
            set.push_linear(&mut rng, "sg.dec1", w, cfg.field_count);
        }
    }
    set
}
