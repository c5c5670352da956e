//! GraphSAGE-style body: encoder MLP, message-passing layers that combine
//! each node with the mean of its in-neighbors, then a decoder MLP. FiLM
//! modulation (when enabled) applies to node features before each
//! message-passing layer; concat mode appends the latent to the input node
//! features instead.

use super::{linear, BoundParams, ConditioningMode, SampleInput, SurrogateModel};
use crate::tensor::{Result, Tape, TensorError, Var};

pub(super) fn forward(
    model: &SurrogateModel,
    tape: &mut Tape,
    bound: &BoundParams,
    input: &SampleInput,
    z: Var,
) -> Result<Var> {
    if input.n_nodes == 0 {
        return Err(TensorError::Invalid("empty mesh: GraphSAGE needs at least one node".into()));
    }
    let p = &model.params;
    let n = input.n_nodes;

    let mut x = tape.constant(input.coord_feats.clone());
    if model.config.conditioning == ConditioningMode::Concat {
        let zt = tape.broadcast_rows(z, n)?;
        x = tape.concat_cols(&[x, zt])?;
    }
    let mut h = linear(tape, x, bound.get(p, "sg.enc0.w"), bound.get(p, "sg.enc0.b"), n)?;
    h = tape.gelu(h)?;
    h = linear(tape, h, bound.get(p, "sg.enc1.w"), bound.get(p, "sg.enc1.b"), n)?;
    h = tape.gelu(h)?;

    for layer in 0..model.config.sage_layers {
        if model.config.conditioning == ConditioningMode::Film {
            h = super::film_modulate(
                tape,
                h,
                z,
                bound.get(p, &format!("sg.film{layer}.wg")),
                bound.get(p, &format!("sg.film{layer}.bg")),
                bound.get(p, &format!("sg.film{layer}.wb")),
                bound.get(p, &format!("sg.film{layer}.bb")),
            )?;
        }
        let agg = input.adjacency.mean_neighbors(tape, h)?;
        let cat = tape.concat_cols(&[h, agg])?;
        h = linear(tape, cat, bound.get(p, &format!("sg.mp{layer}.w")), bound.get(p, &format!("sg.mp{layer}.b")), n)?;
        h = tape.gelu(h)?;
    }

    let mut d = linear(tape, h, bound.get(p, "sg.dec0.w"), bound.get(p, "sg.dec0.b"), n)?;
    d = tape.gelu(d)?;
    linear(tape, d, bound.get(p, "sg.dec1.w"), bound.get(p, "sg.dec1.b"), n)
}
