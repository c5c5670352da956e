//! PointNet-style body: per-node MLP, global max pooling, global feature
//! (plus the conditioning latent in concat mode) broadcast back onto each
//! node, then a decoder MLP. FiLM mode modulates the decoder inputs instead
//! of widening the global feature.

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
        return Err(TensorError::Invalid("empty mesh: PointNet needs at least one node".into()));
    }
    let p = &model.params;
    let n = input.n_nodes;

    let feats = tape.constant(input.coord_feats.clone());
    let h = linear(tape, feats, bound.get(p, "pn.enc0.w"), bound.get(p, "pn.enc0.b"), n)?;
    let h = tape.gelu(h)?;
    let h = linear(tape, h, bound.get(p, "pn.enc1.w"), bound.get(p, "pn.enc1.b"), n)?;
    let h = tape.gelu(h)?;

    let global = tape.reduce_max_rows(h)?;
    let global = match model.config.conditioning {
        ConditioningMode::Concat => tape.concat_cols(&[global, z])?,
        ConditioningMode::Film => global,
    };
    let tiled = tape.broadcast_rows(global, n)?;
    let mut dec = tape.concat_cols(&[h, tiled])?;

    if model.config.conditioning == ConditioningMode::Film {
        dec = super::film_modulate(
            tape,
            dec,
            z,
            bound.get(p, "pn.film0.wg"),
            bound.get(p, "pn.film0.bg"),
            bound.get(p, "pn.film0.wb"),
            bound.get(p, "pn.film0.bb"),
        )?;
    }
    let mut d0 = linear(tape, dec, bound.get(p, "pn.dec0.w"), bound.get(p, "pn.dec0.b"), n)?;
    d0 = tape.gelu(d0)?;
    if model.config.conditioning == ConditioningMode::Film {
        d0 = super::film_modulate(
            tape,
            d0,
            z,
            bound.get(p, "pn.film1.wg"),
            bound.get(p, "pn.film1.bg"),
            bound.get(p, "pn.film1.wb"),
            bound.get(p, "pn.film1.bb"),
        )?;
    }
    linear(tape, d0, bound.get(p, "pn.dec1.w"), bound.get(p, "pn.dec1.b"), n)
}
