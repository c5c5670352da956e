//! Feature-wise linear modulation: gamma(z) * h + beta(z), gamma and beta
//! affine in the latent and broadcast over nodes.

use crate::tensor::{Result, Tape, Var};

pub fn film_modulate(
    tape: &mut Tape,
    h: Var,
    z: Var,
    wg: Var,
    bg: Var,
    wb: Var,
    bb: Var,
) -> Result<Var> {
    let n = tape.value(h).rows();
    let latent = tape.value(z).numel();
    let zr = tape.reshape(z, vec![1, latent])?;

    let gamma = affine_row(tape, zr, wg, bg)?;
    let beta = affine_row(tape, zr, wb, bb)?;
    let gb = tape.broadcast_rows(gamma, n)?;
    let bbx = tape.broadcast_rows(beta, n)?;
    let scaled = tape.mul(h, gb)?;
    tape.add(scaled, bbx)
}

fn affine_row(tape: &mut Tape, zr: Var, w: Var, b: Var) -> Result<Var> {
    let features = tape.value(w).shape()[1];
    let prod = tape.matmul(zr, w)?;
    let flat = tape.reshape(prod, vec![features])?;
    tape.add(flat, b)
}
