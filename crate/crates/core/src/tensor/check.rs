//! Gradient verification against central finite differences.

use super::{Result, Tape, Tensor, Var};

/// Checks the analytic gradient of a scalar-valued tape program `f` at `x`
/// against central finite differences with the given `step`.
///
/// Returns `max_i |analytic_i - central_i| / max(1, |central_i|)`.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    assert!(step > 0.0, "finite-difference step must be positive");

    let precision = x.precision();
    let analytic = {
        let mut tape = Tape::with_precision(precision);
        let xv = tape.leaf(x.clone());
        let loss = f(&mut tape, xv)?;
        let grads = tape.backward(loss)?;
        grads.wrt(xv)?
    };

    let eval = |probe: &Tensor| -> Result<f64> {
        let mut tape = Tape::with_precision(precision);
        let xv = tape.constant(probe.clone());
        let loss = f(&mut tape, xv)?;
        Ok(tape.value(loss).item())
    };

    let mut max_rel: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += step;
        plus.quantize();
        let mut minus = x.clone();
        minus.data_mut()[i] -= step;
        minus.quantize();
        let central = (eval(&plus)? - eval(&minus)?) / (2.0 * step);
        let rel = (analytic.data()[i] - central).abs() / central.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
