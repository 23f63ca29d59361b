//! Central finite-difference gradient checking.

use alloc::vec::Vec;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Worst relative error over all inputs, per input:
/// `‖g_analytic − g_numeric‖₂ / max(‖g_analytic‖₂ + ‖g_numeric‖₂, floor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Input index where the worst error occurred.
    pub worst_input: usize,
}

/// Compares reverse-mode gradients of the scalar `f(inputs)` with central
/// differences of step `h`. `f` receives one handle per input, in order.
pub fn check_gradients<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = inputs.iter().zip(&vars).map(|(t, &v)| grads.get_or_zeros(v, t)).collect();

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out);
        if !v.is_scalar() {
            return Err(Error::NonScalarLoss(v.shape().to_vec()));
        }
        Ok(v.item())
    };

    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_input: 0,
    };
    for (i, a) in analytic.iter().enumerate() {
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for k in 0..inputs[i].len() {
            let x = inputs[i].data()[k];
            work[i].data_mut()[k] = x + h;
            let up = eval(&work)?;
            work[i].data_mut()[k] = x - h;
            let down = eval(&work)?;
            work[i].data_mut()[k] = x;
            let numeric = (up - down) / (2.0 * h);
            let ak = a.data()[k];
            diff += (ak - numeric) * (ak - numeric);
            na += ak * ak;
            nn += numeric * numeric;
        }
        let denom = (libm::sqrt(na) + libm::sqrt(nn)).max(1e-8);
        let rel = libm::sqrt(diff) / denom;
        if rel > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_input: i,
            };
        }
    }
    Ok(report)
}
