//! Central finite-difference checks of tape gradients.

use super::matrix::Matrix;
use super::tape::{NodeId, Tape};
use super::DiffError;

/// Outcome of a gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_err: f64,
    /// (parameter slot, element) at which `max_rel_err` occurred.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Denominator floor: gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// Compares reverse-mode gradients of `build` against central differences
/// with step `h·max(1, |θ|)`.
///
/// `build` records the scalar loss on a fresh tape given one leaf per
/// entry of `params`.
pub fn check_gradients<F>(params: &[Matrix], build: F, h: f64) -> Result<GradCheckReport, DiffError>
where
    F: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let eval = |ps: &[Matrix]| -> f64 {
        let mut tape = Tape::new();
        let leaves: Vec<NodeId> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = build(&mut tape, &leaves);
        tape.value(out).item()
    };

    let mut tape = Tape::new();
    let leaves: Vec<NodeId> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = build(&mut tape, &leaves);
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, checked: 0 };
    let mut work = params.to_vec();
    for (slot, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get(*leaf);
        for k in 0..params[slot].len() {
            let x0 = params[slot].as_slice()[k];
            let step = h * x0.abs().max(1.0);
            work[slot].as_mut_slice()[k] = x0 + step;
            let up = eval(&work);
            work[slot].as_mut_slice()[k] = x0 - step;
            let down = eval(&work);
            work[slot].as_mut_slice()[k] = x0;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic.as_slice()[k];
            let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
            let err = (a - numeric).abs() / denom;
            report.checked += 1;
            if err > report.max_rel_err || !err.is_finite() {
                report.max_rel_err = if err.is_finite() { err } else { f64::INFINITY };
                report.worst = Some((slot, k));
            }
        }
    }
    Ok(report)
}
