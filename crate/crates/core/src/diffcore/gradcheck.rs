//! Central finite-difference comparison of tape gradients.

use super::{ParamStore, Tape, Var};
use crate::Result;

/// Largest discrepancy found by [`check_gradients`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    /// Analytic and numeric gradient at the worst entry.
    pub worst_pair: (f64, f64),
    pub checked: usize,
}

/// Compares analytic gradients of `loss` against central differences with
/// step `h` for every parameter value in `store`. The relative error is
/// `|a - n| / max(|a| + |n|, floor)`; the floor keeps vanishing gradients
/// from dominating the report.
pub fn check_gradients<F>(store: &mut ParamStore, h: f64, floor: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let l = loss(&mut tape, store)?;
    tape.backward(l, store)?;
    let analytic: Vec<Vec<f64>> = store.tensors().iter().map(|t| t.grad.clone()).collect();

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let l = loss(&mut tape, store)?;
        Ok(tape.value(l).scalar())
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_pair: (0.0, 0.0),
        checked: 0,
    };
    for (ti, grads) in analytic.iter().enumerate() {
        for (vi, &a) in grads.iter().enumerate() {
            let orig = store.tensors()[ti].values[vi];
            store.tensors_mut()[ti].values[vi] = orig + h;
            let up = eval(store)?;
            store.tensors_mut()[ti].values[vi] = orig - h;
            let down = eval(store)?;
            store.tensors_mut()[ti].values[vi] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = format!("{}[{vi}]", store.tensors()[ti].name);
                report.worst_pair = (a, numeric);
            }
        }
    }
    Ok(report)
}
