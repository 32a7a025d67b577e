//! Central finite-difference gradient checking.
//!
//! The numeric side only evaluates forward passes, so it is independent of
//! the backward rules it checks.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::ParamStore;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest per-parameter relative error
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||, floor)`,
    /// where `floor` is the roundoff level of the central difference
    /// (see [`noise_floor`]).
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked_values: usize,
}

pub const DEFAULT_STEP: f64 = 1e-5;
const NORM_FLOOR: f64 = 1e-7;

/// Norm below which a parameter's gradient cannot be resolved by central
/// differences: each numeric entry carries roughly `eps * |loss| / h` of
/// rounding error, so `n` entries with step `h` cannot be told apart from
/// zero under about `1e-6 * max(1, |loss|) * sqrt(n)` at `h = 1e-5`
/// (a 10x margin over the machine-epsilon estimate).
pub fn noise_floor(loss: f64, n: usize, h: f64) -> f64 {
    let per_entry = 10.0 * f64::EPSILON * loss.abs().max(1.0) / h;
    (per_entry * (n as f64).sqrt() / 1e-4).max(NORM_FLOOR)
}

/// Compares backward gradients of the scalar built by `f` against central
/// differences with step `h`, for every parameter in `store`.
pub fn check<F>(store: &ParamStore, h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let (analytic, loss_value) = {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        (g.backward(loss)?, g.value(loss).item())
    };
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        checked_values: 0,
    };
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let n = store.value(id).len();
        let mut numeric = vec![0.0; n];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = store.value(id).data()[k];
            probe.get_mut(id).value.data_mut()[k] = orig + h;
            let up = eval(&probe, &f)?;
            probe.get_mut(id).value.data_mut()[k] = orig - h;
            let down = eval(&probe, &f)?;
            probe.get_mut(id).value.data_mut()[k] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        let zeros = vec![0.0; n];
        let exact = analytic.get(id).map_or(zeros.as_slice(), |t| t.data());
        let diff: f64 = exact
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let na = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / na.max(nn).max(noise_floor(loss_value, n, h));
        report.checked_values += n;
        if rel >= report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = store.get(id).name.clone();
        }
    }
    Ok(report)
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let v = f(&mut g)?;
    Ok(g.value(v).item())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_floor_scales_with_loss_and_size() {
        let base = noise_floor(1.0, 4, 1e-5);
        // |loss| below one does not shrink it
        assert_eq!(noise_floor(0.01, 4, 1e-5), base);
        assert!((noise_floor(10.0, 4, 1e-5) / base - 10.0).abs() < 1e-9);
        assert!((noise_floor(1.0, 16, 1e-5) / base - 2.0).abs() < 1e-9);
        // a larger step means less roundoff
        assert!(noise_floor(1.0, 4, 1e-3) < base);
    }

    #[test]
    fn noise_floor_has_a_minimum() {
        assert_eq!(noise_floor(0.0, 1, 1.0), NORM_FLOOR);
    }
}
