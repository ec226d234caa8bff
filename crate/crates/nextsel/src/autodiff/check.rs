use super::params::Params;
use super::tape::{Gradients, NodeId, Tape};
use crate::error::{Error, Result};

/// Floor applied to the relative-error denominator so that near-zero
/// gradient entries are compared on an absolute scale.
const DENOM_FLOOR: f64 = 1e-3;

/// Compares the analytic gradient of `f` against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every entry of every parameter, returning
/// the worst relative error.
///
/// `f` must be a deterministic function of the parameters.
pub fn gradient_check<F>(params: &mut Params, mut f: F, eps: f64) -> Result<f64>
where
    F: FnMut(&mut Tape, &Params) -> Result<NodeId>,
{
    let analytic = analytic_gradients(params, &mut f)?;
    compare_gradients(params, f, &analytic, eps)
}

/// Like [`gradient_check`] but reports the worst relative error per
/// parameter, in registration order.
pub fn gradient_check_report<F>(params: &mut Params, mut f: F, eps: f64) -> Result<Vec<(String, f64)>>
where
    F: FnMut(&mut Tape, &Params) -> Result<NodeId>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".to_string()));
    }
    let analytic = analytic_gradients(params, &mut f)?;
    let mut report = Vec::new();
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let mut worst = 0.0f64;
        let entries = params.get(id).len();
        for k in 0..entries {
            let original = params.get(id).data()[k];
            params.get_mut(id).data_mut()[k] = original + eps;
            let plus = eval_scalar(params, &mut f)?;
            params.get_mut(id).data_mut()[k] = original - eps;
            let minus = eval_scalar(params, &mut f)?;
            params.get_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).map(|g| g.data()[k]).unwrap_or(0.0);
            let denom = a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
        report.push((params.name(id).to_string(), worst));
    }
    Ok(report)
}

/// Runs one forward/backward pass of `f` and returns the gradients.
pub fn analytic_gradients<F>(params: &Params, f: &mut F) -> Result<Gradients>
where
    F: FnMut(&mut Tape, &Params) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    if !tape.value(loss).is_finite() {
        return Err(Error::InvalidArgument("non-finite loss value".to_string()));
    }
    tape.backward(loss)
}

/// Compares a caller-supplied gradient set against central differences.
/// Split out from [`gradient_check`] so tests can verify that a corrupted
/// gradient is detected.
pub fn compare_gradients<F>(
    params: &mut Params,
    mut f: F,
    analytic: &Gradients,
    eps: f64,
) -> Result<f64>
where
    F: FnMut(&mut Tape, &Params) -> Result<NodeId>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".to_string()));
    }
    let mut worst = 0.0f64;
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let entries = params.get(id).len();
        for k in 0..entries {
            let original = params.get(id).data()[k];

            params.get_mut(id).data_mut()[k] = original + eps;
            let plus = eval_scalar(params, &mut f)?;
            params.get_mut(id).data_mut()[k] = original - eps;
            let minus = eval_scalar(params, &mut f)?;
            params.get_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).map(|g| g.data()[k]).unwrap_or(0.0);
            let denom = a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            let rel = (a - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

/// Refills every parameter with uniform(-0.5, 0.5) values from a seeded
/// stream. Gradient checks run at this scale so pre-activations sit well
/// away from ReLU kinks and max-pool ties, where central differences are
/// meaningless.
pub fn randomize_params(params: &mut Params, seed: u64) {
    use rand::Rng;
    let mut rng = crate::seeded_rng(seed);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for v in params.get_mut(id).data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
}

fn eval_scalar<F>(params: &Params, f: &mut F) -> Result<f64>
where
    F: FnMut(&mut Tape, &Params) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    let v = tape.value(loss).get(0, 0);
    if !v.is_finite() {
        return Err(Error::InvalidArgument("non-finite loss value".to_string()));
    }
    Ok(v)
}
