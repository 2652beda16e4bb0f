use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Central-difference step used when none is given.
pub const DEFAULT_STEP: f64 = 1e-6;

/// Gradients smaller than this are compared absolutely instead of relatively.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max relative deviation between analytic and numeric gradients, per parameter.
    pub max_deviation: Vec<f64>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst() <= tolerance
    }
}

/// Compares the analytic gradient of the scalar built by `build` against
/// central finite differences, for every element of every parameter.
///
/// `build` receives the parameter handles in order and must be deterministic;
/// any randomness it uses has to be re-seeded on every call.
pub fn grad_check<'a, F>(params: &[Tensor], step: f64, mut build: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph<'a>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new(true);
    let vars: Vec<Var> = params.iter().map(|p| g.param_owned(p.clone())).collect();
    let loss = build(&mut g, &vars)?;
    check_finite(g.value(loss), "loss")?;
    g.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| g.grad_or_zeros(v)).collect();
    drop(g);

    let mut eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new(true);
        let vars: Vec<Var> = perturbed.iter().map(|p| g.param_owned(p.clone())).collect();
        let loss = build(&mut g, &vars)?;
        Ok(g.value(loss).item())
    };

    let mut working = params.to_vec();
    let mut max_deviation = Vec::with_capacity(params.len());
    for (p, grad) in analytic.iter().enumerate() {
        check_finite(grad, &format!("param {p}"))?;
        let mut worst: f64 = 0.0;
        for j in 0..params[p].len() {
            let original = params[p].data()[j];
            working[p].data_mut()[j] = original + step;
            let up = eval(&working)?;
            working[p].data_mut()[j] = original - step;
            let down = eval(&working)?;
            working[p].data_mut()[j] = original;
            let numeric = (up - down) / (2.0 * step);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!("param {p}")));
            }
            let a = grad.data()[j];
            let denom = a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
        max_deviation.push(worst);
    }
    Ok(GradCheckReport { max_deviation })
}

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::vector(vec![0.7, -1.3, 2.0]);
        let report = grad_check(&[x], DEFAULT_STEP, |g, p| {
            let sq = g.mul(p[0], p[0])?;
            Ok(g.sum(sq))
        })
        .unwrap();
        assert!(report.worst() < 1e-8, "{report:?}");
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let x = Tensor::vector(vec![1e300]);
        let err = grad_check(&[x], DEFAULT_STEP, |g, p| {
            let sq = g.mul(p[0], p[0])?;
            Ok(g.sum(sq))
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}
