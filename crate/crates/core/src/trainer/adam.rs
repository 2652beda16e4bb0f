use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// A named, mutable view of one trainable tensor's values.
pub struct ParamRef<'m> {
    pub name: String,
    pub data: &'m mut [f64],
}

impl<'m> ParamRef<'m> {
    pub fn new(name: impl Into<String>, data: &'m mut [f64]) -> Self {
        ParamRef {
            name: name.into(),
            data,
        }
    }
}

/// Bias-corrected Adam moments for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn for_params(params: &[ParamRef<'_>]) -> Self {
        Self::new(&params.iter().map(|p| p.data.len()).collect::<Vec<_>>())
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// One update of every parameter in `params` with the matching entry of
    /// `grads`. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [ParamRef<'_>], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "adam: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.data.len() != g.len() || m.len() != g.len() {
                return Err(Error::InvalidArgument(format!(
                    "adam: `{}` has {} values but {} gradients",
                    p.name,
                    p.data.len(),
                    g.len()
                )));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], grads[i]);
            for j in 0..g.len() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p.data[j] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut x = vec![1.5, -2.0];
        let mut st = AdamState::new(&[2]);
        for _ in 0..10 {
            st.step(&mut [ParamRef::new("x", &mut x)], &[&[0.0, 0.0]], 0.001).unwrap();
        }
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut x = vec![0.0];
        let mut st = AdamState::new(&[1]);
        st.step(&mut [ParamRef::new("x", &mut x)], &[&[1.0]], 0.001).unwrap();
        assert_abs_diff_eq!(x[0], -0.001, epsilon = 1e-10);
    }

    #[test]
    fn non_finite_gradient_names_parameter_and_leaves_values() {
        let mut x = vec![1.0];
        let mut st = AdamState::new(&[1]);
        let err = st
            .step(&mut [ParamRef::new("kb.gru.w_update", &mut x)], &[&[f64::NAN]], 0.001)
            .unwrap_err();
        assert!(err.to_string().contains("kb.gru.w_update"));
        assert_eq!(x, vec![1.0]);
        assert_eq!(st.timestep(), 0);
    }
}
