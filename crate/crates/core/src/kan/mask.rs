use crate::autodiff::{sigmoid, Tensor};
use crate::error::{Error, Result};

/// Mask scale for batch `b` (1-based) of `batches` in an epoch: linear from
/// `1/s_max` at the first batch to exactly `s_max` at the last. A one-batch
/// epoch uses `s_max` directly.
pub fn anneal_s(b: usize, batches: usize, s_max: f64) -> Result<f64> {
    if batches == 0 {
        return Err(Error::InvalidArgument("anneal_s: epoch has no batches".into()));
    }
    if b == 0 || b > batches {
        return Err(Error::InvalidArgument(format!(
            "anneal_s: batch index {b} outside 1..={batches}"
        )));
    }
    if !(s_max > 1.0) {
        return Err(Error::InvalidArgument(format!("anneal_s: s_max {s_max} must exceed 1")));
    }
    if b == batches {
        return Ok(s_max);
    }
    let lo = 1.0 / s_max;
    Ok(lo + (s_max - lo) * (b - 1) as f64 / (batches - 1) as f64)
}

/// Accessibility of every knowledge-base hidden unit for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskMask {
    /// `[1, hidden]`, entries in `[0, 1]`.
    pub values: Tensor,
    /// Scale the mask was derived with (`s_max` for retrieved masks).
    pub scale: f64,
}

impl TaskMask {
    pub fn ones(hidden: usize) -> Self {
        TaskMask {
            values: Tensor::ones(&[1, hidden]),
            scale: f64::INFINITY,
        }
    }

    /// Thresholds at 0.5: entries at or above become 1, the rest 0.
    pub fn binarize(&self) -> TaskMask {
        TaskMask {
            values: self.values.map(|a| if a >= 0.5 { 1.0 } else { 0.0 }),
            scale: self.scale,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.values.data().iter().all(|&a| a == 0.0 || a == 1.0)
    }

    pub fn accessible(&self) -> usize {
        self.values.data().iter().filter(|&&a| a >= 0.5).count()
    }
}

/// `σ(s · e_t)` for row `t` of the task-embedding table.
pub fn compute_mask(t: usize, s: f64, task_embeddings: &Tensor) -> Result<TaskMask> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("mask scale {s} must be positive")));
    }
    if task_embeddings.shape().len() != 2 || t >= task_embeddings.shape()[0] {
        return Err(Error::MissingTaskEmbedding(t));
    }
    let row = task_embeddings.row(t).iter().map(|&e| sigmoid(s * e)).collect();
    Ok(TaskMask {
        values: Tensor::new(vec![1, task_embeddings.last_dim()], row)?,
        scale: s,
    })
}

/// The binary mask used at test time and during the main training phase.
pub fn retrieve_mask(t: usize, s_max: f64, task_embeddings: &Tensor) -> Result<TaskMask> {
    Ok(compute_mask(t, s_max, task_embeddings)?.binarize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn anneal_endpoints_are_exact() {
        assert_eq!(anneal_s(1, 100, 140.0).unwrap(), 1.0 / 140.0);
        assert_eq!(anneal_s(100, 100, 140.0).unwrap(), 140.0);
    }

    #[test]
    fn anneal_midpoint() {
        // 1/140 + (140 - 1/140) * 49/99
        let expected = 1.0 / 140.0 + (140.0 - 1.0 / 140.0) * 49.0 / 99.0;
        assert_relative_eq!(anneal_s(50, 100, 140.0).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(anneal_s(50, 100, 140.0).unwrap(), 69.296_536_796_536_78, max_relative = 1e-12);
    }

    #[test]
    fn anneal_degenerate_epochs() {
        assert_eq!(anneal_s(1, 1, 140.0).unwrap(), 140.0);
        assert!(anneal_s(1, 0, 140.0).is_err());
        assert!(anneal_s(0, 5, 140.0).is_err());
        assert!(anneal_s(6, 5, 140.0).is_err());
        assert!(anneal_s(1, 5, 1.0).is_err());
    }

    #[test]
    fn zero_embedding_gives_half() {
        let e = Tensor::zeros(&[1, 4]);
        for s in [0.01, 1.0, 140.0] {
            let m = compute_mask(0, s, &e).unwrap();
            assert!(m.values.data().iter().all(|&a| a == 0.5));
        }
    }

    #[test]
    fn large_scale_polarizes() {
        let e = Tensor::new(vec![1, 2], vec![0.1, -0.1]).unwrap();
        let m = compute_mask(0, 140.0, &e).unwrap();
        assert_relative_eq!(m.values.data()[0], 0.999_999_168_471_972_2, max_relative = 1e-14);
        assert_relative_eq!(m.values.data()[1], 8.315_280_276_641_321e-7, max_relative = 1e-12);
        let b = m.binarize();
        assert_eq!(b.values.data(), &[1.0, 0.0]);
        assert!(b.is_binary());
    }

    #[test]
    fn unknown_row_is_an_error() {
        let e = Tensor::zeros(&[2, 3]);
        assert!(matches!(compute_mask(2, 1.0, &e), Err(Error::MissingTaskEmbedding(2))));
    }
}
