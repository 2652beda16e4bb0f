use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::report::SequenceReport;
use crate::error::{Error, Result};

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean final accuracy over every task of every sequence.
pub fn all_tasks_average(reports: &[SequenceReport]) -> Result<f64> {
    mean(reports.iter().flat_map(|r| r.final_acc.iter().copied()))
        .ok_or_else(|| Error::InvalidArgument("all-tasks average of no reports".into()))
}

/// Mean over sequences of the final accuracy of the last task learned.
pub fn last_task_average(reports: &[SequenceReport]) -> Result<f64> {
    mean(reports.iter().filter_map(|r| r.final_acc.last().copied()))
        .ok_or_else(|| Error::InvalidArgument("last-task average of no reports".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    /// Number of tasks learned.
    pub tasks: usize,
    /// Mean first-learn accuracy of the first `tasks` tasks.
    pub forward: f64,
    /// Mean accuracy of those tasks once all `tasks` of them are learned.
    pub backward: f64,
}

/// Forward/backward accuracies after the first `k` tasks, for each `k` in `checkpoints`.
pub fn transfer_table(reports: &[SequenceReport], checkpoints: &[usize]) -> Result<Vec<TransferRow>> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("transfer table of no reports".into()));
    }
    checkpoints
        .iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::InvalidArgument("checkpoint 0 has no tasks".into()));
            }
            if let Some(r) = reports.iter().find(|r| r.first_learn.len() < k || r.acc_matrix.len() < k) {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint {k} beyond the {} tasks of sequence {}",
                    r.first_learn.len(),
                    r.sequence
                )));
            }
            let forward = mean(reports.iter().flat_map(|r| r.first_learn[..k].iter().copied()));
            let backward = mean(reports.iter().flat_map(|r| r.acc_matrix[k - 1][..k].iter().copied()));
            Ok(TransferRow {
                tasks: k,
                forward: forward.expect("k > 0"),
                backward: backward.expect("k > 0"),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean_diff: f64,
    /// `None` when the differences have no spread around a nonzero mean.
    pub t: Option<f64>,
    pub p: f64,
}

/// Two-sided paired Student t-test of `a` against `b`.
///
/// With zero variance of the differences, p is 1 for a zero mean and 0 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "paired t-test needs two equal samples of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("t-test sample".into()));
    }
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(d.iter().copied()).expect("n >= 2");
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    // Differences that agree to rounding are treated as exactly constant.
    let scale = d.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if var.sqrt() <= 1e-12 * scale {
        let zero_mean = m.abs() <= 1e-12 * scale;
        return Ok(TTest {
            n,
            mean_diff: m,
            t: zero_mean.then_some(0.0),
            p: if zero_mean { 1.0 } else { 0.0 },
        });
    }
    let t = m / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(TTest {
        n,
        mean_diff: m,
        t: Some(t),
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kan::ModelKind;
    use approx::assert_abs_diff_eq;

    fn report(first: Vec<f64>, matrix: Vec<Vec<f64>>) -> SequenceReport {
        SequenceReport {
            model: ModelKind::Kan,
            sequence: 0,
            seed: 0,
            order: (0..first.len()).map(|i| format!("t{i}")).collect(),
            final_acc: matrix.last().cloned().unwrap(),
            first_learn: first,
            acc_matrix: matrix,
        }
    }

    #[test]
    fn averages() {
        let r = report(vec![0.7, 0.9], vec![vec![0.7], vec![0.8, 0.9]]);
        assert_abs_diff_eq!(all_tasks_average(&[r.clone()]).unwrap(), 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(
            all_tasks_average(&[r.clone(), r.clone()]).unwrap(),
            all_tasks_average(&[r.clone()]).unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(last_task_average(&[r]).unwrap(), 0.9);
        assert!(all_tasks_average(&[]).is_err());
    }

    #[test]
    fn transfer_rows() {
        let r = report(vec![0.7, 0.9], vec![vec![0.7], vec![0.8, 0.9]]);
        let rows = transfer_table(&[r.clone()], &[1, 2]).unwrap();
        assert_eq!(rows[0].forward, 0.7);
        assert_eq!(rows[0].backward, 0.7);
        assert_abs_diff_eq!(rows[1].forward, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[1].backward, 0.85, epsilon = 1e-15);
        assert_eq!(rows[1].backward, all_tasks_average(&[r.clone()]).unwrap());
        assert!(transfer_table(&[r], &[3]).is_err());
    }

    #[test]
    fn degenerate_t_tests() {
        let a = [0.8, 0.9, 0.7];
        let same = paired_t_test(&a, &a).unwrap();
        assert_eq!((same.t, same.p), (Some(0.0), 1.0));
        assert_eq!(paired_t_test(&[1.0, 0.0], &[0.0, 1.0]).unwrap().p, 1.0);
        assert_eq!(paired_t_test(&[2.0; 4], &[1.0; 4]).unwrap().p, 0.0);
        assert_eq!(paired_t_test(&[0.85, 0.9, 0.8], &[0.8, 0.85, 0.75]).unwrap().p, 0.0);
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn sign_swap_keeps_p() {
        let a = [0.85, 0.9, 0.8];
        let b = [0.80, 0.84, 0.76];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.p, ba.p);
        assert_eq!(ab.t.unwrap(), -ba.t.unwrap());
    }
}
