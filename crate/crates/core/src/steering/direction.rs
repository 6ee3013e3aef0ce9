use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transformer::{ActivationDataset, HeadId};

/// Per-class mean activations of one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub head: HeadId,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
}

/// A unit steering direction with its projection scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringDirection {
    pub head: HeadId,
    pub v: Vec<f64>,
    pub sigma: f64,
}

/// Class means of `head` over every row of the dataset.
pub fn class_means(ds: &ActivationDataset, head: HeadId) -> Result<ClassMeans> {
    let dim = ds.head_dim;
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (r, &label) in ds.labels.iter().enumerate() {
        let class = usize::from(label);
        counts[class] += 1;
        for (s, x) in sums[class].iter_mut().zip(ds.row(r, head)) {
            *s += x;
        }
    }
    if counts.contains(&0) {
        return Err(Error::SingleClass);
    }
    let [s0, s1] = sums;
    let mean = |s: Vec<f64>, n: usize| s.into_iter().map(|x| x / n as f64).collect();
    Ok(ClassMeans { head, mu0: mean(s0, counts[0]), mu1: mean(s1, counts[1]) })
}

/// `(mu1 - mu0) / ||mu1 - mu0||`.
pub fn compute_direction(means: &ClassMeans) -> Result<Vec<f64>> {
    if means.mu0.len() != means.mu1.len() {
        return Err(Error::InvalidArgument("class means differ in dimension".into()));
    }
    let diff: Vec<f64> = means.mu1.iter().zip(&means.mu0).map(|(a, b)| a - b).collect();
    let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    Ok(diff.into_iter().map(|x| x / norm).collect())
}

/// Population standard deviation of the projections `x · v`.
pub fn compute_sigma<R: AsRef<[f64]>>(rows: &[R], v: &[f64]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("sigma needs at least two rows".into()));
    }
    let proj: Vec<f64> = rows
        .iter()
        .map(|r| {
            let r = r.as_ref();
            if r.len() != v.len() {
                return Err(Error::InvalidArgument("row and direction differ in dimension".into()));
            }
            Ok(r.iter().zip(v).map(|(a, b)| a * b).sum())
        })
        .collect::<Result<_>>()?;
    let n = proj.len() as f64;
    let mean = proj.iter().sum::<f64>() / n;
    Ok((proj.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n).sqrt())
}

/// Direction and sigma for `head`, both from all dataset rows.
pub fn steering_direction(ds: &ActivationDataset, head: HeadId) -> Result<SteeringDirection> {
    let v = compute_direction(&class_means(ds, head)?)?;
    let sigma = compute_sigma(&ds.head_rows(head), &v)?;
    Ok(SteeringDirection { head, v, sigma })
}
