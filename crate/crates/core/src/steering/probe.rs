use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transformer::{ActivationDataset, HeadId};

/// Logistic-regression trainer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Fraction of each stratum used for training.
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    /// Stop once the loss changes by less than this between iterations.
    pub tolerance: f64,
    pub split_seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { train_fraction: 0.8, learning_rate: 0.1, iterations: 500, l2: 1e-3, tolerance: 1e-7, split_seed: 42 }
    }
}

/// A fitted per-head probe; weights are on the raw activation scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub head: HeadId,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub val_accuracy: f64,
    pub train_accuracy: f64,
    pub iterations: usize,
}

impl ProbeResult {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let z: f64 = self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        u8::from(z >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub config: ProbeConfig,
    pub n_train: usize,
    pub n_val: usize,
    pub results: Vec<ProbeResult>,
}

impl ProbeReport {
    /// `grid[layer][head]` of validation accuracies.
    pub fn accuracy_grid(&self) -> Vec<Vec<f64>> {
        let layers = self.results.iter().map(|r| r.head.layer + 1).max().unwrap_or(0);
        let heads = self.results.iter().map(|r| r.head.head + 1).max().unwrap_or(0);
        let mut grid = vec![vec![f64::NAN; heads]; layers];
        for r in &self.results {
            grid[r.head.layer][r.head.head] = r.val_accuracy;
        }
        grid
    }
}

/// Seeded stratified split into (train, validation) row indices.
///
/// Rows sharing a group move together; groups are stratified by their label
/// composition, so ungrouped rows are stratified by label. Every stratum
/// contributes at least one group to each side.
pub fn stratified_split(
    labels: &[u8],
    groups: Option<&[usize]>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {train_fraction} outside (0, 1)")));
    }
    if groups.is_some_and(|g| g.len() != labels.len()) {
        return Err(Error::InvalidArgument("one group per row is required".into()));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::SingleClass);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for row in 0..labels.len() {
        members.entry(groups.map_or(row, |g| g[row])).or_default().push(row);
    }
    let mut strata: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for (&group, rows) in &members {
        let mut key: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
        key.sort_unstable();
        strata.entry(key).or_default().push(group);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut ids in strata.into_values() {
        if ids.len() < 2 {
            return Err(Error::EmptyInput("a stratum needs two groups to fill both splits"));
        }
        ids.shuffle(&mut rng);
        let n_train = ((ids.len() as f64 * train_fraction).round() as usize).clamp(1, ids.len() - 1);
        for (i, id) in ids.iter().enumerate() {
            let side = if i < n_train { &mut train } else { &mut val };
            side.extend_from_slice(&members[id]);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits one probe per head on a shared stratified split.
pub fn train_probes(ds: &ActivationDataset, config: &ProbeConfig) -> Result<ProbeReport> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("activation dataset"));
    }
    let (train, val) = stratified_split(&ds.labels, ds.groups.as_deref(), config.train_fraction, config.split_seed)?;
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = ds
            .heads()
            .into_iter()
            .map(|head| {
                let (train, val) = (&train, &val);
                scope.spawn(move || fit_head(ds, head, train, val, config))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("probe fit does not panic")).collect()
    });
    Ok(ProbeReport { config: *config, n_train: train.len(), n_val: val.len(), results })
}

fn fit_head(ds: &ActivationDataset, head: HeadId, train: &[usize], val: &[usize], cfg: &ProbeConfig) -> ProbeResult {
    let dim = ds.head_dim;
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for &r in train {
        for (m, x) in mean.iter_mut().zip(ds.row(r, head)) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for &r in train {
        for ((s, x), m) in scale.iter_mut().zip(ds.row(r, head)).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    // Constant features carry no signal; zero their standardized value.
    let inv: Vec<f64> = scale.iter().map(|&v| if v > 1e-24 { 1.0 / v.sqrt() } else { 0.0 }).collect();
    let rows: Vec<(Vec<f64>, f64)> = train
        .iter()
        .map(|&r| {
            let z = ds.row(r, head).iter().zip(&mean).zip(&inv).map(|((x, m), i)| (x - m) * i).collect();
            (z, f64::from(ds.labels[r]))
        })
        .collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut prev_loss = f64::INFINITY;
    let mut iterations = 0;
    let mut grad = vec![0.0; dim];
    for it in 0..cfg.iterations {
        iterations = it + 1;
        grad.fill(0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (z, y) in &rows {
            let logit = b + z.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let p = sigmoid(logit);
            // log(1 + e^l) - y·l, computed stably
            loss += logit.max(0.0) + (-logit.abs()).exp().ln_1p() - y * logit;
            let e = p - y;
            grad_b += e;
            for (g, zi) in grad.iter_mut().zip(z) {
                *g += e * zi;
            }
        }
        loss = loss / n + 0.5 * cfg.l2 * w.iter().map(|x| x * x).sum::<f64>();
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= cfg.learning_rate * (g / n + cfg.l2 * *wi);
        }
        b -= cfg.learning_rate * grad_b / n;
        if (prev_loss - loss).abs() < cfg.tolerance {
            break;
        }
        prev_loss = loss;
    }

    let weights: Vec<f64> = w.iter().zip(&inv).map(|(wi, i)| wi * i).collect();
    let bias = b - weights.iter().zip(&mean).map(|(wi, m)| wi * m).sum::<f64>();
    let mut probe = ProbeResult { head, weights, bias, val_accuracy: 0.0, train_accuracy: 0.0, iterations };
    let accuracy = |idx: &[usize]| {
        idx.iter().filter(|&&r| probe.predict(ds.row(r, head)) == ds.labels[r]).count() as f64 / idx.len() as f64
    };
    let (va, ta) = (accuracy(val), accuracy(train));
    probe.val_accuracy = va;
    probe.train_accuracy = ta;
    probe
}

/// The `k` most accurate heads; ties go to the lower (layer, head).
pub fn select_top_heads(results: &[ProbeResult], k: usize) -> Result<Vec<HeadId>> {
    if k == 0 || k > results.len() {
        return Err(Error::InvalidArgument(format!("K = {k} outside 1..={}", results.len())));
    }
    let mut ranked: Vec<&ProbeResult> = results.iter().collect();
    ranked.sort_by(|a, b| b.val_accuracy.total_cmp(&a.val_accuracy).then(a.head.cmp(&b.head)));
    Ok(ranked.into_iter().take(k).map(|r| r.head).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(layer: usize, head: usize, acc: f64) -> ProbeResult {
        ProbeResult { head: HeadId::new(layer, head), weights: vec![], bias: 0.0, val_accuracy: acc, train_accuracy: acc, iterations: 0 }
    }

    #[test]
    fn top_heads_and_ties() {
        let r = [result(0, 0, 0.9), result(0, 1, 0.6), result(0, 2, 0.8)];
        assert_eq!(select_top_heads(&r, 2).unwrap(), [HeadId::new(0, 0), HeadId::new(0, 2)]);
        let tied = [result(1, 0, 0.5), result(0, 1, 0.5), result(0, 0, 0.5)];
        assert_eq!(select_top_heads(&tied, 2).unwrap(), [HeadId::new(0, 0), HeadId::new(0, 1)]);
        assert!(select_top_heads(&r, 0).is_err());
        assert!(select_top_heads(&r, 4).is_err());
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 4 == 0)).collect();
        let (train, val) = stratified_split(&labels, None, 0.8, 7).unwrap();
        assert_eq!(train.len() + val.len(), 100);
        assert!(train.iter().all(|i| !val.contains(i)));
        assert_eq!(val.iter().filter(|&&i| labels[i] == 1).count(), 5);
        assert!(matches!(stratified_split(&[1, 1, 1], None, 0.8, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn groups_never_straddle() {
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let groups: Vec<usize> = (0..40).map(|i| i / 2).collect();
        let (train, val) = stratified_split(&labels, Some(&groups), 0.8, 3).unwrap();
        assert_eq!((train.len(), val.len()), (32, 8));
        assert!(val.iter().all(|&i| val.contains(&(i ^ 1))));
        assert!(stratified_split(&labels, Some(&groups[..3]), 0.8, 3).is_err());
    }
}
