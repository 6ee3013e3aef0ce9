use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SteeringDirection;
use crate::error::{Error, Result};
use crate::transformer::HeadId;

/// Steering direction: toward class 1 (`+1`) or class 0 (`-1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" | "+" | "pos" | "positive" => Ok(Sign::Positive),
            "-1" | "-" | "neg" | "negative" => Ok(Sign::Negative),
            other => Err(Error::InvalidArgument(format!("sign `{other}`: expected +1 or -1"))),
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+1",
            Sign::Negative => "-1",
        })
    }
}

/// Heads to steer, with a shared strength and sign.
///
/// Applying the plan adds `sign · alpha · sigma · v` to each listed head's
/// output before the output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionPlan {
    directions: Vec<SteeringDirection>,
    alpha: f64,
    sign: Sign,
}

/// One line of a plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub layer: usize,
    pub head: usize,
    pub v: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub sign: Sign,
}

impl InterventionPlan {
    pub fn new(directions: Vec<SteeringDirection>, alpha: f64, sign: Sign) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::MalformedPlan("a plan needs at least one head".into()));
        }
        if !alpha.is_finite() {
            return Err(Error::MalformedPlan(format!("alpha {alpha} is not finite")));
        }
        let heads: BTreeSet<HeadId> = directions.iter().map(|d| d.head).collect();
        if heads.len() != directions.len() {
            return Err(Error::MalformedPlan("heads must be distinct".into()));
        }
        for d in &directions {
            if !(d.sigma.is_finite() && d.sigma >= 0.0) {
                return Err(Error::MalformedPlan(format!("sigma {} for head {} is invalid", d.sigma, d.head)));
            }
            let norm = d.v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::MalformedPlan(format!("direction for head {} has norm {norm}", d.head)));
            }
        }
        Ok(InterventionPlan { directions, alpha, sign })
    }

    pub fn directions(&self) -> &[SteeringDirection] {
        &self.directions
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        InterventionPlan::new(self.directions.clone(), alpha, self.sign)
    }

    pub fn with_sign(&self, sign: Sign) -> Self {
        InterventionPlan { sign, ..self.clone() }
    }

    /// The same plan with the sign flipped.
    pub fn negated(&self) -> Self {
        self.with_sign(self.sign.flipped())
    }

    /// The first `k` directions, in plan order.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.directions.len() {
            return Err(Error::InvalidArgument(format!("K = {k} outside 1..={}", self.directions.len())));
        }
        InterventionPlan::new(self.directions[..k].to_vec(), self.alpha, self.sign)
    }

    /// Additive offset per head.
    pub fn offsets(&self) -> Vec<(HeadId, Vec<f64>)> {
        let scale = self.sign.value() * self.alpha;
        self.directions
            .iter()
            .map(|d| (d.head, d.v.iter().map(|x| scale * d.sigma * x).collect()))
            .collect()
    }

    pub fn entries(&self) -> Vec<PlanEntry> {
        self.directions
            .iter()
            .map(|d| PlanEntry {
                layer: d.head.layer,
                head: d.head.head,
                v: d.v.clone(),
                sigma: d.sigma,
                alpha: self.alpha,
                sign: self.sign,
            })
            .collect()
    }

    pub fn from_entries(entries: Vec<PlanEntry>) -> Result<Self> {
        let first = entries.first().ok_or_else(|| Error::MalformedPlan("empty plan file".into()))?;
        let (alpha, sign) = (first.alpha, first.sign);
        if entries.iter().any(|e| e.alpha != alpha || e.sign != sign) {
            return Err(Error::MalformedPlan("alpha and sign must agree across entries".into()));
        }
        let directions = entries
            .into_iter()
            .map(|e| SteeringDirection { head: HeadId::new(e.layer, e.head), v: e.v, sigma: e.sigma })
            .collect();
        InterventionPlan::new(directions, alpha, sign)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries()).expect("plan serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<PlanEntry> = serde_json::from_str(text).map_err(|e| Error::MalformedPlan(e.to_string()))?;
        Self::from_entries(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Pairs selected heads with their directions and sigmas.
pub fn build_plan(heads: &[HeadId], directions: &[Vec<f64>], sigmas: &[f64], alpha: f64, sign: Sign) -> Result<InterventionPlan> {
    if heads.len() != directions.len() || heads.len() != sigmas.len() {
        return Err(Error::MalformedPlan(format!(
            "mismatched lists: {} heads, {} directions, {} sigmas",
            heads.len(),
            directions.len(),
            sigmas.len()
        )));
    }
    let dirs = heads
        .iter()
        .zip(directions)
        .zip(sigmas)
        .map(|((&head, v), &sigma)| SteeringDirection { head, v: v.clone(), sigma })
        .collect();
    InterventionPlan::new(dirs, alpha, sign)
}
