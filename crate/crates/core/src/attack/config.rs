use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorRule {
    /// Attach to the assigned target itself.
    TargetSelf,
    /// Attach to the candidate with the largest target-loss gradient norm.
    BestGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    /// Ground-truth labels of the targets.
    GroundTruth,
    /// The surrogate's own clean-graph predictions.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Weight of the injected-to-anchor similarity reward.
    pub alpha: f64,
    /// Pruning threshold of the PrSGC surrogate.
    pub epsilon: f64,
    /// Sampling depth `K`.
    pub depth: usize,
    /// Neighbors drawn per node and layer.
    pub fanout: usize,
    pub seed: u64,
    pub iterations: usize,
    pub step_size: f64,
    /// Injected nodes as a fraction of original nodes.
    pub perturbation_rate: f64,
    pub anchor_rule: AnchorRule,
    pub label_source: LabelSource,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            alpha: 1.0,
            epsilon: 0.1,
            depth: 2,
            fanout: 10,
            seed: 0,
            iterations: 200,
            step_size: 0.05,
            perturbation_rate: 0.05,
            anchor_rule: AnchorRule::TargetSelf,
            label_source: LabelSource::GroundTruth,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size {} must be finite and >= 0", self.step_size));
        }
        if !(self.perturbation_rate > 0.0 && self.perturbation_rate <= 1.0) {
            return bad(format!(
                "perturbation rate {} outside (0, 1]",
                self.perturbation_rate
            ));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be finite and >= 0", self.alpha));
        }
        if !(-1.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [-1, 1]", self.epsilon));
        }
        if self.depth == 0 || self.fanout == 0 {
            return bad("depth and fanout must be at least 1".into());
        }
        Ok(())
    }
}
