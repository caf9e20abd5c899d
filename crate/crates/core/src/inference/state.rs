use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{logistic, logit, softplus};

/// Block assignment `z_i ∈ {0, …, K−1}` with the Dirichlet concentration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockState {
    pub labels: Vec<usize>,
    pub n_blocks: usize,
    pub beta0: f64,
}

impl BlockState {
    pub fn new(labels: Vec<usize>, n_blocks: usize, beta0: f64) -> Result<Self> {
        let s = Self {
            labels,
            n_blocks,
            beta0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::domain("number of blocks must be at least 1"));
        }
        if let Some(z) = self.labels.iter().find(|&&z| z >= self.n_blocks) {
            return Err(Error::contract(format!(
                "label {z} out of range for {} blocks",
                self.n_blocks
            )));
        }
        if !(self.beta0 > 0.0) {
            return Err(Error::domain("beta0 must be positive"));
        }
        Ok(())
    }
}

/// Per-block measure variables `Φ_ℓ = (α_ℓ, s_ℓ, t_ℓ, u_ℓ)`: window measure,
/// mass of the selected atoms, remaining mass and Zolotarev's auxiliary
/// angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMeasure {
    pub alpha: f64,
    pub s: f64,
    pub t: f64,
    pub u: f64,
}

/// Prior on the tile interaction strengths `η_{ℓm}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InteractionPrior {
    /// `η ~ Gamma(λa, λb)`, integrated out.
    Gamma { lambda_a: f64, lambda_b: f64 },
    /// `η ≡ 1`, the `λa = λb → ∞` limit.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureState {
    pub sigma: f64,
    pub tau: f64,
    pub blocks: Vec<BlockMeasure>,
    pub interaction: InteractionPrior,
}

impl MeasureState {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_alpha(&self) -> f64 {
        self.blocks.iter().map(|b| b.alpha).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::domain(format!("sigma {} outside (0, 1)", self.sigma)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::domain(format!("tau {} must be positive", self.tau)));
        }
        if self.blocks.is_empty() {
            return Err(Error::domain("measure state has no blocks"));
        }
        for (l, b) in self.blocks.iter().enumerate() {
            let ok = b.alpha > 0.0 && b.s > 0.0 && b.t > 0.0 && b.u > 0.0 && b.u < PI;
            if !ok || !(b.alpha.is_finite() && b.s.is_finite() && b.t.is_finite()) {
                return Err(Error::domain(format!("block {l} has invalid measure {b:?}")));
            }
        }
        if let InteractionPrior::Gamma { lambda_a, lambda_b } = self.interaction {
            if !(lambda_a > 0.0 && lambda_b > 0.0) {
                return Err(Error::domain("lambda_a and lambda_b must be positive"));
            }
        }
        Ok(())
    }

    /// Maps the state to an unconstrained vector.
    ///
    /// Layout: `[logit σ, ln τ, (ln α_ℓ, ln s_ℓ, ln t_ℓ, logit(u_ℓ/π))_ℓ,
    /// (ln λa, ln λb)?]`. Also returns `ln |∂state/∂vector|` at that point.
    pub fn transform(&self) -> (Vec<f64>, f64) {
        let mut x = Vec::with_capacity(2 + 4 * self.blocks.len() + 2);
        x.push(logit(self.sigma));
        x.push(self.tau.ln());
        for b in &self.blocks {
            x.extend([b.alpha.ln(), b.s.ln(), b.t.ln(), logit(b.u / PI)]);
        }
        if let InteractionPrior::Gamma { lambda_a, lambda_b } = self.interaction {
            x.extend([lambda_a.ln(), lambda_b.ln()]);
        }
        let jac = self.log_jacobian_of(&x);
        (x, jac)
    }

    /// Inverse of [`transform`](Self::transform); the interaction mode and
    /// block count are taken from `self`.
    pub fn untransform(&self, x: &[f64]) -> (MeasureState, f64) {
        let k = self.blocks.len();
        let blocks = (0..k)
            .map(|l| {
                let o = 2 + 4 * l;
                BlockMeasure {
                    alpha: x[o].exp(),
                    s: x[o + 1].exp(),
                    t: x[o + 2].exp(),
                    u: PI * logistic(x[o + 3]),
                }
            })
            .collect();
        let interaction = match self.interaction {
            InteractionPrior::Gamma { .. } => InteractionPrior::Gamma {
                lambda_a: x[2 + 4 * k].exp(),
                lambda_b: x[3 + 4 * k].exp(),
            },
            InteractionPrior::Unit => InteractionPrior::Unit,
        };
        let state = MeasureState {
            sigma: logistic(x[0]),
            tau: x[1].exp(),
            blocks,
            interaction,
        };
        (state, self.log_jacobian_of(x))
    }

    fn log_jacobian_of(&self, x: &[f64]) -> f64 {
        // d logistic(y)/dy = p(1-p): log = -softplus(-y) - softplus(y).
        let logistic_jac = |y: f64| -softplus(-y) - softplus(y);
        let k = self.blocks.len();
        let mut jac = logistic_jac(x[0]) + x[1];
        for l in 0..k {
            let o = 2 + 4 * l;
            jac += x[o] + x[o + 1] + x[o + 2] + PI.ln() + logistic_jac(x[o + 3]);
        }
        if matches!(self.interaction, InteractionPrior::Gamma { .. }) {
            jac += x[2 + 4 * k] + x[3 + 4 * k];
        }
        jac
    }
}
