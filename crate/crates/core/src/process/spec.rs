//! Environment parameterization of the loan process.
//!
//! Every constant used by the dynamics lives here so that it can be loaded
//! from a config file. [`ProcessSpec::default`] is the reference setting.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Activity duration in days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationDist {
    Fixed { days: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl DurationDist {
    pub fn fixed(days: f64) -> Self {
        DurationDist::Fixed { days }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        DurationDist::Uniform { lo, hi }
    }

    fn is_valid(&self) -> bool {
        match *self {
            DurationDist::Fixed { days } => days.is_finite() && days >= 0.0,
            DurationDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityCost {
    pub duration: DurationDist,
    pub cost: f64,
}

impl ActivityCost {
    fn new(duration: DurationDist, cost: f64) -> Self {
        Self { duration, cost }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessSpec {
    // client draws
    pub amount_log_mean: f64,
    pub amount_log_sd: f64,
    pub amount_min: f64,
    pub amount_max: f64,
    pub quality_alpha: f64,
    pub quality_beta: f64,
    pub unc_quality_min: f64,
    pub unc_quality_max: f64,

    // customer-contact loop
    /// Probabilities of 1, 2 and 3 calls.
    pub call_count_weights: [f64; 3],
    pub uncertainty_decay: f64,

    pub initiate: ActivityCost,
    pub choose_procedure: ActivityCost,
    pub call_customer: ActivityCost,
    pub validate: ActivityCost,
    pub calculate_offer: ActivityCost,
    pub cancel: ActivityCost,
    pub receive_response: ActivityCost,
    pub contact_hq_duration: DurationDist,
    pub hq_cost_base: f64,
    pub hq_cost_per_uncertainty: f64,
    pub priority_surcharge: f64,

    /// Standard cases cancel when the final estimate is below this.
    pub cancel_threshold: f64,

    // client acceptance: z = intercept - rate_coef (r - rate_ref) - time_coef t - amount_coef A/1000
    pub accept_intercept: f64,
    pub accept_rate_coef: f64,
    pub accept_rate_ref: f64,
    pub accept_time_coef: f64,
    pub accept_amount_coef: f64,

    // discount rate: risk_free + est_coef (1 - est_quality) + unc_coef unc_quality
    pub risk_free_rate: f64,
    pub discount_est_coef: f64,
    pub discount_unc_coef: f64,

    // profit: amount * rate * interest_years * (quality_offset + quality_slope * quality)
    // The default multiplier turns negative below quality 1/3: such loans
    // cost more to service than they earn.
    pub interest_years: f64,
    pub quality_offset: f64,
    pub quality_slope: f64,
}

impl Default for ProcessSpec {
    fn default() -> Self {
        Self {
            amount_log_mean: 20_000f64.ln(),
            amount_log_sd: 0.5,
            amount_min: 5_000.0,
            amount_max: 150_000.0,
            quality_alpha: 2.0,
            quality_beta: 2.0,
            unc_quality_min: 0.1,
            unc_quality_max: 0.5,
            call_count_weights: [0.3, 0.4, 0.3],
            uncertainty_decay: 0.6,
            initiate: ActivityCost::new(DurationDist::uniform(0.1, 0.5), 10.0),
            choose_procedure: ActivityCost::new(DurationDist::fixed(0.1), 5.0),
            call_customer: ActivityCost::new(DurationDist::uniform(1.0, 3.0), 50.0),
            validate: ActivityCost::new(DurationDist::uniform(1.0, 2.0), 25.0),
            calculate_offer: ActivityCost::new(DurationDist::fixed(0.2), 10.0),
            cancel: ActivityCost::new(DurationDist::fixed(0.1), 10.0),
            receive_response: ActivityCost::new(DurationDist::fixed(0.0), 0.0),
            contact_hq_duration: DurationDist::uniform(4.0, 8.0),
            hq_cost_base: 100.0,
            hq_cost_per_uncertainty: 400.0,
            priority_surcharge: 1000.0,
            cancel_threshold: 0.3,
            accept_intercept: 3.0,
            accept_rate_coef: 55.0,
            accept_rate_ref: 0.05,
            accept_time_coef: 0.10,
            accept_amount_coef: 0.03,
            risk_free_rate: 0.03,
            discount_est_coef: 0.05,
            discount_unc_coef: 0.10,
            interest_years: 5.0,
            quality_offset: -0.5,
            quality_slope: 1.5,
        }
    }
}

/// Maximum number of customer calls in the loop.
pub const MAX_CALLS: usize = 3;

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let costs = [
            ("initiate", &self.initiate),
            ("choose_procedure", &self.choose_procedure),
            ("call_customer", &self.call_customer),
            ("validate", &self.validate),
            ("calculate_offer", &self.calculate_offer),
            ("cancel", &self.cancel),
            ("receive_response", &self.receive_response),
        ];
        for (name, ac) in costs {
            if !(ac.cost.is_finite() && ac.cost >= 0.0) || !ac.duration.is_valid() {
                return Err(SimError::Config(format!("{name}: negative cost or invalid duration")));
            }
        }
        if !self.contact_hq_duration.is_valid() {
            return Err(SimError::Config("contact_hq_duration invalid".into()));
        }
        for (name, v) in [
            ("hq_cost_base", self.hq_cost_base),
            ("hq_cost_per_uncertainty", self.hq_cost_per_uncertainty),
            ("priority_surcharge", self.priority_surcharge),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::Config(format!("{name} must be nonnegative")));
            }
        }
        if !(0.0..=1.0).contains(&self.unc_quality_min)
            || !(0.0..=1.0).contains(&self.unc_quality_max)
            || self.unc_quality_max < self.unc_quality_min
        {
            return Err(SimError::Config("uncertainty bounds must lie in [0,1]".into()));
        }
        if self.amount_min <= 0.0 || self.amount_max < self.amount_min {
            return Err(SimError::Config("amount clamp bounds invalid".into()));
        }
        if !(0.0..=1.0).contains(&self.uncertainty_decay) {
            return Err(SimError::Config("uncertainty_decay must lie in [0,1]".into()));
        }
        if self.call_count_weights.iter().any(|w| *w < 0.0) || self.call_count_weights.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::Config("call_count_weights must be nonnegative with positive sum".into()));
        }
        Ok(())
    }

    pub fn quality_factor(&self, quality: f64) -> f64 {
        self.quality_offset + self.quality_slope * quality
    }

    pub fn hq_cost(&self, unc_quality: f64) -> f64 {
        self.hq_cost_base + self.hq_cost_per_uncertainty * unc_quality
    }

    pub fn acceptance_logit(&self, rate: f64, elapsed_days: f64, amount: f64) -> f64 {
        self.accept_intercept
            - self.accept_rate_coef * (rate - self.accept_rate_ref)
            - self.accept_time_coef * elapsed_days
            - self.accept_amount_coef * (amount / 1000.0)
    }

    pub fn discount_rate(&self, est_quality: f64, unc_quality: f64) -> f64 {
        self.risk_free_rate + self.discount_est_coef * (1.0 - est_quality) + self.discount_unc_coef * unc_quality
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ProcessSpec::default().validate().unwrap();
    }

    #[test]
    fn negative_cost_rejected() {
        let mut spec = ProcessSpec::default();
        spec.validate.cost = -1.0;
        assert!(spec.validate().is_err());
        let spec = ProcessSpec {
            contact_hq_duration: DurationDist::uniform(3.0, 2.0),
            ..ProcessSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
