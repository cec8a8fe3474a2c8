//! Task objectives `F(q)`, their thresholds, and per-point quasi-gradients `g`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{check_epsilon, moments_of};
use crate::error::{Error, Result};
use crate::geometry::{
    generalized_rayleigh_sup, pseudo_inverse, quartic_ratio_sup, top_eigendirection_of, Centering,
};
use crate::{WeightVector, WeightedDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MeanBoundedCov,
    MeanIdentityCov,
    Regression,
    Joint,
}

/// Which closed form to use for the noise threshold `σ'²` in regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseThresholdForm {
    /// Numerator factor `1 + 2κ'√(ε(1-ε))`.
    #[default]
    Statement,
    /// Numerator factor `1 - 2ε + 2κ'√(ε(1-ε))`.
    Proof,
}

/// Tuning for the identity-covariance mean solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub tau: f64,
    pub rho: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c1: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            rho: 0.0,
            beta: 0.5,
            gamma: 0.1,
            c1: 32.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskParams {
    MeanBoundedCov {
        sigma2: f64,
    },
    MeanIdentityCov(IdentityParams),
    Regression {
        kappa2: f64,
        sigma2: f64,
        #[serde(default)]
        form: NoiseThresholdForm,
        /// Overrides `κ'²`.
        #[serde(default)]
        hyper_threshold: Option<f64>,
    },
    Joint {
        kappa2: f64,
    },
}

/// A task, its contamination level, and an optional override of the threshold
/// `ξ` (for regression: of `σ'²`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskObjective {
    pub epsilon: f64,
    pub params: TaskParams,
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl TaskObjective {
    pub fn mean_bounded_cov(epsilon: f64, sigma2: f64) -> Self {
        Self {
            epsilon,
            params: TaskParams::MeanBoundedCov { sigma2 },
            threshold: None,
        }
    }

    pub fn mean_identity_cov(epsilon: f64, params: IdentityParams) -> Self {
        Self {
            epsilon,
            params: TaskParams::MeanIdentityCov(params),
            threshold: None,
        }
    }

    pub fn regression(epsilon: f64, kappa2: f64, sigma2: f64) -> Self {
        Self {
            epsilon,
            params: TaskParams::Regression {
                kappa2,
                sigma2,
                form: NoiseThresholdForm::Statement,
                hyper_threshold: None,
            },
            threshold: None,
        }
    }

    pub fn joint(epsilon: f64, kappa2: f64) -> Self {
        Self {
            epsilon,
            params: TaskParams::Joint { kappa2 },
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, xi: f64) -> Self {
        self.threshold = Some(xi);
        self
    }

    pub fn task(&self) -> Task {
        match self.params {
            TaskParams::MeanBoundedCov { .. } => Task::MeanBoundedCov,
            TaskParams::MeanIdentityCov(_) => Task::MeanIdentityCov,
            TaskParams::Regression { .. } => Task::Regression,
            TaskParams::Joint { .. } => Task::Joint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("{v} must be positive and finite"),
                ))
            }
        };
        if let Some(xi) = self.threshold {
            if !xi.is_finite() || xi < 0.0 {
                return Err(Error::param(
                    "xi",
                    format!("{xi} must be nonnegative and finite"),
                ));
            }
        }
        match &self.params {
            TaskParams::MeanBoundedCov { sigma2 } => positive("sigma", *sigma2),
            TaskParams::MeanIdentityCov(p) => {
                positive("tau", p.tau)?;
                positive("beta", p.beta)?;
                positive("c1", p.c1)?;
                if !(p.rho.is_finite() && p.rho >= 0.0) {
                    return Err(Error::param(
                        "rho",
                        format!("{} must be nonnegative", p.rho),
                    ));
                }
                if !(p.gamma > 0.0 && p.gamma < 1.0) {
                    return Err(Error::param(
                        "gamma",
                        format!("{} is outside (0, 1)", p.gamma),
                    ));
                }
                Ok(())
            }
            TaskParams::Regression {
                kappa2,
                sigma2,
                hyper_threshold,
                ..
            } => {
                positive("kappa", *kappa2)?;
                positive("sigma", *sigma2)?;
                if let Some(h) = hyper_threshold {
                    positive("hyper_threshold", *h)?;
                } else if 2.0 * kappa2 * self.epsilon >= 1.0 {
                    return Err(Error::param("kappa", "2κ²ε must be below 1"));
                }
                Ok(())
            }
            TaskParams::Joint { kappa2 } => {
                positive("kappa", *kappa2)?;
                if kappa2 * self.epsilon > 0.25 {
                    return Err(Error::param(
                        "kappa",
                        format!("κ²ε = {} exceeds 1/4", kappa2 * self.epsilon),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// `2(1-ε)σ² / (1-2ε)²`, the filter threshold for bounded covariance.
pub fn filter_threshold_mean(epsilon: f64, sigma2: f64) -> f64 {
    2.0 * (1.0 - epsilon) * sigma2 / (1.0 - 2.0 * epsilon).powi(2)
}

/// `((2η+7) / (3(1-(3+η)ε)))² σ²`, the explicit low-regret threshold.
pub fn mwu_threshold_mean(epsilon: f64, sigma2: f64, eta: f64) -> Result<f64> {
    let base = 1.0 - (3.0 + eta) * epsilon;
    if base <= 0.0 {
        return Err(Error::param(
            "epsilon",
            format!("(3 + η)ε = {} must be below 1", (3.0 + eta) * epsilon),
        ));
    }
    Ok(((2.0 * eta + 7.0) / (3.0 * base)).powi(2) * sigma2)
}

/// `1 + C₁(τ + ερ² + ε) / (1 - 3(1 + βτ/(1-γε))ε)²`.
pub fn identity_threshold(epsilon: f64, p: &IdentityParams) -> Result<f64> {
    let base = 1.0 - 3.0 * (1.0 + p.beta * p.tau / (1.0 - p.gamma * epsilon)) * epsilon;
    if base <= 0.0 {
        return Err(Error::param(
            "epsilon",
            "identity-covariance threshold has a nonpositive denominator",
        ));
    }
    Ok(1.0 + p.c1 * (p.tau + epsilon * p.rho * p.rho + epsilon) / (base * base))
}

/// `49κ²`, i.e. `κ'²` with `κ' = 7κ`.
pub fn joint_threshold(kappa2: f64) -> f64 {
    49.0 * kappa2
}

/// `κ'² = 2κ² / (1 - 2κ²ε)`.
pub fn regression_hyper_threshold(epsilon: f64, kappa2: f64) -> Result<f64> {
    let base = 1.0 - 2.0 * kappa2 * epsilon;
    if base <= 0.0 {
        return Err(Error::param("kappa", "2κ²ε must be below 1"));
    }
    Ok(2.0 * kappa2 / base)
}

/// `σ'² = 4σ² N / ((1-2ε)³ - 20κ'³ε(1-ε))` with `N` chosen by `form`.
pub fn regression_noise_threshold(
    epsilon: f64,
    kappa2: f64,
    sigma2: f64,
    form: NoiseThresholdForm,
) -> Result<f64> {
    let kp = regression_hyper_threshold(epsilon, kappa2)?.sqrt();
    let spread = 2.0 * kp * (epsilon * (1.0 - epsilon)).sqrt();
    let numerator = match form {
        NoiseThresholdForm::Statement => 1.0 + spread,
        NoiseThresholdForm::Proof => 1.0 - 2.0 * epsilon + spread,
    };
    let denominator = (1.0 - 2.0 * epsilon).powi(3) - 20.0 * kp.powi(3) * epsilon * (1.0 - epsilon);
    if denominator <= 0.0 {
        return Err(Error::param(
            "epsilon",
            format!("noise threshold denominator is {denominator:.3e}; ε is too large for κ'³ (pass an explicit threshold)"),
        ));
    }
    Ok(4.0 * sigma2 * numerator / denominator)
}

/// `F(q)`, the direction attaining it, and the quasi-gradient `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub direction: DVector<f64>,
    pub g: Vec<f64>,
    /// Regression coefficients `θ(q)`, for the noise objective.
    pub theta: Option<DVector<f64>>,
    /// Set when the normal equations were singular and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// `‖Σ_q‖` by power iteration and `g_i = (vᵀ(X_i - μ_q))²`.
pub fn eval_mean_bounded<R: Rng + ?Sized>(
    data: &WeightedDataset,
    q: &WeightVector,
    gamma: f64,
    rng: &mut R,
) -> Result<ObjectiveEval> {
    data.check_weights(q)?;
    let m = moments_of(data.points(), q.as_slice());
    let dir = top_eigendirection_of(&m.cov, gamma, rng)?;
    let shift = dir.direction.dot(&m.mean);
    let g = (data.points() * &dir.direction)
        .iter()
        .map(|p| (p - shift).powi(2))
        .collect();
    Ok(ObjectiveEval {
        value: dir.value,
        direction: dir.direction,
        g,
        theta: None,
        pseudo_inverse: false,
    })
}

/// As [`eval_mean_bounded`] but with `g_i = (vᵀ(X_i - μ_q))² - 1` when `shifted`.
pub fn eval_mean_identity<R: Rng + ?Sized>(
    data: &WeightedDataset,
    q: &WeightVector,
    gamma: f64,
    shifted: bool,
    rng: &mut R,
) -> Result<ObjectiveEval> {
    let mut eval = eval_mean_bounded(data, q, gamma, rng)?;
    if shifted {
        eval.g.iter_mut().for_each(|g| *g -= 1.0);
    }
    Ok(eval)
}

/// Weighted least squares `θ(q) = (Σ q_i X_i X_iᵀ)⁺ Σ q_i X_i Y_i`.
pub fn ols_theta(data: &WeightedDataset, q: &WeightVector) -> Result<(DVector<f64>, bool)> {
    data.check_weights(q)?;
    let y = data
        .responses()
        .ok_or_else(|| Error::InvalidInput("regression needs responses".into()))?;
    let x = data.points();
    let mut scaled = x.clone();
    for (mut row, &w) in scaled.row_iter_mut().zip(q.as_slice()) {
        row *= w;
    }
    let gram = x.tr_mul(&scaled);
    let gram = (&gram + gram.transpose()) * 0.5;
    let moment = scaled.tr_mul(y);
    let (pinv, truncated) = pseudo_inverse(&gram);
    Ok((pinv * moment, truncated))
}

/// Residuals `Y_i - θᵀX_i`.
pub fn residuals(data: &WeightedDataset, theta: &DVector<f64>) -> Result<Vec<f64>> {
    let y = data
        .responses()
        .ok_or_else(|| Error::InvalidInput("regression needs responses".into()))?;
    Ok((y - data.points() * theta).iter().copied().collect())
}

/// Covariate hypercontractivity `F1(q) = sup_v E_q[(vᵀX)⁴] / E_q[(vᵀX)²]²`, with
/// `g_i = (vᵀX_i)⁴`.
pub fn eval_regression_hyper<R: Rng + ?Sized>(
    data: &WeightedDataset,
    q: &WeightVector,
    restarts: usize,
    rng: &mut R,
) -> Result<ObjectiveEval> {
    let dir = quartic_ratio_sup(data, q, Centering::Uncentered, restarts, rng)?;
    let g = (data.points() * &dir.direction)
        .iter()
        .map(|p| p.powi(4))
        .collect();
    Ok(ObjectiveEval {
        value: dir.value,
        direction: dir.direction,
        g,
        theta: None,
        pseudo_inverse: false,
    })
}

/// Bounded noise `F2(q) = sup_v E_q[r²(vᵀX)²] / E_q[(vᵀX)²]` at `θ(q)`, with
/// `g_i = r_i² (vᵀX_i)²`.
pub fn eval_regression_noise(data: &WeightedDataset, q: &WeightVector) -> Result<ObjectiveEval> {
    let (theta, pinv) = ols_theta(data, q)?;
    let r = residuals(data, &theta)?;
    let dir = generalized_rayleigh_sup(data, q, &r)?;
    let g = (data.points() * &dir.direction)
        .iter()
        .zip(&r)
        .map(|(p, ri)| ri * ri * p * p)
        .collect();
    Ok(ObjectiveEval {
        value: dir.value,
        direction: dir.direction,
        g,
        theta: Some(theta),
        pseudo_inverse: pinv,
    })
}

/// Centered hypercontractivity with `g_i = (vᵀ(X_i - μ_q))⁴`.
pub fn eval_joint<R: Rng + ?Sized>(
    data: &WeightedDataset,
    q: &WeightVector,
    restarts: usize,
    rng: &mut R,
) -> Result<ObjectiveEval> {
    let dir = quartic_ratio_sup(data, q, Centering::Centered, restarts, rng)?;
    let mean = data.points().tr_mul(&q.to_dvector());
    let shift = dir.direction.dot(&mean);
    let g = (data.points() * &dir.direction)
        .iter()
        .map(|p| (p - shift).powi(4))
        .collect();
    Ok(ObjectiveEval {
        value: dir.value,
        direction: dir.direction,
        g,
        theta: None,
        pseudo_inverse: false,
    })
}

/// Outcome of checking `E_q[g] - E_p[g] ≤ α E_p[|g|] + β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuasiGradientCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; nonpositive when the condition holds.
    pub slack: f64,
    pub holds: bool,
}

pub fn quasigradient_condition(
    q: &WeightVector,
    p: &WeightVector,
    g: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<QuasiGradientCheck> {
    if q.len() != p.len() || g.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: g.len().min(p.len()),
        });
    }
    let (q, p) = (q.as_slice(), p.as_slice());
    let lhs: f64 = q
        .iter()
        .zip(p)
        .zip(g)
        .map(|((a, b), gi)| (a - b) * gi)
        .sum();
    let rhs = alpha * p.iter().zip(g).map(|(b, gi)| b * gi.abs()).sum::<f64>() + beta;
    let slack = lhs - rhs;
    Ok(QuasiGradientCheck {
        lhs,
        rhs,
        slack,
        holds: slack <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn outlier_instance() -> WeightedDataset {
        let mut xs = vec![0.0; 9];
        xs.push(10.0);
        WeightedDataset::new(DMatrix::from_column_slice(10, 1, &xs)).unwrap()
    }

    #[test]
    fn outlier_mean_objective() {
        let data = outlier_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = eval_mean_bounded(&data, &WeightVector::uniform(10), 0.1, &mut rng).unwrap();
        assert_relative_eq!(e.value, 9.0, epsilon = 1e-12);
        assert_relative_eq!(e.g[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.g[9], 81.0, epsilon = 1e-12);
    }

    #[test]
    fn outlier_condition_slack() {
        let data = outlier_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = eval_mean_bounded(&data, &WeightVector::uniform(10), 0.1, &mut rng).unwrap();
        let p = WeightVector::uniform_on(10, &(0..9).collect::<Vec<_>>()).unwrap();
        let c = quasigradient_condition(&WeightVector::uniform(10), &p, &e.g, 0.0, 0.0).unwrap();
        assert_relative_eq!(c.slack, 8.0, epsilon = 1e-12);
        assert!(!c.holds);
    }

    #[test]
    fn identity_shift() {
        let data = outlier_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = eval_mean_identity(&data, &WeightVector::uniform(10), 0.1, true, &mut rng).unwrap();
        assert_relative_eq!(e.g[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.g[9], 80.0, epsilon = 1e-12);
    }

    #[test]
    fn thresholds() {
        assert_relative_eq!(filter_threshold_mean(0.1, 1.0), 2.8125, epsilon = 1e-15);
        assert_relative_eq!(
            mwu_threshold_mean(0.1, 1.0, 1.0).unwrap(),
            25.0,
            epsilon = 1e-12
        );
        assert!(mwu_threshold_mean(0.25, 1.0, 1.0).is_err());
        assert_relative_eq!(joint_threshold(3.0), 147.0);
        assert_relative_eq!(
            regression_hyper_threshold(0.01, 1.0).unwrap(),
            2.0 / 0.98,
            epsilon = 1e-15
        );
        let s = regression_noise_threshold(1e-4, 1.0, 1.0, NoiseThresholdForm::Statement).unwrap();
        let p = regression_noise_threshold(1e-4, 1.0, 1.0, NoiseThresholdForm::Proof).unwrap();
        assert!(s > p && p > 4.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_column_slice(&[1.0, 3.0, 5.0]);
        let data = WeightedDataset::new(x).unwrap().with_responses(y).unwrap();
        let (theta, pinv) = ols_theta(&data, &WeightVector::uniform(3)).unwrap();
        assert!(!pinv);
        assert_relative_eq!(theta[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(theta[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_singular_falls_back() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_column_slice(&[2.0, 4.0, 6.0]);
        let data = WeightedDataset::new(x).unwrap().with_responses(y).unwrap();
        let (theta, pinv) = ols_theta(&data, &WeightVector::uniform(3)).unwrap();
        assert!(pinv);
        assert_relative_eq!(theta[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(theta[1], 1.0, epsilon = 1e-8);
    }
}
