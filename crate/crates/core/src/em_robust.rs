//! Penalized robust EM: starts with one component per curve and lets an
//! entropy penalty on the proportions discard the superfluous ones.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::basis::{BasisError, DesignSpec};
use crate::dataset::Dataset;
use crate::em_standard::{m_step_regression, EmError, RegressionUpdate};
use crate::mixture_model::{penalize, posterior, proportion_entropy, DesignedData, RegressionMixture, Responsibilities};
use crate::wls::solve_normal_equations;

pub use crate::trace::{FitTrace, IterationRecord};

#[derive(Debug, Error)]
pub enum RobustError {
    #[error("invalid robust EM configuration: {0}")]
    Config(String),
    #[error("mixture collapsed: every component fell below the pruning threshold")]
    Collapsed,
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Em(#[from] EmError),
}

/// Normalizer of the second term of the adaptive λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaDenominator {
    /// `max_k π_k · (−Σ π log π)`
    #[default]
    MaxProportionEntropy,
    /// `−Σ π log π`
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustConfig {
    /// Threshold on the largest coefficient change between iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Unused by the algorithm itself, which is deterministic; kept so runs
    /// are labelled like the standard EM ones.
    pub seed: u64,
    pub lambda_denominator: LambdaDenominator,
    /// After convergence, set λ to 0 and iterate to convergence again.
    pub final_standard_phase: bool,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
            lambda_denominator: LambdaDenominator::default(),
            final_standard_phase: true,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<(), RobustError> {
        if !(self.tol > 0.0) {
            return Err(RobustError::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(RobustError::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Model, responsibilities and λ at the start of an iteration.
#[derive(Debug, Clone)]
pub struct RobustState {
    pub model: RegressionMixture,
    pub tau: Responsibilities,
    pub loglik: f64,
    pub lambda: f64,
}

fn xlogx_terms(pi: &[f64]) -> Vec<f64> {
    pi.iter().map(|&p| if p > 0.0 { p.ln() } else { 0.0 }).collect()
}

/// `η = min(1, 0.5^⌊m/2 − 1⌋)`.
pub fn eta(m: usize) -> f64 {
    let e = (m as f64 / 2.0 - 1.0).floor();
    0.5f64.powf(e).min(1.0)
}

/// Entropy-penalized proportion update.
///
/// `π_k ← τ̄_k + λ π_k^{old} (log π_k^{old} − Σ_h π_h^{old} log π_h^{old})`,
/// negative entries clamped to 0.
pub fn robust_pi_update(tau: &Responsibilities, pi_old: &[f64], lambda: f64) -> Vec<f64> {
    let mut pi = unclamped_pi_update(tau, pi_old, lambda);
    for p in &mut pi {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    pi
}

/// [`robust_pi_update`] before the clamp; sums to one exactly in exact arithmetic.
pub fn unclamped_pi_update(tau: &Responsibilities, pi_old: &[f64], lambda: f64) -> Vec<f64> {
    let means = tau.column_means();
    if lambda == 0.0 {
        return means;
    }
    let logs = xlogx_terms(pi_old);
    let weighted: f64 = pi_old.iter().zip(&logs).map(|(p, l)| p * l).sum();
    means
        .iter()
        .zip(pi_old.iter().zip(&logs))
        .map(|(m, (p, l))| m + lambda * p * (l - weighted))
        .collect()
}

/// Adaptive penalty weight for the next iteration, clamped to `[0, 1]`.
///
/// `m` is the shortest curve length.
pub fn lambda_update(
    pi_new: &[f64],
    pi_old: &[f64],
    tau: &Responsibilities,
    m: usize,
    denominator: LambdaDenominator,
) -> f64 {
    let n = tau.n() as f64;
    let k = pi_new.len() as f64;
    let e = eta(m);
    let first = pi_new
        .iter()
        .zip(pi_old)
        .map(|(a, b)| (-e * n * (a - b).abs()).exp())
        .sum::<f64>()
        / k;
    let entropy = proportion_entropy(pi_old);
    let den = match denominator {
        LambdaDenominator::Entropy => entropy,
        LambdaDenominator::MaxProportionEntropy => pi_old.iter().copied().fold(0.0, f64::max) * entropy,
    };
    if !(den > 0.0) {
        return 0.0;
    }
    let max_mean = tau.column_means().into_iter().fold(0.0, f64::max);
    let second = (1.0 - max_mean) / den;
    first.min(second).clamp(0.0, 1.0)
}

/// Drops components with `π_k < 1/n` and renormalizes `π` and each row of `τ`.
///
/// Returns the surviving model and responsibilities plus the removed
/// (0-based) component indices.
pub fn prune(
    model: &RegressionMixture,
    tau: &Responsibilities,
) -> Result<(RegressionMixture, Responsibilities, Vec<usize>), RobustError> {
    let threshold = 1.0 / tau.n() as f64;
    let (keep, pruned): (Vec<usize>, Vec<usize>) = (0..model.k()).partition(|&c| model.pi[c] >= threshold);
    if keep.is_empty() {
        return Err(RobustError::Collapsed);
    }
    let total: f64 = keep.iter().map(|&c| model.pi[c]).sum();
    let pi: Vec<f64> = keep.iter().map(|&c| model.pi[c] / total).collect();
    let mut t = DMatrix::from_fn(tau.n(), keep.len(), |i, j| tau.get(i, keep[j]));
    for i in 0..t.nrows() {
        let s: f64 = t.row(i).sum();
        if s > 0.0 {
            t.row_mut(i).scale_mut(1.0 / s);
        } else {
            // the whole row sat on removed components
            for (j, p) in pi.iter().enumerate() {
                t[(i, j)] = *p;
            }
        }
    }
    let next = RegressionMixture {
        pi,
        beta: keep.iter().map(|&c| model.beta[c].clone()).collect(),
        sigma2: keep.iter().map(|&c| model.sigma2[c]).collect(),
    };
    Ok((next, Responsibilities::new(t), pruned))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One component per curve.
///
/// `β_k` is the least-squares fit of curve `k`, `σ²_k` the median over
/// curves of `‖y_i − X_i β_k‖² / m_i`, and `π` uniform. One E-step and one
/// proportion update follow; the returned state carries `π = τ̄` and the
/// first λ.
pub fn init_robust(data: &DesignedData, denominator: LambdaDenominator) -> (RobustState, IterationRecord) {
    let n = data.n();
    let mut jitters = 0;
    let beta: Vec<DVector<f64>> = (0..n)
        .map(|k| {
            let s = solve_normal_equations(&data.grams[k], &data.moments[k]);
            jitters += usize::from(s.jittered);
            s.beta
        })
        .collect();
    let rss = data.squared_residuals(&DMatrix::from_columns(&beta));
    let floor = data.variance_floor();
    let mut clamps = 0;
    let sigma2: Vec<f64> = (0..n)
        .map(|k| {
            let v = median((0..n).map(|i| rss[(i, k)] / data.len(i) as f64).collect());
            if v >= floor {
                v
            } else {
                clamps += 1;
                floor
            }
        })
        .collect();
    let pi0 = vec![1.0 / n as f64; n];
    let mut model = RegressionMixture { pi: pi0, beta, sigma2 };
    let (tau, ll) = posterior(&model, data);
    let pi1 = robust_pi_update(&tau, &model.pi, 1.0);
    let lambda = lambda_update(&pi1, &model.pi, &tau, data.dataset.min_len(), denominator);
    let record = IterationRecord {
        iter: 0,
        k: n,
        loglik: ll,
        penalized_loglik: penalize(ll, &model.pi, n, lambda),
        lambda,
        max_beta_change: None,
        pruned_ids: Vec::new(),
        variance_clamps: clamps,
        ridge_jitters: jitters,
    };
    model.pi = pi1;
    let (tau, ll) = posterior(&model, data);
    (
        RobustState {
            model,
            tau,
            loglik: ll,
            lambda,
        },
        record,
    )
}

/// Knobs for a single iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub prune: bool,
    pub denominator: LambdaDenominator,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            prune: true,
            denominator: LambdaDenominator::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub model: RegressionMixture,
    /// Responsibilities used by the M-step, restricted to the survivors.
    pub tau: Responsibilities,
    /// λ for the next iteration.
    pub next_lambda: f64,
    pub pruned: Vec<usize>,
    pub max_beta_change: f64,
    pub update: RegressionUpdate,
}

/// Proportion update, λ update, pruning and M-step given this iteration's
/// responsibilities.
pub fn advance(
    model: &RegressionMixture,
    tau: &Responsibilities,
    lambda: f64,
    data: &DesignedData,
    options: StepOptions,
) -> Result<StepOutcome, RobustError> {
    let pi_new = robust_pi_update(tau, &model.pi, lambda);
    let next_lambda = lambda_update(&pi_new, &model.pi, tau, data.dataset.min_len(), options.denominator);
    let updated = RegressionMixture {
        pi: pi_new,
        beta: model.beta.clone(),
        sigma2: model.sigma2.clone(),
    };
    let (survivors, tau, pruned) = if options.prune {
        prune(&updated, tau)?
    } else {
        (updated, tau.clone(), Vec::new())
    };
    let update = m_step_regression(&tau, data)?;
    let max_beta_change = update
        .beta
        .iter()
        .zip(&survivors.beta)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let next = RegressionMixture {
        pi: survivors.pi,
        beta: update.beta.clone(),
        sigma2: update.sigma2.clone(),
    };
    Ok(StepOutcome {
        model: next,
        tau,
        next_lambda,
        pruned,
        max_beta_change,
        update,
    })
}

/// One full iteration (E-step first) from `model` with penalty weight `lambda`.
pub fn robust_iteration(
    model: &RegressionMixture,
    lambda: f64,
    data: &DesignedData,
    options: StepOptions,
) -> Result<StepOutcome, RobustError> {
    let (tau, _) = posterior(model, data);
    advance(model, &tau, lambda, data, options)
}

#[derive(Debug, Clone)]
pub struct RobustFit {
    pub model: RegressionMixture,
    /// Responsibilities under the returned model.
    pub tau: Responsibilities,
    pub trace: FitTrace,
}

/// Runs the robust EM on prepared designs.
pub fn fit_robust_designed(data: &DesignedData, config: &RobustConfig) -> Result<RobustFit, RobustError> {
    config.validate()?;
    let n = data.n();
    let (mut state, record) = init_robust(data, config.lambda_denominator);
    let mut trace = FitTrace::default();
    trace.push(record);
    let options = StepOptions {
        prune: true,
        denominator: config.lambda_denominator,
    };
    let mut penalty_on = true;
    for q in 1..=config.max_iter {
        let lambda = if penalty_on { state.lambda } else { 0.0 };
        let step = advance(&state.model, &state.tau, lambda, data, options)?;
        let (tau, ll) = posterior(&step.model, data);
        trace.push(IterationRecord {
            iter: q,
            k: step.model.k(),
            loglik: ll,
            penalized_loglik: penalize(ll, &step.model.pi, n, lambda),
            lambda,
            max_beta_change: Some(step.max_beta_change),
            pruned_ids: step.pruned,
            variance_clamps: step.update.clamped.len(),
            ridge_jitters: step.update.jittered.len(),
        });
        state = RobustState {
            model: step.model,
            tau,
            loglik: ll,
            lambda: step.next_lambda,
        };
        if step.max_beta_change < config.tol {
            if penalty_on && lambda > 0.0 && config.final_standard_phase {
                penalty_on = false;
                continue;
            }
            trace.converged = true;
            break;
        }
    }
    trace.final_loglik = state.loglik;
    trace.final_penalized_loglik = trace.records.last().map_or(state.loglik, |r| r.penalized_loglik);
    Ok(RobustFit {
        model: state.model,
        tau: state.tau,
        trace,
    })
}

/// Robust EM from `K = n` components down to a data-driven `K`.
pub fn fit_robust(dataset: &Dataset, spec: &DesignSpec, config: &RobustConfig) -> Result<RobustFit, RobustError> {
    dataset.validate().map_err(|e| RobustError::Config(e.to_string()))?;
    let data = DesignedData::new(dataset, spec)?;
    fit_robust_designed(&data, config)
}
