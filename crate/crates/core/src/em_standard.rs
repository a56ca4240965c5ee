//! Classical EM for regression mixtures with a fixed number of components.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::basis::{BasisError, DesignSpec};
use crate::dataset::Dataset;
use crate::mixture_model::{posterior, DesignedData, ModelError, RegressionMixture, Responsibilities};
use crate::trace::{FitTrace, IterationRecord};
use crate::wls::solve_normal_equations;

/// Component weight below which a restart is abandoned.
pub const EMPTY_COMPONENT_WEIGHT: f64 = 1e-10;
/// Lloyd iterations used by the k-means initializer.
pub const KMEANS_ITERATIONS: usize = 10;

#[derive(Debug, Error)]
pub enum EmError {
    #[error("invalid EM configuration: {0}")]
    Config(String),
    #[error("cannot fit {k} components to {n} curves")]
    TooManyComponents { k: usize, n: usize },
    #[error("component {0} has no weight")]
    EmptyComponent(usize),
    #[error("k-means initialization needs every curve on the same grid")]
    RaggedGrid,
    #[error("all {0} restarts failed")]
    AllRestartsFailed(usize),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    #[default]
    RandomPartition,
    KmeansPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the log-likelihood increment drops below this.
    pub tol: f64,
    pub n_restarts: usize,
    pub init: InitStrategy,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 1000,
            tol: 1e-6,
            n_restarts: 10,
            init: InitStrategy::RandomPartition,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), EmError> {
        if self.k == 0 {
            return Err(EmError::Config("K must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(EmError::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 || self.n_restarts == 0 {
            return Err(EmError::Config("max_iter and n_restarts must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted least-squares solutions for every component.
#[derive(Debug, Clone)]
pub struct RegressionUpdate {
    pub beta: Vec<DVector<f64>>,
    pub sigma2: Vec<f64>,
    /// Components whose variance was raised to the floor.
    pub clamped: Vec<usize>,
    /// Components solved with ridge jitter.
    pub jittered: Vec<usize>,
}

pub fn e_step(model: &RegressionMixture, data: &DesignedData) -> Responsibilities {
    posterior(model, data).0
}

/// `π_k = (1/n) Σ_i τ_ik`.
pub fn m_step_proportions(tau: &Responsibilities) -> Vec<f64> {
    tau.column_means()
}

/// Per-component weighted least squares.
///
/// `β_k` solves `(Σ_i τ_ik X_iᵀX_i) β = Σ_i τ_ik X_iᵀ y_i`, and
/// `σ²_k = Σ_i τ_ik ‖y_i − X_i β_k‖² / Σ_i τ_ik m_i`, floored at the
/// dataset's variance floor.
pub fn m_step_regression(tau: &Responsibilities, data: &DesignedData) -> Result<RegressionUpdate, EmError> {
    let d = data.dim();
    let floor = data.variance_floor();
    let k = tau.k();
    let solved: Vec<(DVector<f64>, bool)> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut gram = DMatrix::zeros(d, d);
            let mut rhs = DVector::zeros(d);
            let mut weight = 0.0;
            for i in 0..data.n() {
                let w = tau.get(i, c);
                if w == 0.0 {
                    continue;
                }
                weight += w;
                gram += &data.grams[i] * w;
                rhs.axpy(w, &data.moments[i], 1.0);
            }
            if !(weight > 0.0) {
                return Err(EmError::EmptyComponent(c));
            }
            let s = solve_normal_equations(&gram, &rhs);
            Ok((s.beta, s.jittered))
        })
        .collect::<Result<_, _>>()?;
    let coefficients = DMatrix::from_columns(&solved.iter().map(|(b, _)| b.clone()).collect::<Vec<_>>());
    let rss = data.squared_residuals(&coefficients);
    let mut sigma2 = Vec::with_capacity(k);
    let mut clamped = Vec::new();
    for c in 0..k {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..data.n() {
            let w = tau.get(i, c);
            num += w * rss[(i, c)];
            den += w * data.len(i) as f64;
        }
        let v = num / den;
        if !(v >= floor) {
            clamped.push(c);
            sigma2.push(floor);
        } else {
            sigma2.push(v);
        }
    }
    let jittered = solved.iter().enumerate().filter(|(_, s)| s.1).map(|(c, _)| c).collect();
    Ok(RegressionUpdate {
        beta: solved.into_iter().map(|(b, _)| b).collect(),
        sigma2,
        clamped,
        jittered,
    })
}

/// Parameters fitted to a fixed soft or hard assignment (one M-step).
pub fn model_from_responsibilities(
    tau: &Responsibilities,
    data: &DesignedData,
) -> Result<(RegressionMixture, RegressionUpdate), EmError> {
    let pi = m_step_proportions(tau);
    let update = m_step_regression(tau, data)?;
    let model = RegressionMixture {
        pi,
        beta: update.beta.clone(),
        sigma2: update.sigma2.clone(),
    };
    Ok((model, update))
}

fn check_weights(tau: &Responsibilities) -> Result<(), EmError> {
    match tau.column_sums().iter().position(|&s| s < EMPTY_COMPONENT_WEIGHT) {
        Some(c) => Err(EmError::EmptyComponent(c)),
        None => Ok(()),
    }
}

/// One EM iteration (E-step then M-step) from `model`.
pub fn em_iteration(
    model: &RegressionMixture,
    data: &DesignedData,
) -> Result<(RegressionMixture, Responsibilities), EmError> {
    let tau = e_step(model, data);
    let (next, _) = model_from_responsibilities(&tau, data)?;
    Ok((next, tau))
}

/// Result of one restart.
#[derive(Debug, Clone, PartialEq)]
pub enum RestartOutcome {
    Completed { loglik: f64, iterations: usize, converged: bool },
    Failed { reason: String },
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: RegressionMixture,
    pub tau: Responsibilities,
    pub trace: FitTrace,
    /// Index of the restart that produced `model`.
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
}

/// Runs EM from an initial hard partition (0-based labels).
pub fn fit_from_partition(
    data: &DesignedData,
    labels: &[usize],
    k: usize,
    config: &EmConfig,
) -> Result<(RegressionMixture, Responsibilities, FitTrace), EmError> {
    let tau0 = Responsibilities::one_hot(labels, k);
    check_weights(&tau0)?;
    let (model, update) = model_from_responsibilities(&tau0, data)?;
    run_em(data, model, &update, config)
}

fn run_em(
    data: &DesignedData,
    mut model: RegressionMixture,
    init_update: &RegressionUpdate,
    config: &EmConfig,
) -> Result<(RegressionMixture, Responsibilities, FitTrace), EmError> {
    let mut trace = FitTrace::default();
    let (mut tau, mut ll) = posterior(&model, data);
    trace.push(IterationRecord {
        iter: 0,
        k: model.k(),
        loglik: ll,
        penalized_loglik: ll,
        lambda: 0.0,
        max_beta_change: None,
        pruned_ids: Vec::new(),
        variance_clamps: init_update.clamped.len(),
        ridge_jitters: init_update.jittered.len(),
    });
    for q in 1..=config.max_iter {
        check_weights(&tau)?;
        let (next, update) = model_from_responsibilities(&tau, data)?;
        let change = next
            .beta
            .iter()
            .zip(&model.beta)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        model = next;
        let (next_tau, next_ll) = posterior(&model, data);
        let increment = next_ll - ll;
        tau = next_tau;
        ll = next_ll;
        trace.push(IterationRecord {
            iter: q,
            k: model.k(),
            loglik: ll,
            penalized_loglik: ll,
            lambda: 0.0,
            max_beta_change: Some(change),
            pruned_ids: Vec::new(),
            variance_clamps: update.clamped.len(),
            ridge_jitters: update.jittered.len(),
        });
        if increment < config.tol {
            trace.converged = true;
            break;
        }
    }
    trace.final_loglik = ll;
    trace.final_penalized_loglik = ll;
    Ok((model, tau, trace))
}

/// Uniform random assignment of every curve to one of `k` clusters.
pub fn random_partition(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Curve-level k-means on the raw response vectors (shared grid only).
pub fn kmeans_partition(dataset: &Dataset, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>, EmError> {
    if dataset.shared_grid().is_none() {
        return Err(EmError::RaggedGrid);
    }
    let n = dataset.n();
    if k > n {
        return Err(EmError::TooManyComponents { k, n });
    }
    let ys: Vec<&[f64]> = dataset.curves.iter().map(|c| c.y.as_slice()).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    let mut centers: Vec<Vec<f64>> = index::sample(rng, n, k).into_iter().map(|i| ys[i].to_vec()).collect();
    let mut labels = vec![0; n];
    for _ in 0..KMEANS_ITERATIONS {
        for (i, y) in ys.iter().enumerate() {
            labels[i] = (0..k)
                .map(|c| (c, dist(y, &centers[c])))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64]> = ys
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(y, _)| *y)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|y| y[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    Ok(labels)
}

/// Restart stream `restart` of the generator seeded by `seed`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Best of `n_restarts` EM runs, ranked by final log-likelihood.
pub fn fit_em(dataset: &Dataset, spec: &DesignSpec, config: &EmConfig) -> Result<EmFit, EmError> {
    config.validate()?;
    dataset.validate().map_err(|e| EmError::Config(e.to_string()))?;
    if config.k > dataset.n() {
        return Err(EmError::TooManyComponents {
            k: config.k,
            n: dataset.n(),
        });
    }
    if config.init == InitStrategy::KmeansPartition && dataset.shared_grid().is_none() {
        return Err(EmError::RaggedGrid);
    }
    let data = DesignedData::new(dataset, spec)?;
    let runs: Vec<Result<(RegressionMixture, Responsibilities, FitTrace), EmError>> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(config.seed, r);
            let labels = match config.init {
                InitStrategy::RandomPartition => random_partition(dataset.n(), config.k, &mut rng),
                InitStrategy::KmeansPartition => kmeans_partition(dataset, config.k, &mut rng)?,
            };
            fit_from_partition(&data, &labels, config.k, config)
        })
        .collect();
    let restarts = runs
        .iter()
        .map(|run| match run {
            Ok((_, _, trace)) => RestartOutcome::Completed {
                loglik: trace.final_loglik,
                iterations: trace.iterations(),
                converged: trace.converged,
            },
            Err(e) => RestartOutcome::Failed { reason: e.to_string() },
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .filter_map(|(r, run)| run.as_ref().ok().map(|(_, _, t)| (r, t.final_loglik)))
        .fold(None, |best: Option<(usize, f64)>, (r, ll)| match best {
            Some((_, b)) if b >= ll => best,
            _ => Some((r, ll)),
        });
    let Some((best_restart, _)) = best else {
        return Err(EmError::AllRestartsFailed(config.n_restarts));
    };
    let (model, tau, trace) = runs.into_iter().nth(best_restart).expect("index from enumerate").expect("filtered Ok");
    Ok(EmFit {
        model,
        tau,
        trace,
        best_restart,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::polynomial_design;
    use crate::dataset::Curve;
    use crate::mixture_model::loglik;

    fn line_dataset() -> Dataset {
        let x: Vec<f64> = (0..6).map(|j| j as f64 / 5.0).collect();
        let y = x.iter().map(|t| 2.0 + 3.0 * t).collect();
        Dataset::new(vec![Curve::new(x, y)], None).unwrap()
    }

    #[test]
    fn single_component_gives_unit_responsibilities() {
        let d = line_dataset();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let model = RegressionMixture::new(vec![1.0], vec![DVector::from_vec(vec![0.0, 1.0])], vec![1.0]).unwrap();
        let tau = e_step(&model, &data);
        assert!(tau.matrix().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn identical_components_split_evenly() {
        let d = line_dataset();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let model = RegressionMixture::new(vec![0.5, 0.5], vec![b.clone(), b], vec![2.0, 2.0]).unwrap();
        let tau = e_step(&model, &data);
        assert!(tau.matrix().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn tiny_e_step_matches_bayes_rule() {
        let d = Dataset::new(
            vec![
                Curve::new(vec![0.0, 1.0], vec![0.2, 1.1]),
                Curve::new(vec![0.0, 1.0], vec![1.0, 0.3]),
            ],
            None,
        )
        .unwrap();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let model = RegressionMixture::new(
            vec![0.6, 0.4],
            vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])],
            vec![0.3, 0.5],
        )
        .unwrap();
        let pdf = |y: f64, mu: f64, v: f64| (-(y - mu).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let means = [[0.0, 1.0], [1.0, 0.0]];
        let tau = e_step(&model, &data);
        for (i, c) in d.curves.iter().enumerate() {
            let joint: Vec<f64> = (0..2)
                .map(|k| model.pi[k] * pdf(c.y[0], means[k][0], model.sigma2[k]) * pdf(c.y[1], means[k][1], model.sigma2[k]))
                .collect();
            let total: f64 = joint.iter().sum();
            for k in 0..2 {
                assert!((tau.get(i, k) - joint[k] / total).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn proportion_cases() {
        let eye = Responsibilities::one_hot(&[0, 1, 2], 3);
        assert_eq!(m_step_proportions(&eye), vec![1.0 / 3.0; 3]);
        let all_first = Responsibilities::one_hot(&[0, 0, 0, 0], 2);
        assert_eq!(m_step_proportions(&all_first), vec![1.0, 0.0]);
    }

    #[test]
    fn single_curve_weighted_fit_is_ols() {
        let x: Vec<f64> = vec![0.0, 0.3, 0.5, 0.9, 1.4];
        let y: Vec<f64> = vec![1.0, 0.2, -0.4, 0.8, 2.0];
        let d = Dataset::new(vec![Curve::new(x.clone(), y.clone())], None).unwrap();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(2)).unwrap();
        let tau = Responsibilities::one_hot(&[0], 1);
        let update = m_step_regression(&tau, &data).unwrap();
        let design = polynomial_design(&x, 2);
        let ols = design.clone().svd(true, true).solve(&DVector::from_vec(y), 1e-14).unwrap();
        assert!((&update.beta[0] - ols).norm() < 1e-10);
    }

    #[test]
    fn perfect_linear_fit_hits_variance_floor() {
        let d = line_dataset();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let update = m_step_regression(&Responsibilities::one_hot(&[0], 1), &data).unwrap();
        assert!((update.beta[0][0] - 2.0).abs() < 1e-10);
        assert!((update.beta[0][1] - 3.0).abs() < 1e-10);
        assert_eq!(update.sigma2[0], data.variance_floor());
        assert_eq!(update.clamped, vec![0]);
    }

    #[test]
    fn empty_component_is_reported() {
        let d = line_dataset();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let tau = Responsibilities::one_hot(&[0], 2);
        assert!(matches!(m_step_regression(&tau, &data), Err(EmError::EmptyComponent(1))));
    }

    #[test]
    fn noiseless_single_cluster_is_recovered() {
        let x: Vec<f64> = (0..20).map(|j| j as f64 / 19.0).collect();
        let truth = [0.5, -1.0, 2.0];
        let curves = (0..5)
            .map(|_| Curve::new(x.clone(), x.iter().map(|t| truth[0] + truth[1] * t + truth[2] * t * t).collect()))
            .collect();
        let d = Dataset::new(curves, None).unwrap();
        let config = EmConfig { k: 1, n_restarts: 2, ..EmConfig::default() };
        let fit = fit_em(&d, &DesignSpec::polynomial(2), &config).unwrap();
        for (b, t) in fit.model.beta[0].iter().zip(truth) {
            assert!((b - t).abs() < 1e-8);
        }
    }

    #[test]
    fn kmeans_requires_shared_grid() {
        let d = Dataset::new(
            vec![Curve::new(vec![0.0, 1.0], vec![0.0, 1.0]), Curve::new(vec![0.0, 2.0], vec![0.0, 1.0])],
            None,
        )
        .unwrap();
        let mut rng = restart_rng(1, 0);
        assert!(matches!(kmeans_partition(&d, 2, &mut rng), Err(EmError::RaggedGrid)));
        let config = EmConfig { k: 1, init: InitStrategy::KmeansPartition, ..EmConfig::default() };
        assert!(matches!(fit_em(&d, &DesignSpec::polynomial(1), &config), Err(EmError::RaggedGrid)));
    }

    #[test]
    fn restarts_are_reproducible() {
        let x: Vec<f64> = (0..8).map(|j| j as f64 / 7.0).collect();
        let curves = (0..12)
            .map(|i| {
                let shift = if i % 2 == 0 { 0.0 } else { 3.0 };
                Curve::new(x.clone(), x.iter().enumerate().map(|(j, t)| shift + t + 0.01 * ((i * 7 + j * 3) % 5) as f64).collect())
            })
            .collect();
        let d = Dataset::new(curves, None).unwrap();
        let config = EmConfig { k: 2, seed: 42, n_restarts: 4, ..EmConfig::default() };
        let a = fit_em(&d, &DesignSpec::polynomial(1), &config).unwrap();
        let b = fit_em(&d, &DesignSpec::polynomial(1), &config).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        assert!((loglik(&a.model, &data) - a.trace.final_loglik).abs() < 1e-9);
    }
}
