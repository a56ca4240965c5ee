//! Regression-mixture parameters, curve log-densities, the observed-data
//! log-likelihood, the entropy penalty and MAP labelling.
//!
//! All densities stay in log space; probabilities only appear as normalized
//! responsibility rows.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::basis::{BasisError, DesignMatrix, DesignSpec};
use crate::dataset::Dataset;

/// Lower bound on component variances, relative to the pooled response variance.
pub const VARIANCE_FLOOR_SCALE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("mixture has no components")]
    NoComponents,
    #[error("proportions sum to {0}, expected 1")]
    NotSimplex(f64),
    #[error("component {0}: invalid proportion or variance")]
    BadComponent(usize),
    #[error("component {k}: coefficient vector has length {got}, expected {expected}")]
    DimensionMismatch { k: usize, got: usize, expected: usize },
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `K` spherical-Gaussian regression components.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMixture {
    pub pi: Vec<f64>,
    pub beta: Vec<DVector<f64>>,
    pub sigma2: Vec<f64>,
}

impl RegressionMixture {
    pub fn new(pi: Vec<f64>, beta: Vec<DVector<f64>>, sigma2: Vec<f64>) -> Result<Self, ModelError> {
        let model = Self { pi, beta, sigma2 };
        model.validate()?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn dim(&self) -> usize {
        self.beta.first().map_or(0, |b| b.len())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let k = self.pi.len();
        if k == 0 {
            return Err(ModelError::NoComponents);
        }
        if self.beta.len() != k || self.sigma2.len() != k {
            return Err(ModelError::BadComponent(k.min(self.beta.len()).min(self.sigma2.len())));
        }
        let d = self.dim();
        for c in 0..k {
            if !(self.pi[c] >= 0.0) || !(self.sigma2[c] > 0.0) || !self.sigma2[c].is_finite() {
                return Err(ModelError::BadComponent(c));
            }
            if self.beta[c].len() != d {
                return Err(ModelError::DimensionMismatch {
                    k: c,
                    got: self.beta[c].len(),
                    expected: d,
                });
            }
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(ModelError::NotSimplex(total));
        }
        Ok(())
    }

    /// Coefficients stacked as a `d × K` matrix.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.beta)
    }

    /// Flat text form: header `K d`, then `pi sigma2 beta_0 … beta_{d-1}`
    /// per component, 12 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.k(), self.dim());
        for c in 0..self.k() {
            let _ = write!(out, "{:.11e} {:.11e}", self.pi[c], self.sigma2[c]);
            for b in self.beta[c].iter() {
                let _ = write!(out, " {b:.11e}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`RegressionMixture::to_text`] output. Proportions are
    /// renormalized to absorb the rounding of the text form.
    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, message: &str| ModelError::Parse {
            line,
            message: message.to_string(),
        };
        let (line, header) = lines.next().ok_or_else(|| parse_err(1, "empty model file"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(line, "header must be `K d`")))
            .collect::<Result<_, _>>()?;
        let [k, d] = dims[..] else {
            return Err(parse_err(line, "header must be `K d`"));
        };
        let mut pi = Vec::with_capacity(k);
        let mut beta = Vec::with_capacity(k);
        let mut sigma2 = Vec::with_capacity(k);
        for _ in 0..k {
            let (line, row) = lines.next().ok_or_else(|| parse_err(line, "missing component line"))?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(line, "non-numeric value")))
                .collect::<Result<_, _>>()?;
            if values.len() != d + 2 {
                return Err(parse_err(line, &format!("expected {} values", d + 2)));
            }
            pi.push(values[0]);
            sigma2.push(values[1]);
            beta.push(DVector::from_column_slice(&values[2..]));
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, "trailing content"));
        }
        let total: f64 = pi.iter().sum();
        if total > 0.0 {
            pi.iter_mut().for_each(|p| *p /= total);
        }
        Self::new(pi, beta, sigma2)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

/// Posterior cluster probabilities, one row per curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities(DMatrix<f64>);

impl Responsibilities {
    pub fn new(tau: DMatrix<f64>) -> Self {
        Self(tau)
    }

    /// Hard assignment matrix from 0-based labels.
    pub fn one_hot(labels: &[usize], k: usize) -> Self {
        Self(DMatrix::from_fn(labels.len(), k, |i, c| {
            if labels[i] == c {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.0[(i, k)]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.iter().sum()).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.column_sums().into_iter().map(|s| s / n).collect()
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_deviation(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV text with header `tau_1,…,tau_K`.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = (1..=self.k()).map(|k| format!("tau_{k}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for row in self.0.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Hard labels, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition(pub Vec<usize>);

impl Partition {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    /// CSV text with header `label` and 1-based labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label\n");
        for z in &self.0 {
            let _ = writeln!(out, "{}", z + 1);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ModelError> {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let cell = line.trim();
            if cell.is_empty() || (i == 0 && cell == "label") {
                continue;
            }
            match cell.parse::<usize>() {
                Ok(l) if l >= 1 => labels.push(l - 1),
                _ => {
                    return Err(ModelError::Parse {
                        line: i + 1,
                        message: format!("label `{cell}` is not a positive integer"),
                    })
                }
            }
        }
        Ok(Self(labels))
    }
}

/// Per-curve design matrices with cached normal-equation blocks.
#[derive(Debug, Clone)]
pub struct DesignedData<'a> {
    pub dataset: &'a Dataset,
    pub designs: Vec<DesignMatrix>,
    pub ys: Vec<DVector<f64>>,
    /// `X_iᵀ X_i`
    pub grams: Vec<DMatrix<f64>>,
    /// `X_iᵀ y_i`
    pub moments: Vec<DVector<f64>>,
    dim: usize,
}

impl<'a> DesignedData<'a> {
    pub fn new(dataset: &'a Dataset, spec: &DesignSpec) -> Result<Self, BasisError> {
        let designs = dataset
            .curves
            .iter()
            .map(|c| spec.design(&c.x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_designs(dataset, designs))
    }

    pub fn from_designs(dataset: &'a Dataset, designs: Vec<DesignMatrix>) -> Self {
        let ys: Vec<DVector<f64>> = dataset
            .curves
            .iter()
            .map(|c| DVector::from_column_slice(&c.y))
            .collect();
        let grams = designs.iter().map(|x| x.transpose() * x).collect();
        let moments = designs.iter().zip(&ys).map(|(x, y)| x.transpose() * y).collect();
        let dim = designs.first().map_or(0, |x| x.ncols());
        Self {
            dataset,
            designs,
            ys,
            grams,
            moments,
            dim,
        }
    }

    pub fn n(&self) -> usize {
        self.designs.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self, i: usize) -> usize {
        self.ys[i].len()
    }

    /// Variance floor for this dataset.
    pub fn variance_floor(&self) -> f64 {
        let v = self.dataset.response_variance();
        if v > 0.0 {
            VARIANCE_FLOOR_SCALE * v
        } else {
            VARIANCE_FLOOR_SCALE
        }
    }

    /// `‖y_i − X_i β_k‖²` for every curve and component (`n × K`).
    pub fn squared_residuals(&self, coefficients: &DMatrix<f64>) -> DMatrix<f64> {
        let k = coefficients.ncols();
        let rows: Vec<Vec<f64>> = (0..self.n())
            .into_par_iter()
            .map(|i| {
                let fitted = &self.designs[i] * coefficients;
                (0..k)
                    .map(|c| {
                        fitted
                            .column(c)
                            .iter()
                            .zip(self.ys[i].iter())
                            .map(|(f, y)| (y - f) * (y - f))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(self.n(), k, |i, c| rows[i][c])
    }
}

/// `log N(y; Xβ, σ² I)` for one curve.
pub fn log_component_density(y: &[f64], design: &DesignMatrix, beta: &DVector<f64>, sigma2: f64) -> f64 {
    let fitted = design * beta;
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(y, f)| (y - f) * (y - f)).sum();
    gaussian_log_density(rss, y.len(), sigma2)
}

fn gaussian_log_density(rss: f64, m: usize, sigma2: f64) -> f64 {
    -0.5 * m as f64 * (2.0 * PI * sigma2).ln() - rss / (2.0 * sigma2)
}

/// Component log-densities for all curves (`n × K`), without proportions.
pub fn log_density_matrix(model: &RegressionMixture, data: &DesignedData) -> DMatrix<f64> {
    let rss = data.squared_residuals(&model.coefficient_matrix());
    DMatrix::from_fn(data.n(), model.k(), |i, c| {
        gaussian_log_density(rss[(i, c)], data.len(i), model.sigma2[c])
    })
}

/// Max-shifted `log Σ exp(v)`; `-inf` when every entry is `-inf`.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Responsibilities and observed-data log-likelihood in one pass.
pub fn posterior(model: &RegressionMixture, data: &DesignedData) -> (Responsibilities, f64) {
    let log_dens = log_density_matrix(model, data);
    let log_pi: Vec<f64> = model.pi.iter().map(|&p| ln_or_neg_inf(p)).collect();
    let mut tau = DMatrix::zeros(data.n(), model.k());
    let mut total = 0.0;
    for i in 0..data.n() {
        let joint: Vec<f64> = (0..model.k()).map(|c| log_pi[c] + log_dens[(i, c)]).collect();
        let norm = log_sum_exp(joint.iter().copied());
        total += norm;
        for (c, v) in joint.iter().enumerate() {
            tau[(i, c)] = (v - norm).exp();
        }
    }
    (Responsibilities(tau), total)
}

/// Observed-data log-likelihood `Σ_i log Σ_k π_k N(y_i; X_i β_k, σ²_k I)`.
pub fn loglik(model: &RegressionMixture, data: &DesignedData) -> f64 {
    let log_dens = log_density_matrix(model, data);
    (0..data.n())
        .map(|i| {
            log_sum_exp(
                (0..model.k()).map(|c| ln_or_neg_inf(model.pi[c]) + log_dens[(i, c)]),
            )
        })
        .sum()
}

/// Entropy of the hidden labels of `n` i.i.d. curves, `−n Σ π log π`.
pub fn entropy_penalty(pi: &[f64], n: usize) -> f64 {
    n as f64 * proportion_entropy(pi)
}

/// `−Σ π log π` with `0 log 0 = 0`.
pub fn proportion_entropy(pi: &[f64]) -> f64 {
    -pi.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// `loglik − λ · entropy_penalty`.
pub fn penalized_loglik(model: &RegressionMixture, data: &DesignedData, lambda: f64) -> f64 {
    penalize(loglik(model, data), &model.pi, data.n(), lambda)
}

pub(crate) fn penalize(loglik: f64, pi: &[f64], n: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        loglik
    } else {
        loglik - lambda * entropy_penalty(pi, n)
    }
}

/// MAP labels; ties go to the lowest component index.
pub fn map_partition(tau: &Responsibilities) -> Partition {
    Partition(
        tau.0
            .row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(best, bv), (c, &v)| {
                        if v > bv {
                            (c, v)
                        } else {
                            (best, bv)
                        }
                    })
                    .0
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::polynomial_design;
    use crate::dataset::Curve;
    use proptest::prelude::*;

    fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
        -0.5 * (2.0 * PI * var).ln() - (y - mean).powi(2) / (2.0 * var)
    }

    #[test]
    fn zero_residual_densities() {
        let x = polynomial_design(&[0.0, 1.0], 1);
        let beta = DVector::from_vec(vec![1.0, 2.0]);
        let v = log_component_density(&[1.0, 3.0], &x, &beta, 1.0);
        assert!((v + (2.0 * PI).ln()).abs() < 1e-14);
        let x1 = polynomial_design(&[0.5], 0);
        let b1 = DVector::from_vec(vec![4.0]);
        assert!(log_component_density(&[4.0], &x1, &b1, 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn density_is_sum_of_pointwise_normals() {
        let xs = [0.1, 0.4, 0.5, 0.9, 1.3];
        let y = [0.3, -1.2, 2.5, 0.7, 1.1];
        let x = polynomial_design(&xs, 2);
        let beta = DVector::from_vec(vec![0.2, -0.7, 1.4]);
        let sigma2 = 0.37;
        let expected: f64 = xs
            .iter()
            .zip(&y)
            .map(|(&t, &yy)| normal_logpdf(yy, 0.2 - 0.7 * t + 1.4 * t * t, sigma2))
            .sum();
        assert!((log_component_density(&y, &x, &beta, sigma2) - expected).abs() < 1e-12);
    }

    fn tiny_dataset() -> Dataset {
        Dataset::new(
            vec![
                Curve::new(vec![0.0, 1.0], vec![0.1, 0.9]),
                Curve::new(vec![0.0, 1.0], vec![1.2, 0.4]),
            ],
            None,
        )
        .unwrap()
    }

    fn two_component_model() -> RegressionMixture {
        RegressionMixture::new(
            vec![0.3, 0.7],
            vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, -0.5])],
            vec![0.5, 0.8],
        )
        .unwrap()
    }

    #[test]
    fn single_component_loglik_is_sum_of_densities() {
        let d = tiny_dataset();
        let spec = DesignSpec::polynomial(1);
        let data = DesignedData::new(&d, &spec).unwrap();
        let beta = DVector::from_vec(vec![0.5, 0.1]);
        let model = RegressionMixture::new(vec![1.0], vec![beta.clone()], vec![0.6]).unwrap();
        let direct: f64 = (0..2)
            .map(|i| log_component_density(&d.curves[i].y, &data.designs[i], &beta, 0.6))
            .sum();
        assert_eq!(loglik(&model, &data), direct);
    }

    #[test]
    fn tiny_two_component_loglik_matches_direct_evaluation() {
        let d = tiny_dataset();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let model = two_component_model();
        // means per component on x = (0, 1): (0, 1) and (1, 0.5)
        let means = [[0.0, 1.0], [1.0, 0.5]];
        let mut expected = 0.0;
        for c in &d.curves {
            let mut mix = 0.0;
            for k in 0..2 {
                let lp: f64 = (0..2).map(|j| normal_logpdf(c.y[j], means[k][j], model.sigma2[k])).sum();
                mix += model.pi[k] * lp.exp();
            }
            expected += mix.ln();
        }
        assert!((loglik(&model, &data) - expected).abs() < 1e-12);
        let (tau, ll) = posterior(&model, &data);
        assert!((ll - expected).abs() < 1e-12);
        assert!(tau.max_row_deviation() < 1e-15);
    }

    #[test]
    fn duplicating_curves_doubles_loglik() {
        let d = tiny_dataset();
        let mut doubled = d.clone();
        doubled.curves.extend(d.curves.clone());
        let spec = DesignSpec::polynomial(1);
        let model = two_component_model();
        let a = loglik(&model, &DesignedData::new(&d, &spec).unwrap());
        let b = loglik(&model, &DesignedData::new(&doubled, &spec).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn entropy_cases() {
        assert!((entropy_penalty(&[0.25; 4], 10) - 10.0 * 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy_penalty(&[1.0, 0.0, 0.0], 50), 0.0);
        let v = entropy_penalty(&[0.4, 0.3, 0.3], 100);
        let expected = 100.0 * (-0.4 * 0.4f64.ln() - 2.0 * 0.3 * 0.3f64.ln());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 108.89).abs() < 5e-3);
    }

    #[test]
    fn penalized_loglik_cases() {
        let d = tiny_dataset();
        let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
        let model = two_component_model();
        let ll = loglik(&model, &data);
        assert_eq!(penalized_loglik(&model, &data, 0.0), ll);
        let single = RegressionMixture::new(vec![1.0], vec![model.beta[0].clone()], vec![0.5]).unwrap();
        assert_eq!(penalized_loglik(&single, &data, 0.7), loglik(&single, &data));
        let uniform = RegressionMixture::new(vec![0.5, 0.5], model.beta.clone(), model.sigma2.clone()).unwrap();
        let expected = loglik(&uniform, &data) - 2.0 * 2f64.ln();
        assert!((penalized_loglik(&uniform, &data, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn map_partition_cases() {
        let tau = Responsibilities::new(DMatrix::from_row_slice(2, 3, &[0.2, 0.7, 0.1, 0.5, 0.5, 0.0]));
        assert_eq!(map_partition(&tau).0, vec![1, 0]);
    }

    #[test]
    fn model_text_round_trip() {
        let model = two_component_model();
        let text = model.to_text();
        assert!(text.starts_with("2 2\n"));
        let back = RegressionMixture::from_text(&text).unwrap();
        for c in 0..2 {
            assert!((back.pi[c] - model.pi[c]).abs() < 1e-11);
            assert!((back.sigma2[c] - model.sigma2[c]).abs() < 1e-11);
            assert!((&back.beta[c] - &model.beta[c]).norm() < 1e-11);
        }
        assert!(RegressionMixture::from_text("2 2\n0.5 1 0 0\n").is_err());
    }

    #[test]
    fn partition_csv_round_trip() {
        let p = Partition(vec![0, 2, 1]);
        assert_eq!(Partition::from_csv(&p.to_csv()).unwrap(), p);
    }

    fn random_instance(seed: u64) -> (Dataset, RegressionMixture) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let k = rng.random_range(1..=3);
        let x: Vec<f64> = (0..m).map(|j| j as f64 * 0.3).collect();
        let curves = (0..n)
            .map(|_| Curve::new(x.clone(), (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .collect();
        let mut pi: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= s);
        let beta = (0..k)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let sigma2 = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        (Dataset::new(curves, None).unwrap(), RegressionMixture::new(pi, beta, sigma2).unwrap())
    }

    proptest! {
        #[test]
        fn log_space_matches_naive_probabilities(seed in any::<u64>()) {
            let (d, model) = random_instance(seed);
            let data = DesignedData::new(&d, &DesignSpec::polynomial(1)).unwrap();
            let naive: f64 = (0..d.n())
                .map(|i| {
                    (0..model.k())
                        .map(|c| {
                            model.pi[c]
                                * log_component_density(&d.curves[i].y, &data.designs[i], &model.beta[c], model.sigma2[c]).exp()
                        })
                        .sum::<f64>()
                        .ln()
                })
                .sum();
            prop_assert!((loglik(&model, &data) - naive).abs() < 1e-8);
        }

        #[test]
        fn uniform_proportions_maximize_entropy(raw in prop::collection::vec(0.0f64..1.0, 2..8)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let pi: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let k = pi.len();
            prop_assert!(entropy_penalty(&pi, 1) <= (k as f64).ln() + 1e-12);
        }

        #[test]
        fn map_partition_is_equivariant_and_monotone_invariant(
            rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..10),
            perm_seed in 0usize..6,
        ) {
            let n = rows.len();
            let tau = DMatrix::from_fn(n, 3, |i, c| rows[i][c] / rows[i].iter().sum::<f64>());
            let z = map_partition(&Responsibilities::new(tau.clone())).0;
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let perm = perms[perm_seed];
            // column c of the permuted matrix holds original column perm[c]
            let permuted = DMatrix::from_fn(n, 3, |i, c| tau[(i, perm[c])]);
            let zp = map_partition(&Responsibilities::new(permuted)).0;
            for i in 0..n {
                let distinct = {
                    let r = tau.row(i);
                    let best = r[z[i]];
                    r.iter().filter(|&&v| v == best).count() == 1
                };
                if distinct {
                    prop_assert_eq!(perm[zp[i]], z[i]);
                }
            }
            let transformed = tau.map(|v| v.ln() * 3.0 + 1.0);
            prop_assert_eq!(map_partition(&Responsibilities::new(transformed)).0, z);
        }
    }
}
