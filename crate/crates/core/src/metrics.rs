//! Partition and mean-curve quality measures.

use std::fmt::Write as _;

use thiserror::Error;

use crate::basis::{BasisError, DesignSpec};
use crate::mixture_model::RegressionMixture;

/// Largest label count matched by exhaustive permutation search.
pub const DEFAULT_EXACT_LIMIT: usize = 8;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("partitions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {0} items")]
    TooShort(usize),
    #[error("mean curve {index} has {got} points, grid has {expected}")]
    GridMismatch { index: usize, got: usize, expected: usize },
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Best one-to-one relabelling of an estimated partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub rate: f64,
    /// `mapping[k]` is the true class assigned to estimated label `k`, if any.
    pub mapping: Vec<Option<usize>>,
    /// Whether the optimum was found by exhaustive search.
    pub exact: bool,
}

fn label_count(z: &[usize]) -> usize {
    z.iter().max().map_or(0, |m| m + 1)
}

fn confusion(z_hat: &[usize], z_true: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0; k]; k];
    for (&a, &b) in z_hat.iter().zip(z_true) {
        table[a][b] += 1;
    }
    table
}

fn best_permutation(table: &[Vec<usize>]) -> (usize, Vec<usize>) {
    fn search(
        table: &[Vec<usize>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        score: usize,
        best: &mut (usize, Vec<usize>),
    ) {
        if row == table.len() {
            if score > best.0 || best.1.is_empty() {
                *best = (score, current.clone());
            }
            return;
        }
        for col in 0..table.len() {
            if !used[col] {
                used[col] = true;
                current.push(col);
                search(table, row + 1, used, current, score + table[row][col], best);
                current.pop();
                used[col] = false;
            }
        }
    }
    let mut best = (0, Vec::new());
    search(table, 0, &mut vec![false; table.len()], &mut Vec::new(), 0, &mut best);
    best
}

fn greedy_permutation(table: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let k = table.len();
    let mut cells: Vec<(usize, usize, usize)> = (0..k)
        .flat_map(|r| (0..k).map(move |c| (r, c)))
        .map(|(r, c)| (table[r][c], r, c))
        .collect();
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![usize::MAX; k];
    let mut taken = vec![false; k];
    let mut score = 0;
    for (count, r, c) in cells {
        if assign[r] == usize::MAX && !taken[c] {
            assign[r] = c;
            taken[c] = true;
            score += count;
        }
    }
    (score, assign)
}

/// Minimum mismatch fraction over one-to-one label mappings, with the
/// mapping that attains it. Label sets of unequal size are padded with
/// empty classes.
pub fn match_labels(z_hat: &[usize], z_true: &[usize], exact_limit: usize) -> Result<Matching, MetricsError> {
    if z_hat.len() != z_true.len() {
        return Err(MetricsError::LengthMismatch(z_hat.len(), z_true.len()));
    }
    if z_hat.is_empty() {
        return Err(MetricsError::TooShort(1));
    }
    let k_hat = label_count(z_hat);
    let k_true = label_count(z_true);
    let k = k_hat.max(k_true);
    let table = confusion(z_hat, z_true, k);
    let exact = k <= exact_limit;
    let (score, perm) = if exact {
        best_permutation(&table)
    } else {
        greedy_permutation(&table)
    };
    let mapping = perm.iter().take(k_hat).map(|&c| (c < k_true).then_some(c)).collect();
    Ok(Matching {
        rate: (z_hat.len() - score) as f64 / z_hat.len() as f64,
        mapping,
        exact,
    })
}

pub fn misclassification_error(z_hat: &[usize], z_true: &[usize]) -> Result<f64, MetricsError> {
    Ok(match_labels(z_hat, z_true, DEFAULT_EXACT_LIMIT)?.rate)
}

fn pairs(count: usize) -> f64 {
    (count as f64) * (count as f64 - 1.0) / 2.0
}

/// Fraction of item pairs on which the two partitions agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricsError::TooShort(2));
    }
    let (ka, kb) = (label_count(a), label_count(b));
    let mut table = vec![vec![0usize; kb]; ka];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
    }
    let both: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n);
    Ok((total + 2.0 * both - rows - cols) / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxError {
    /// `Σ ‖μ̂_k − μ_k‖² / Σ ‖μ_k‖²` over matched pairs.
    pub value: f64,
    /// `‖μ̂_k − μ_k‖²` per true class; `None` for unmatched classes.
    pub per_cluster: Vec<Option<f64>>,
    /// Some component or class had no partner.
    pub partial: bool,
}

/// Normalized squared distance between fitted and true mean curves on `grid`.
///
/// `mapping[k]` sends model component `k` to a true class (see [`match_labels`]).
pub fn approx_error(
    model: &RegressionMixture,
    spec: &DesignSpec,
    grid: &[f64],
    true_means: &[Vec<f64>],
    mapping: &[Option<usize>],
) -> Result<ApproxError, MetricsError> {
    for (index, mu) in true_means.iter().enumerate() {
        if mu.len() != grid.len() {
            return Err(MetricsError::GridMismatch {
                index,
                got: mu.len(),
                expected: grid.len(),
            });
        }
    }
    let design = spec.design(grid)?;
    let mut per_cluster = vec![None; true_means.len()];
    let (mut num, mut den) = (0.0, 0.0);
    for (k, beta) in model.beta.iter().enumerate() {
        let Some(Some(c)) = mapping.get(k) else { continue };
        let Some(mu) = true_means.get(*c) else { continue };
        let fitted = &design * beta;
        let err: f64 = fitted.iter().zip(mu).map(|(f, m)| (f - m) * (f - m)).sum();
        per_cluster[*c] = Some(err);
        num += err;
        den += mu.iter().map(|m| m * m).sum::<f64>();
    }
    let partial = per_cluster.iter().any(Option::is_none) || model.k() != true_means.len();
    Ok(ApproxError {
        value: if den > 0.0 { num / den } else { f64::NAN },
        per_cluster,
        partial,
    })
}

/// Evaluation summary of one fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub k_estimated: usize,
    pub k_true: Option<usize>,
    pub misclassification_rate: Option<f64>,
    pub rand_index: Option<f64>,
    pub approx_error: Option<f64>,
    pub approx_error_partial: bool,
    pub cluster_squared_errors: Vec<Option<f64>>,
    /// Mean `|σ̂_k − σ|` over matched components.
    pub sigma_error: Option<f64>,
    /// Mean `|π̂_k − π_k|` over matched components.
    pub pi_error: Option<f64>,
}

/// Reference values a fit is compared against.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    /// True mean curves on `grid`.
    pub means: Option<(Vec<f64>, Vec<Vec<f64>>)>,
    pub sigma: Option<f64>,
    pub proportions: Option<Vec<f64>>,
}

/// Builds a report for estimated labels `z_hat`, optionally with the fitted model.
pub fn evaluate(
    z_hat: &[usize],
    model: Option<(&RegressionMixture, &DesignSpec)>,
    truth: &GroundTruth,
) -> Result<EvalReport, MetricsError> {
    let matching = match_labels(z_hat, &truth.labels, DEFAULT_EXACT_LIMIT)?;
    let k_estimated = model.map_or(label_count(z_hat), |(m, _)| m.k());
    let mut report = EvalReport {
        k_estimated,
        k_true: Some(label_count(&truth.labels)),
        misclassification_rate: Some(matching.rate),
        rand_index: if z_hat.len() >= 2 {
            Some(rand_index(z_hat, &truth.labels)?)
        } else {
            None
        },
        ..EvalReport::default()
    };
    let Some((model, spec)) = model else {
        return Ok(report);
    };
    let mut mapping = matching.mapping.clone();
    mapping.resize(model.k(), None);
    if let Some((grid, means)) = &truth.means {
        let a = approx_error(model, spec, grid, means, &mapping)?;
        report.approx_error = Some(a.value);
        report.approx_error_partial = a.partial;
        report.cluster_squared_errors = a.per_cluster;
    }
    let matched: Vec<(usize, usize)> = mapping
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.map(|c| (k, c)))
        .collect();
    if !matched.is_empty() {
        if let Some(sigma) = truth.sigma {
            let s: f64 = matched.iter().map(|&(k, _)| (model.sigma2[k].sqrt() - sigma).abs()).sum();
            report.sigma_error = Some(s / matched.len() as f64);
        }
        if let Some(pi) = &truth.proportions {
            let s: f64 = matched
                .iter()
                .filter_map(|&(k, c)| pi.get(c).map(|p| (model.pi[k] - p).abs()))
                .sum();
            report.pi_error = Some(s / matched.len() as f64);
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "k_estimated,k_true,misclassification_rate,rand_index,approx_error,approx_error_partial,sigma_error,pi_error";

    /// `key=value` lines; absent values are left empty.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "k_estimated={}", self.k_estimated);
        let _ = writeln!(out, "k_true={}", self.k_true.map(|k| k.to_string()).unwrap_or_default());
        let _ = writeln!(out, "misclassification_rate={}", opt(self.misclassification_rate));
        let _ = writeln!(out, "rand_index={}", opt(self.rand_index));
        let _ = writeln!(out, "approx_error={}", opt(self.approx_error));
        let _ = writeln!(out, "approx_error_partial={}", self.approx_error_partial);
        let errs: Vec<String> = self.cluster_squared_errors.iter().map(|e| opt(*e)).collect();
        let _ = writeln!(out, "cluster_squared_errors={}", errs.join(";"));
        let _ = writeln!(out, "sigma_error={}", opt(self.sigma_error));
        let _ = writeln!(out, "pi_error={}", opt(self.pi_error));
        out
    }

    /// One CSV row matching [`EvalReport::CSV_HEADER`].
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k_estimated,
            self.k_true.map(|k| k.to_string()).unwrap_or_default(),
            opt(self.misclassification_rate),
            opt(self.rand_index),
            opt(self.approx_error),
            self.approx_error_partial,
            opt(self.sigma_error),
            opt(self.pi_error)
        )
    }
}
