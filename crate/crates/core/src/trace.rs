//! Per-iteration history of a fit.

use std::fmt::Write as _;

/// One EM iteration.
///
/// `loglik` and `penalized_loglik` are evaluated for the parameters the
/// iteration produced, `k` is the component count after its pruning and
/// `lambda` is the value used in its proportion update. Iteration 0
/// describes the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub k: usize,
    pub loglik: f64,
    pub penalized_loglik: f64,
    pub lambda: f64,
    pub max_beta_change: Option<f64>,
    pub pruned_ids: Vec<usize>,
    /// Components whose variance hit the floor during this iteration's M-step.
    pub variance_clamps: usize,
    /// Components whose weighted Gram matrix needed ridge jitter.
    pub ridge_jitters: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Log-likelihood of the returned parameters.
    pub final_loglik: f64,
    /// Penalized log-likelihood of the returned parameters at the last λ.
    pub final_penalized_loglik: f64,
}

impl FitTrace {
    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    /// Number of EM iterations run (iteration 0 excluded).
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.iter > 0).count()
    }

    pub fn k_sequence(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.k).collect()
    }

    pub fn variance_clamps(&self) -> usize {
        self.records.iter().map(|r| r.variance_clamps).sum()
    }

    pub fn ridge_jitters(&self) -> usize {
        self.records.iter().map(|r| r.ridge_jitters).sum()
    }

    /// CSV with columns `iter,K,loglik,penalized_loglik,lambda,max_beta_change,pruned_ids`.
    ///
    /// Pruned ids are 1-based indices into the component list entering the
    /// iteration, joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,K,loglik,penalized_loglik,lambda,max_beta_change,pruned_ids\n");
        for r in &self.records {
            let change = r.max_beta_change.map(|c| format!("{c:.12e}")).unwrap_or_default();
            let pruned: Vec<String> = r.pruned_ids.iter().map(|id| (id + 1).to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12e},{},{}",
                r.iter,
                r.k,
                r.loglik,
                r.penalized_loglik,
                r.lambda,
                change,
                pruned.join(";")
            );
        }
        out
    }
}
