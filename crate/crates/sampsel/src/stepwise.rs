//! Forward stepwise selection with AIC over both equations, plus the
//! selection-accuracy scoring shared by all methods.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{mle_fit, Dataset, FitResult, NaturalParams};
use crate::posterior::ModelId;

/// Which equation a stepwise move touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Selection,
    Outcome,
}

/// One accepted stepwise addition.
#[derive(Debug, Clone)]
pub struct StepwiseStep {
    pub equation: Equation,
    pub variable: usize,
    /// AIC after the addition.
    pub aic: f64,
}

/// The full search trace. The AIC sequence is strictly decreasing from the
/// null model.
#[derive(Debug, Clone)]
pub struct StepwiseTrace {
    pub null_aic: f64,
    pub steps: Vec<StepwiseStep>,
    pub final_model: ModelId,
    pub final_fit: FitResult,
}

/// AIC with the full-likelihood parameter count: included coefficients plus
/// two intercepts, sigma, and rho.
fn aic(loglik: f64, included: usize) -> f64 {
    2.0 * (included as f64 + 4.0) - 2.0 * loglik
}

/// Embed a submodel fit into full-width natural parameters (zeros elsewhere).
fn embed(fit: &NaturalParams, s_cols: &[usize], o_cols: &[usize], p: usize, q: usize) -> NaturalParams {
    let mut alpha = DVector::zeros(q);
    for (pos, &k) in s_cols.iter().enumerate() {
        alpha[k] = fit.alpha[pos];
    }
    let mut beta = DVector::zeros(p);
    for (pos, &j) in o_cols.iter().enumerate() {
        beta[j] = fit.beta[pos];
    }
    NaturalParams {
        alpha0: fit.alpha0,
        alpha,
        beta0: fit.beta0,
        beta,
        sigma: fit.sigma,
        rho: fit.rho,
    }
}

/// Restrict full-width parameters to a submodel (warm start for candidates).
fn restrict(full: &NaturalParams, s_cols: &[usize], o_cols: &[usize]) -> NaturalParams {
    NaturalParams {
        alpha0: full.alpha0,
        alpha: DVector::from_iterator(s_cols.len(), s_cols.iter().map(|&k| full.alpha[k])),
        beta0: full.beta0,
        beta: DVector::from_iterator(o_cols.len(), o_cols.iter().map(|&j| full.beta[j])),
        sigma: full.sigma,
        rho: full.rho,
    }
}

/// Forward selection from the intercepts-only model. Each round fits every
/// single-variable addition to either equation by maximum likelihood, warm
/// started from the incumbent, and accepts the addition that most lowers the
/// AIC; the search stops when no candidate lowers it. Candidates that fail
/// to converge are skipped. A null-model failure is itself a convergence
/// failure and is reported as an error.
pub fn forward_stepwise(data: &Dataset) -> Result<StepwiseTrace> {
    let (p, q) = (data.p(), data.q());
    let null_data = data.select_columns(&[], &[])?;
    let null_fit = mle_fit(&null_data, None)?;
    if !null_fit.converged {
        return Err(Error::numerical(
            "stepwise null model failed to converge",
        ));
    }
    let null_aic = aic(null_fit.loglik, 0);

    let mut in_s: Vec<usize> = Vec::new();
    let mut in_o: Vec<usize> = Vec::new();
    let mut cur_aic = null_aic;
    let mut cur_params = embed(&null_fit.params, &[], &[], p, q);
    let mut cur_sub_fit = null_fit;
    let mut steps = Vec::new();

    loop {
        let mut best: Option<(f64, Equation, usize, FitResult, Vec<usize>, Vec<usize>)> = None;
        // selection equation candidates first, then outcome; within an
        // equation, ascending index — this is also the tie-break order
        for (eq, pool, included) in [
            (Equation::Selection, q, &in_s),
            (Equation::Outcome, p, &in_o),
        ] {
            for idx in 0..pool {
                if included.contains(&idx) {
                    continue;
                }
                let (mut cand_s, mut cand_o) = (in_s.clone(), in_o.clone());
                match eq {
                    Equation::Selection => cand_s.push(idx),
                    Equation::Outcome => cand_o.push(idx),
                }
                cand_s.sort_unstable();
                cand_o.sort_unstable();
                let sub = data.select_columns(&cand_o, &cand_s)?;
                let warm = restrict(&cur_params, &cand_s, &cand_o);
                let fit = match mle_fit(&sub, Some(&warm)) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                if !fit.converged {
                    continue;
                }
                let cand_aic = aic(fit.loglik, cand_s.len() + cand_o.len());
                let better = match &best {
                    None => true,
                    Some((best_aic, ..)) => cand_aic < *best_aic,
                };
                if better {
                    best = Some((cand_aic, eq, idx, fit, cand_s, cand_o));
                }
            }
        }
        match best {
            Some((cand_aic, eq, idx, fit, cand_s, cand_o)) if cand_aic < cur_aic => {
                cur_aic = cand_aic;
                cur_params = embed(&fit.params, &cand_s, &cand_o, p, q);
                cur_sub_fit = fit;
                in_s = cand_s;
                in_o = cand_o;
                steps.push(StepwiseStep {
                    equation: eq,
                    variable: idx,
                    aic: cand_aic,
                });
                if in_s.len() == q && in_o.len() == p {
                    break;
                }
            }
            _ => break,
        }
    }

    let final_model = ModelId::new(
        (0..q).map(|k| in_s.contains(&k)).collect(),
        (0..p).map(|j| in_o.contains(&j)).collect(),
    );
    let final_fit = FitResult {
        params: embed(&cur_sub_fit.params, &in_s, &in_o, p, q),
        ..cur_sub_fit
    };
    Ok(StepwiseTrace {
        null_aic,
        steps,
        final_model,
        final_fit,
    })
}

/// One equation's accuracy contributions for a single replicate. Rates are
/// `None` when their denominator is empty.
#[derive(Debug, Clone, Copy)]
pub struct EquationScore {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub exact: bool,
    pub size: usize,
}

fn score_mask(selected: &[bool], truth: &[bool]) -> EquationScore {
    let active = truth.iter().filter(|t| **t).count();
    let inactive = truth.len() - active;
    let tp = selected
        .iter()
        .zip(truth)
        .filter(|(s, t)| **s && **t)
        .count();
    let tn = selected
        .iter()
        .zip(truth)
        .filter(|(s, t)| !**s && !**t)
        .count();
    EquationScore {
        tpr: (active > 0).then(|| tp as f64 / active as f64),
        tnr: (inactive > 0).then(|| tn as f64 / inactive as f64),
        exact: selected == truth,
        size: selected.iter().filter(|s| **s).count(),
    }
}

/// Score a selected model against the data-generating one, per equation.
/// Returns `(selection, outcome)`.
pub fn score_selection(selected: &ModelId, truth: &ModelId) -> Result<(EquationScore, EquationScore)> {
    if selected.included_s.len() != truth.included_s.len()
        || selected.included_o.len() != truth.included_o.len()
    {
        return Err(Error::invalid_param(format!(
            "mask width mismatch: selected S{}/O{}, truth S{}/O{}",
            selected.included_s.len(),
            selected.included_o.len(),
            truth.included_s.len(),
            truth.included_o.len()
        )));
    }
    Ok((
        score_mask(&selected.included_s, &truth.included_s),
        score_mask(&selected.included_o, &truth.included_o),
    ))
}

/// Aggregated selection accuracy for one method and one equation.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelectionMetrics {
    pub tpr: f64,
    pub tnr: f64,
    pub tmr: f64,
    pub mean_size: f64,
    pub failure_rate: f64,
}

/// Streaming aggregator over replicates. Failed replicates count toward the
/// failure rate and are excluded from every other metric.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    tpr_sum: f64,
    tpr_n: usize,
    tnr_sum: f64,
    tnr_n: usize,
    exact: usize,
    size_sum: usize,
    scored: usize,
    failed: usize,
}

impl MetricsAccumulator {
    pub fn add(&mut self, score: &EquationScore) {
        if let Some(t) = score.tpr {
            self.tpr_sum += t;
            self.tpr_n += 1;
        }
        if let Some(t) = score.tnr {
            self.tnr_sum += t;
            self.tnr_n += 1;
        }
        self.exact += score.exact as usize;
        self.size_sum += score.size;
        self.scored += 1;
    }

    pub fn add_failure(&mut self) {
        self.failed += 1;
    }

    pub fn finish(&self) -> SelectionMetrics {
        let n = self.scored.max(1) as f64;
        SelectionMetrics {
            tpr: self.tpr_sum / self.tpr_n.max(1) as f64,
            tnr: self.tnr_sum / self.tnr_n.max(1) as f64,
            tmr: self.exact as f64 / n,
            mean_size: self.size_sum as f64 / n,
            failure_rate: self.failed as f64 / (self.scored + self.failed).max(1) as f64,
        }
    }
}
