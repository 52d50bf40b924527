//! Posterior summarization: inclusion probabilities, the median model,
//! parameter summaries on the natural scale, model-frequency tables,
//! conditional-on-model summaries, and importance-sampling leave-one-out.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dist::norm_logcdf;
use crate::error::{Error, Result};
use crate::gibbs::{ChainOutput, Draw};
use crate::model::Dataset;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

/// A visited model: inclusion masks for the selection and outcome equations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelId {
    pub included_s: Vec<bool>,
    pub included_o: Vec<bool>,
}

impl ModelId {
    pub fn new(included_s: Vec<bool>, included_o: Vec<bool>) -> Self {
        ModelId {
            included_s,
            included_o,
        }
    }

    pub fn size(&self) -> usize {
        self.included_s.iter().filter(|b| **b).count()
            + self.included_o.iter().filter(|b| **b).count()
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits = |v: &[bool]| -> String {
            v.iter().map(|b| if *b { '1' } else { '0' }).collect()
        };
        write!(f, "S:{}|O:{}", bits(&self.included_s), bits(&self.included_o))
    }
}

/// Per-coordinate mean/sd pairs plus inclusion probabilities and the
/// ranked model table.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub pip_s: DVector<f64>,
    pub pip_o: DVector<f64>,
    pub alpha0_mean: f64,
    pub alpha0_sd: f64,
    pub alpha_mean: DVector<f64>,
    pub alpha_sd: DVector<f64>,
    pub beta0_mean: f64,
    pub beta0_sd: f64,
    pub beta_mean: DVector<f64>,
    pub beta_sd: DVector<f64>,
    pub sigma_mean: f64,
    pub sigma_sd: f64,
    pub rho_mean: f64,
    pub rho_sd: f64,
    /// (model, visit count), most frequent first.
    pub model_table: Vec<(ModelId, usize)>,
    pub n_draws: usize,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n as f64 - 1.0)).sqrt())
}

/// Summarize a slice of draws directly (the draw-file path).
pub fn summarize_draws(draws: &[Draw]) -> Result<PosteriorSummary> {
    if draws.is_empty() {
        return Err(Error::InvalidData("cannot summarize an empty chain".into()));
    }
    let n = draws.len();
    let p = draws[0].beta.len();
    let q = draws[0].alpha.len();

    let pip_s = DVector::from_fn(q, |k, _| {
        draws.iter().filter(|d| d.gamma_s[k]).count() as f64 / n as f64
    });
    let pip_o = DVector::from_fn(p, |j, _| {
        draws.iter().filter(|d| d.gamma_o[j]).count() as f64 / n as f64
    });

    let (alpha0_mean, alpha0_sd) = mean_sd(draws.iter().map(|d| d.alpha0), n);
    let (beta0_mean, beta0_sd) = mean_sd(draws.iter().map(|d| d.beta0), n);
    let mut alpha_mean = DVector::zeros(q);
    let mut alpha_sd = DVector::zeros(q);
    for k in 0..q {
        let (m, s) = mean_sd(draws.iter().map(|d| d.alpha[k]), n);
        alpha_mean[k] = m;
        alpha_sd[k] = s;
    }
    let mut beta_mean = DVector::zeros(p);
    let mut beta_sd = DVector::zeros(p);
    for j in 0..p {
        let (m, s) = mean_sd(draws.iter().map(|d| d.beta[j]), n);
        beta_mean[j] = m;
        beta_sd[j] = s;
    }
    // sigma and rho are transformed per draw, then summarized
    let (sigma_mean, sigma_sd) = mean_sd(draws.iter().map(Draw::sigma), n);
    let (rho_mean, rho_sd) = mean_sd(draws.iter().map(Draw::rho), n);

    let mut counts: HashMap<ModelId, usize> = HashMap::new();
    for d in draws {
        *counts
            .entry(ModelId::new(d.gamma_s.clone(), d.gamma_o.clone()))
            .or_insert(0) += 1;
    }
    let mut model_table: Vec<(ModelId, usize)> = counts.into_iter().collect();
    model_table.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    Ok(PosteriorSummary {
        pip_s,
        pip_o,
        alpha0_mean,
        alpha0_sd,
        alpha_mean,
        alpha_sd,
        beta0_mean,
        beta0_sd,
        beta_mean,
        beta_sd,
        sigma_mean,
        sigma_sd,
        rho_mean,
        rho_sd,
        model_table,
        n_draws: n,
    })
}

/// Summarize a chain.
pub fn summarize(chain: &ChainOutput) -> Result<PosteriorSummary> {
    summarize_draws(&chain.draws)
}

/// The median probability model: include exactly the coordinates with
/// inclusion probability strictly greater than one half.
pub fn median_model(summary: &PosteriorSummary) -> ModelId {
    ModelId::new(
        summary.pip_s.iter().map(|p| *p > 0.5).collect(),
        summary.pip_o.iter().map(|p| *p > 0.5).collect(),
    )
}

/// Summaries over exactly the draws whose sampled model equals `model`.
pub fn conditional_summary(chain: &ChainOutput, model: &ModelId) -> Result<PosteriorSummary> {
    let subset: Vec<Draw> = chain
        .draws
        .iter()
        .filter(|d| d.gamma_s == model.included_s && d.gamma_o == model.included_o)
        .cloned()
        .collect();
    if subset.is_empty() {
        return Err(Error::ModelNotSampled(model.to_string()));
    }
    summarize_draws(&subset)
}

/// Log density of each data row under each stored draw: the n x T matrix
/// whose column sums recover the per-draw log-likelihood.
pub fn pointwise_log_predictive(chain: &ChainOutput, data: &Dataset) -> DMatrix<f64> {
    let n = data.n();
    let t = chain.draws.len();
    let mut out = DMatrix::zeros(n, t);
    for (ti, d) in chain.draws.iter().enumerate() {
        let sigma = d.sigma();
        let rho = d.rho().clamp(-1.0 + 1e-12, 1.0 - 1e-12);
        let denom = (1.0 - rho * rho).sqrt();
        let ln_sigma = sigma.ln();
        let alpha = DVector::from_column_slice(&d.alpha);
        let beta = DVector::from_column_slice(&d.beta);
        let eta = data.w() * &alpha;
        let xb = data.x() * &beta;
        for i in 0..n {
            let mu_s = d.alpha0 + eta[i];
            out[(i, ti)] = match data.y()[i] {
                None => norm_logcdf(-mu_s),
                Some(y) => {
                    let e = (y - d.beta0 - xb[i]) / sigma;
                    norm_logcdf((mu_s + rho * e) / denom) - 0.5 * e * e - ln_sigma - LN_SQRT_2PI
                }
            };
        }
    }
    out
}

/// Plain importance-sampling estimate of the leave-one-out expected log
/// pointwise predictive density from an n x T matrix of per-row log
/// densities. Returns the total and the per-row values.
///
/// No Pareto smoothing is applied; with heavy-tailed weights the estimate
/// can be noisy, which is acceptable at the model sizes used here.
pub fn loo_estimate(lpd: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let (n, t) = (lpd.nrows(), lpd.ncols());
    if n == 0 || t == 0 {
        return Err(Error::InvalidData("empty log-predictive matrix".into()));
    }
    if lpd.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "non-finite entry in log-predictive matrix".into(),
        ));
    }
    let mut per_point = DVector::zeros(n);
    for i in 0..n {
        // -log mean_t exp(-lpd_it), stabilized
        let row = lpd.row(i);
        let m = row.iter().cloned().fold(f64::INFINITY, f64::min);
        // max of -lpd is -min(lpd)
        let sum: f64 = row.iter().map(|v| (m - v).exp()).sum();
        per_point[i] = m - (sum / t as f64).ln();
    }
    Ok((per_point.sum(), per_point))
}

/// In-sample log pointwise predictive density per row: log of the posterior
/// mean density.
pub fn insample_lpd(lpd: &DMatrix<f64>) -> DVector<f64> {
    let (n, t) = (lpd.nrows(), lpd.ncols());
    DVector::from_fn(n, |i, _| {
        let row = lpd.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - m).exp()).sum();
        m + (sum / t as f64).ln()
    })
}

/// Render the summary as the three-column (PIP, Est., S.D.) table used in
/// reports, one block per equation.
pub fn render_table(
    summary: &PosteriorSummary,
    w_names: &[String],
    x_names: &[String],
) -> String {
    let mut out = String::new();
    let line = |out: &mut String, name: &str, pip: Option<f64>, est: f64, sd: f64| {
        let pip_s = pip.map_or("     -".to_string(), |p| format!("{p:6.3}"));
        out.push_str(&format!("{name:<16} {pip_s} {est:10.3} {sd:10.3}\n"));
    };
    out.push_str(&format!(
        "{:<16} {:>6} {:>10} {:>10}\n",
        "variable", "PIP", "Est.", "S.D."
    ));
    out.push_str("-- selection equation --\n");
    line(&mut out, "(Intercept)", None, summary.alpha0_mean, summary.alpha0_sd);
    for k in 0..summary.pip_s.len() {
        let name = w_names.get(k).cloned().unwrap_or_else(|| format!("w{}", k + 1));
        line(
            &mut out,
            &name,
            Some(summary.pip_s[k]),
            summary.alpha_mean[k],
            summary.alpha_sd[k],
        );
    }
    out.push_str("-- outcome equation --\n");
    line(&mut out, "(Intercept)", None, summary.beta0_mean, summary.beta0_sd);
    for j in 0..summary.pip_o.len() {
        let name = x_names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
        line(
            &mut out,
            &name,
            Some(summary.pip_o[j]),
            summary.beta_mean[j],
            summary.beta_sd[j],
        );
    }
    line(&mut out, "sigma", None, summary.sigma_mean, summary.sigma_sd);
    line(&mut out, "rho", None, summary.rho_mean, summary.rho_sd);
    out
}

/// Machine-readable key-value rendering of the same summary.
pub fn render_key_values(
    summary: &PosteriorSummary,
    w_names: &[String],
    x_names: &[String],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("n_draws = {}\n", summary.n_draws));
    out.push_str(&format!("alpha0.est = {}\nalpha0.sd = {}\n", summary.alpha0_mean, summary.alpha0_sd));
    for k in 0..summary.pip_s.len() {
        let name = w_names.get(k).cloned().unwrap_or_else(|| format!("w{}", k + 1));
        out.push_str(&format!(
            "selection.{name}.pip = {}\nselection.{name}.est = {}\nselection.{name}.sd = {}\n",
            summary.pip_s[k], summary.alpha_mean[k], summary.alpha_sd[k]
        ));
    }
    out.push_str(&format!("beta0.est = {}\nbeta0.sd = {}\n", summary.beta0_mean, summary.beta0_sd));
    for j in 0..summary.pip_o.len() {
        let name = x_names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
        out.push_str(&format!(
            "outcome.{name}.pip = {}\noutcome.{name}.est = {}\noutcome.{name}.sd = {}\n",
            summary.pip_o[j], summary.beta_mean[j], summary.beta_sd[j]
        ));
    }
    out.push_str(&format!("sigma.est = {}\nsigma.sd = {}\n", summary.sigma_mean, summary.sigma_sd));
    out.push_str(&format!("rho.est = {}\nrho.sd = {}\n", summary.rho_mean, summary.rho_sd));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::GibbsConfig;
    use crate::priors::{default_calibration, CalibrationContext, SlabFamily};

    fn synthetic_chain(draws: Vec<Draw>) -> ChainOutput {
        ChainOutput {
            draws,
            config: GibbsConfig::default(),
            prior: default_calibration(100, 1, 1, SlabFamily::Normal, CalibrationContext::Simulation),
            wall_time: 0.0,
        }
    }

    fn make_draw(gamma_s: bool, val: f64) -> Draw {
        Draw {
            alpha0: val,
            alpha: vec![val],
            beta0: -val,
            beta: vec![2.0 * val],
            rho_tilde: 0.3,
            sigma_tilde_sq: 0.91,
            gamma_s: vec![gamma_s],
            gamma_o: vec![true],
            r: 0.5,
            s_star: None,
        }
    }

    #[test]
    fn pip_is_draw_frequency() {
        // 571 of 1000 draws include the selection variable
        let draws: Vec<Draw> = (0..1000).map(|i| make_draw(i < 571, 1.0)).collect();
        let s = summarize(&synthetic_chain(draws)).unwrap();
        assert!((s.pip_s[0] - 0.571).abs() < 1e-12);
        let mm = median_model(&s);
        assert!(mm.included_s[0]);
    }

    #[test]
    fn identical_draws_have_zero_sd() {
        let draws: Vec<Draw> = (0..50).map(|_| make_draw(true, 0.7)).collect();
        let s = summarize(&synthetic_chain(draws)).unwrap();
        // identical draws give zero spread up to summation roundoff
        assert!(s.alpha0_sd < 1e-12);
        assert!(s.beta_sd[0] < 1e-12);
        assert!(s.sigma_sd < 1e-12);
        assert!(s.rho_sd < 1e-12);
    }

    #[test]
    fn natural_scale_transform_matches_per_draw_oracle() {
        let draws: Vec<Draw> = (0..200)
            .map(|i| {
                let mut d = make_draw(true, 1.0);
                d.rho_tilde = -0.5 + 0.004 * i as f64;
                d.sigma_tilde_sq = 0.5 + 0.002 * i as f64;
                d
            })
            .collect();
        let s = summarize(&synthetic_chain(draws.clone())).unwrap();
        let rhos: Vec<f64> = draws
            .iter()
            .map(|d| d.rho_tilde / (d.sigma_tilde_sq + d.rho_tilde * d.rho_tilde).sqrt())
            .collect();
        let m = rhos.iter().sum::<f64>() / rhos.len() as f64;
        assert!((s.rho_mean - m).abs() < 1e-12);
    }

    #[test]
    fn median_model_boundary_is_strict() {
        let draws: Vec<Draw> = (0..1000).map(|i| make_draw(i < 500, 1.0)).collect();
        let s = summarize(&synthetic_chain(draws)).unwrap();
        assert_eq!(s.pip_s[0], 0.5);
        let mm = median_model(&s);
        assert!(!mm.included_s[0], "pip exactly 0.5 must be excluded");
        assert!(mm.included_o[0], "pip 1.0 must be included");
    }

    #[test]
    fn model_table_frequencies_sum_to_draw_count() {
        let draws: Vec<Draw> = (0..100).map(|i| make_draw(i % 3 == 0, 1.0)).collect();
        let s = summarize(&synthetic_chain(draws)).unwrap();
        let total: usize = s.model_table.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn conditional_summary_filters_exactly() {
        let mut draws = Vec::new();
        // model A: gamma_s = true, values 1.0; model B: gamma_s = false, values 3.0
        for _ in 0..30 {
            draws.push(make_draw(true, 1.0));
        }
        for _ in 0..70 {
            draws.push(make_draw(false, 3.0));
        }
        let chain = synthetic_chain(draws);
        let s = summarize(&chain).unwrap();
        let top = &s.model_table[0];
        assert_eq!(top.1, 70);
        let a = ModelId::new(vec![true], vec![true]);
        let ca = conditional_summary(&chain, &a).unwrap();
        assert_eq!(ca.n_draws, 30);
        assert!((ca.alpha_mean[0] - 1.0).abs() < 1e-12);
        let b = ModelId::new(vec![false], vec![true]);
        let cb = conditional_summary(&chain, &b).unwrap();
        assert!((cb.alpha_mean[0] - 3.0).abs() < 1e-12);
        // never-sampled model errors by name
        let never = ModelId::new(vec![true], vec![false]);
        let err = conditional_summary(&chain, &never).unwrap_err();
        assert!(err.to_string().contains("S:1|O:0"));
    }

    #[test]
    fn single_model_chain_conditional_equals_unconditional() {
        let draws: Vec<Draw> = (0..40)
            .map(|i| make_draw(true, 1.0 + 0.01 * i as f64))
            .collect();
        let chain = synthetic_chain(draws);
        let s = summarize(&chain).unwrap();
        let c = conditional_summary(&chain, &ModelId::new(vec![true], vec![true])).unwrap();
        assert_eq!(s.n_draws, c.n_draws);
        assert!((s.alpha_mean[0] - c.alpha_mean[0]).abs() < 1e-15);
    }

    #[test]
    fn loo_on_constant_rows_is_exact() {
        // lpd(i, t) = c for all t: per-point value is c
        let lpd = DMatrix::from_fn(3, 120, |i, _| -(i as f64 + 1.0));
        let (total, per) = loo_estimate(&lpd).unwrap();
        for i in 0..3 {
            assert!((per[i] - (-(i as f64 + 1.0))).abs() < 1e-12);
        }
        assert!((total - (-6.0)).abs() < 1e-12);
    }

    #[test]
    fn loo_two_draw_toy() {
        let lpd = DMatrix::from_row_slice(1, 2, &[0.0, -1.0]);
        let (total, _) = loo_estimate(&lpd).unwrap();
        let want = -(0.5 * (1.0 + std::f64::consts::E)).ln();
        assert!((total - want).abs() < 1e-12, "{total} vs {want}");
    }

    #[test]
    fn loo_rejects_non_finite() {
        let lpd = DMatrix::from_row_slice(1, 2, &[0.0, f64::NAN]);
        assert!(loo_estimate(&lpd).is_err());
    }

    #[test]
    fn loo_never_exceeds_insample() {
        let mut rng = crate::rng::RngStream::new(77, 0);
        let lpd = DMatrix::from_fn(20, 300, |_, _| -1.0 + 0.5 * rng.standard_normal());
        let (_, per) = loo_estimate(&lpd).unwrap();
        let ins = insample_lpd(&lpd);
        for i in 0..20 {
            assert!(per[i] <= ins[i] + 1e-12);
        }
    }

    #[test]
    fn empty_chain_errors() {
        assert!(summarize_draws(&[]).is_err());
    }
}
