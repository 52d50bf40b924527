//! Simulation harness: correlated covariate generation, missingness
//! calibration, dataset simulation, and replicate orchestration with
//! per-method selection-accuracy aggregation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dist::norm_cdf;
use crate::error::{Error, Result};
use crate::gibbs::{run_chain_seeded, GibbsConfig, InitStrategy};
use crate::model::{mle_fit, Dataset, FitResult};
use crate::posterior::{median_model, summarize, ModelId};
use crate::priors::{default_calibration, CalibrationContext, PriorClass, SlabFamily};
use crate::rng::RngStream;
use crate::stepwise::{
    forward_stepwise, score_selection, EquationScore, MetricsAccumulator, SelectionMetrics,
};

/// A variable selection method under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SsNormal,
    SsLaplace,
    SsNormalII,
    SsLaplaceII,
    Stepwise,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SsNormal => "ss-normal",
            Method::SsLaplace => "ss-laplace",
            Method::SsNormalII => "ss-normal-II",
            Method::SsLaplaceII => "ss-laplace-II",
            Method::Stepwise => "stepwise",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ss-normal" => Ok(Method::SsNormal),
            "ss-laplace" => Ok(Method::SsLaplace),
            "ss-normal-II" | "ss-normal-ii" => Ok(Method::SsNormalII),
            "ss-laplace-II" | "ss-laplace-ii" => Ok(Method::SsLaplaceII),
            "stepwise" => Ok(Method::Stepwise),
            other => Err(Error::invalid_param(format!("unknown method {other:?}"))),
        }
    }

    fn spike_slab(&self) -> Option<(SlabFamily, PriorClass)> {
        match self {
            Method::SsNormal => Some((SlabFamily::Normal, PriorClass::I)),
            Method::SsLaplace => Some((SlabFamily::Laplace, PriorClass::I)),
            Method::SsNormalII => Some((SlabFamily::Normal, PriorClass::II)),
            Method::SsLaplaceII => Some((SlabFamily::Laplace, PriorClass::II)),
            Method::Stepwise => None,
        }
    }
}

/// One simulation scenario. The selection and outcome equations share the
/// covariates (no exclusion restriction) and q = p.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha_effects: DVector<f64>,
    pub beta_effects: DVector<f64>,
    pub target_missing: f64,
    pub beta0: f64,
    pub replicates: usize,
    pub methods: Vec<Method>,
    /// Chain settings for the spike-and-slab methods.
    pub gibbs: GibbsConfig,
}

impl ScenarioConfig {
    /// The benchmark design: three active variables with effects
    /// (0.5, 1, 1.5)/sqrt(2) in the selection and (0.25, 0.5, 1) in the
    /// outcome equation, intercept calibrated for 30% missingness.
    pub fn benchmark(n: usize, p: usize, rho: f64, replicates: usize, methods: Vec<Method>) -> Self {
        let mut alpha = DVector::zeros(p);
        let mut beta = DVector::zeros(p);
        let s2 = std::f64::consts::SQRT_2;
        for (k, v) in [0.5, 1.0, 1.5].iter().enumerate() {
            if k < p {
                alpha[k] = v / s2;
            }
        }
        for (j, v) in [0.25, 0.5, 1.0].iter().enumerate() {
            if j < p {
                beta[j] = *v;
            }
        }
        ScenarioConfig {
            n,
            p,
            rho,
            sigma: 1.0,
            alpha_effects: alpha,
            beta_effects: beta,
            target_missing: 0.3,
            beta0: 0.5,
            replicates,
            methods,
            gibbs: GibbsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid_param("n and p must be at least 1"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::invalid_param(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid_param(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.target_missing > 0.0 && self.target_missing < 1.0) {
            return Err(Error::invalid_param(format!(
                "target_missing must lie in (0, 1), got {}",
                self.target_missing
            )));
        }
        if self.alpha_effects.len() != self.p || self.beta_effects.len() != self.p {
            return Err(Error::invalid_param(
                "effect vectors must have length p",
            ));
        }
        self.gibbs.validate()
    }

    /// The data-generating model as inclusion masks.
    pub fn truth(&self) -> ModelId {
        ModelId::new(
            self.alpha_effects.iter().map(|v| *v != 0.0).collect(),
            self.beta_effects.iter().map(|v| *v != 0.0).collect(),
        )
    }
}

/// Rows i.i.d. multivariate normal with standard normal marginals and
/// cov(w_j, w_k) = 0.5^|j-k|, generated by the stationary AR(1) recursion.
pub fn gen_covariates(n: usize, p: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let innov_sd = (1.0f64 - 0.25).sqrt();
    let mut w = DMatrix::zeros(n, p);
    for i in 0..n {
        w[(i, 0)] = rng.standard_normal();
        for j in 1..p {
            w[(i, j)] = 0.5 * w[(i, j - 1)] + innov_sd * rng.standard_normal();
        }
    }
    w
}

/// Solve for the selection intercept making the average missingness
/// probability over the fixed covariates equal to `target`:
/// mean_i Phi(-alpha0 - w_i'alpha) = target. The left side is strictly
/// decreasing in alpha0, so bisection converges to any tolerance.
pub fn calibrate_intercept(w: &DMatrix<f64>, alpha: &DVector<f64>, target: f64) -> f64 {
    let eta = w * alpha;
    let missing_frac = |a0: f64| -> f64 {
        eta.iter().map(|e| norm_cdf(-a0 - e)).sum::<f64>() / eta.len() as f64
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while missing_frac(lo) < target {
        lo -= 2.0;
        if lo < -60.0 {
            break;
        }
    }
    while missing_frac(hi) > target {
        hi += 2.0;
        if hi > 60.0 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if missing_frac(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Simulate outcomes and selection for fixed covariates: bivariate normal
/// errors with covariance [[sigma^2, sigma rho], [sigma rho, 1]], the latent
/// sign rule, and x = w.
pub fn gen_dataset(cfg: &ScenarioConfig, w: &DMatrix<f64>, rng: &mut RngStream) -> Result<Dataset> {
    cfg.validate()?;
    let n = w.nrows();
    let alpha0 = calibrate_intercept(w, &cfg.alpha_effects, cfg.target_missing);
    let eta = w * &cfg.alpha_effects;
    let xb = w * &cfg.beta_effects;
    let rho_c = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z2 = rng.standard_normal();
        let zu = rng.standard_normal();
        let e1 = cfg.sigma * (cfg.rho * z2 + rho_c * zu);
        let sel = alpha0 + eta[i] + z2 > 0.0;
        s.push(sel);
        y.push(sel.then(|| cfg.beta0 + xb[i] + e1));
    }
    Dataset::new(w.clone(), w.clone(), s, y)
}

/// Aggregated metrics for one method.
#[derive(Debug, Clone)]
pub struct MethodMetrics {
    pub method: Method,
    pub selection: SelectionMetrics,
    pub outcome: SelectionMetrics,
}

enum ReplicateOutcome {
    Scored(EquationScore, EquationScore),
    Failed,
}

fn run_method(
    method: Method,
    cfg: &ScenarioConfig,
    data: &Dataset,
    mle: Option<&FitResult>,
    truth: &ModelId,
    chain_rng: RngStream,
) -> Result<ReplicateOutcome> {
    match method.spike_slab() {
        Some((family, class)) => {
            let prior = default_calibration(
                cfg.n,
                cfg.p,
                cfg.p,
                family,
                CalibrationContext::Simulation,
            )
            .with_class(class);
            let chain = run_chain_seeded(data, &prior, &cfg.gibbs, chain_rng, mle)?;
            let selected = median_model(&summarize(&chain)?);
            let (s, o) = score_selection(&selected, truth)?;
            Ok(ReplicateOutcome::Scored(s, o))
        }
        None => match forward_stepwise(data) {
            Ok(trace) => {
                let (s, o) = score_selection(&trace.final_model, truth)?;
                Ok(ReplicateOutcome::Scored(s, o))
            }
            // a failed null-model fit is a convergence failure, not an abort
            Err(_) => Ok(ReplicateOutcome::Failed),
        },
    }
}

/// Run every requested method over `cfg.replicates` independently simulated
/// datasets on a fixed covariate matrix, and aggregate the per-equation
/// accuracy metrics. Deterministic given `master_seed`; replicates run in
/// parallel on derived streams.
pub fn run_experiment(cfg: &ScenarioConfig, master_seed: u64) -> Result<Vec<MethodMetrics>> {
    cfg.validate()?;
    if cfg.methods.is_empty() {
        return Ok(Vec::new());
    }
    // covariates are generated once per scenario and shared by replicates
    let mut cov_rng = RngStream::new(master_seed, 0);
    let w = gen_covariates(cfg.n, cfg.p, &mut cov_rng);
    let truth = cfg.truth();
    let needs_mle = cfg
        .methods
        .iter()
        .any(|m| m.spike_slab().is_some() && cfg.gibbs.init == InitStrategy::MleBased);

    let per_replicate: Vec<Vec<ReplicateOutcome>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let base = 1 + r as u64 * (cfg.methods.len() as u64 + 2);
            let mut data_rng = RngStream::new(master_seed, base);
            let data = gen_dataset(cfg, &w, &mut data_rng)?;
            // one maximum likelihood fit initializes every chain on this
            // replicate
            let mle = if needs_mle {
                mle_fit(&data, None).ok()
            } else {
                None
            };
            cfg.methods
                .iter()
                .enumerate()
                .map(|(m, method)| {
                    let chain_rng = RngStream::new(master_seed, base + 1 + m as u64);
                    run_method(*method, cfg, &data, mle.as_ref(), &truth, chain_rng)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(cfg.methods.len());
    for (m, method) in cfg.methods.iter().enumerate() {
        let mut sel_acc = MetricsAccumulator::default();
        let mut out_acc = MetricsAccumulator::default();
        for rep in &per_replicate {
            match &rep[m] {
                ReplicateOutcome::Scored(s, o) => {
                    sel_acc.add(s);
                    out_acc.add(o);
                }
                ReplicateOutcome::Failed => {
                    sel_acc.add_failure();
                    out_acc.add_failure();
                }
            }
        }
        out.push(MethodMetrics {
            method: *method,
            selection: sel_acc.finish(),
            outcome: out_acc.finish(),
        });
    }
    Ok(out)
}

/// Render the metrics table: one row per method per equation with the TMR,
/// size, sensitivity, and specificity columns.
pub fn render_metrics(results: &[MethodMetrics]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<10} {:>7} {:>7} {:>7} {:>7} {:>9}\n",
        "method", "equation", "TMR", "Size", "Sens.", "Spec.", "FailRate"
    ));
    for m in results {
        for (eq, s) in [("selection", &m.selection), ("outcome", &m.outcome)] {
            out.push_str(&format!(
                "{:<14} {:<10} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>9.3}\n",
                m.method.name(),
                eq,
                s.tmr,
                s.mean_size,
                s.tpr,
                s.tnr,
                s.failure_rate
            ));
        }
    }
    out
}
