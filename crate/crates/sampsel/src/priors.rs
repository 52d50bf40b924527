//! Spike-and-slab prior specifications, their default calibration, and the
//! induced prior on the error correlation.

use crate::dist::{sample_inverse_gamma, norm_logpdf};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Scale-mixture family for one mixture component. A point mass gives a
/// normal marginal, an Exp(1/2) mixing variable gives a Laplace marginal,
/// and inverse-gamma mixing gives a Student-t marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingFamily {
    PointMass,
    ExponentialHalf,
    InverseGamma { shape: f64, rate: f64 },
}

impl MixingFamily {
    /// Inverse-gamma mixing with the default nu = 3 (the smallest integer
    /// degrees of freedom with finite marginal variance).
    pub fn student_t_default() -> Self {
        MixingFamily::InverseGamma {
            shape: 1.5,
            rate: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let MixingFamily::InverseGamma { shape, rate } = self {
            if !(*shape > 0.0 && *rate > 0.0) {
                return Err(Error::invalid_param(format!(
                    "inverse-gamma mixing requires positive parameters, got ({shape}, {rate})"
                )));
            }
        }
        Ok(())
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, MixingFamily::PointMass)
    }

    /// E[v] under the mixing prior; the marginal coefficient variance is
    /// tau^2 * E[v].
    pub fn mean(&self) -> f64 {
        match self {
            MixingFamily::PointMass => 1.0,
            MixingFamily::ExponentialHalf => 2.0,
            MixingFamily::InverseGamma { shape, rate } => {
                if *shape > 1.0 {
                    rate / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Log density of the mixing variable. The point-mass family returns the
    /// constant 0; it only ever appears in ratios against itself.
    pub fn log_density(&self, v: f64) -> f64 {
        match self {
            MixingFamily::PointMass => 0.0,
            MixingFamily::ExponentialHalf => -std::f64::consts::LN_2 - 0.5 * v,
            MixingFamily::InverseGamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(*shape) - (shape + 1.0) * v.ln() - rate / v
            }
        }
    }

    /// Draw v from the mixing prior.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        match self {
            MixingFamily::PointMass => Ok(1.0),
            MixingFamily::ExponentialHalf => {
                let u = rng.uniform().max(f64::MIN_POSITIVE);
                Ok(-2.0 * u.ln())
            }
            MixingFamily::InverseGamma { shape, rate } => sample_inverse_gamma(*shape, *rate, rng),
        }
    }
}

/// Lanczos log-gamma (g = 7, n = 9), ~1e-13 relative accuracy.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Which class of spike-and-slab structure to use. Class II scales the
/// outcome-equation prior variances by the residual variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorClass {
    I,
    II,
}

/// Complete hyperparameter bundle for the spike-and-slab model.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub class: PriorClass,
    /// Spike and slab standard deviations, per equation.
    pub tau0_beta: f64,
    pub tau1_beta: f64,
    pub tau0_alpha: f64,
    pub tau1_alpha: f64,
    pub spike_mix_beta: MixingFamily,
    pub slab_mix_beta: MixingFamily,
    pub spike_mix_alpha: MixingFamily,
    pub slab_mix_alpha: MixingFamily,
    pub intercept_mix_beta: MixingFamily,
    pub intercept_mix_alpha: MixingFamily,
    /// Beta prior on the common inclusion rate r.
    pub a0: f64,
    pub b0: f64,
    /// Inverse-gamma prior on sigma_tilde_sq.
    pub c: f64,
    pub d: f64,
    /// Scale of the conditional normal prior on rho_tilde.
    pub tau: f64,
    /// Intercept prior variances (outcome, selection).
    pub eta_o: f64,
    pub eta_s: f64,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau0_beta", self.tau0_beta),
            ("tau1_beta", self.tau1_beta),
            ("tau0_alpha", self.tau0_alpha),
            ("tau1_alpha", self.tau1_alpha),
            ("a0", self.a0),
            ("b0", self.b0),
            ("c", self.c),
            ("d", self.d),
            ("tau", self.tau),
            ("eta_o", self.eta_o),
            ("eta_s", self.eta_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid_param(format!(
                    "prior parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.tau1_beta <= self.tau0_beta {
            return Err(Error::invalid_param(format!(
                "slab must be wider than spike: tau1_beta {} <= tau0_beta {}",
                self.tau1_beta, self.tau0_beta
            )));
        }
        if self.tau1_alpha <= self.tau0_alpha {
            return Err(Error::invalid_param(format!(
                "slab must be wider than spike: tau1_alpha {} <= tau0_alpha {}",
                self.tau1_alpha, self.tau0_alpha
            )));
        }
        for fam in [
            self.spike_mix_beta,
            self.slab_mix_beta,
            self.spike_mix_alpha,
            self.slab_mix_alpha,
            self.intercept_mix_beta,
            self.intercept_mix_alpha,
        ] {
            fam.validate()?;
        }
        // the inclusion ratio conditions on the current mixing variable, so
        // mixing a point mass with a continuous family on one coefficient
        // would make the chain reducible
        for (name, spike, slab) in [
            ("beta", self.spike_mix_beta, self.slab_mix_beta),
            ("alpha", self.spike_mix_alpha, self.slab_mix_alpha),
        ] {
            if spike.is_point_mass() != slab.is_point_mass() {
                return Err(Error::invalid_param(format!(
                    "{name} spike and slab mixing families must both be point masses \
                     or both continuous"
                )));
            }
        }
        Ok(())
    }

    pub fn with_class(mut self, class: PriorClass) -> Self {
        self.class = class;
        self
    }

    /// Swap every mixing family for the Student-t default and rescale the
    /// spike/slab scales to preserve the marginal variances.
    pub fn into_student_t(mut self) -> Self {
        let fam = MixingFamily::student_t_default();
        let scale = fam.mean().sqrt();
        self.tau0_beta /= scale;
        self.tau1_beta /= scale;
        self.tau0_alpha /= scale;
        self.tau1_alpha /= scale;
        self.eta_o /= fam.mean();
        self.eta_s /= fam.mean();
        self.spike_mix_beta = fam;
        self.slab_mix_beta = fam;
        self.spike_mix_alpha = fam;
        self.slab_mix_alpha = fam;
        self.intercept_mix_beta = fam;
        self.intercept_mix_alpha = fam;
        self
    }
}

/// Marginal family of the spike and slab components under the default
/// calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlabFamily {
    Normal,
    Laplace,
}

/// Calibration context: the simulation protocol pins both slab scales at
/// 0.5 and gives the intercepts the slab prior; applications use the
/// probit-scale slab for the selection equation, a log(n) slab for the
/// outcome equation, diffuse N(0, 100) intercepts, and a Beta(1, p+q)
/// inclusion prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationContext {
    Simulation,
    Application,
}

/// Default hyperparameters for a dataset of n rows with p outcome and q
/// selection covariates.
pub fn default_calibration(
    n: usize,
    p: usize,
    q: usize,
    family: SlabFamily,
    context: CalibrationContext,
) -> PriorSpec {
    let nf = n as f64;
    // C_beta = (4 log 500)^(-1/2); the slab grows like sqrt(log n)
    let c_beta = 1.0 / (4.0 * 500.0f64.ln()).sqrt();
    let (mut tau1_beta, mut tau1_alpha) = match context {
        CalibrationContext::Simulation => (0.5, 0.5),
        CalibrationContext::Application => (
            c_beta * (nf.max(2.0)).ln().sqrt(),
            3.0f64.sqrt() / std::f64::consts::PI,
        ),
    };
    let mut tau0_beta = 1.0 / (nf * p as f64).sqrt();
    let mut tau0_alpha = 1.0 / (nf * q as f64).sqrt();

    let mix = match family {
        SlabFamily::Normal => MixingFamily::PointMass,
        SlabFamily::Laplace => MixingFamily::ExponentialHalf,
    };
    if family == SlabFamily::Laplace {
        // Exp(1/2) mixing doubles the marginal variance; dividing every
        // scale by sqrt(2) restores equality with the normal calibration
        let s = std::f64::consts::SQRT_2;
        tau0_beta /= s;
        tau0_alpha /= s;
        tau1_beta /= s;
        tau1_alpha /= s;
    }
    // degenerate tiny n*p can invert the spike/slab ordering; keep the spike
    // strictly inside the slab
    tau0_beta = tau0_beta.min(tau1_beta / 2.0);
    tau0_alpha = tau0_alpha.min(tau1_alpha / 2.0);

    let (a0, b0) = match context {
        CalibrationContext::Simulation => (1.0, 1.0),
        CalibrationContext::Application => (1.0, (p + q) as f64),
    };
    let (eta_o, eta_s, intercept_mix) = match context {
        // slab variance and slab mixing family for the intercepts
        CalibrationContext::Simulation => (tau1_beta * tau1_beta, tau1_alpha * tau1_alpha, mix),
        CalibrationContext::Application => (100.0, 100.0, MixingFamily::PointMass),
    };

    PriorSpec {
        class: PriorClass::I,
        tau0_beta,
        tau1_beta,
        tau0_alpha,
        tau1_alpha,
        spike_mix_beta: mix,
        slab_mix_beta: mix,
        spike_mix_alpha: mix,
        slab_mix_alpha: mix,
        intercept_mix_beta: intercept_mix,
        intercept_mix_alpha: intercept_mix,
        a0,
        b0,
        c: 1.0,
        d: 1.0,
        tau: 5.0,
        eta_o,
        eta_s,
    }
}

/// Log density of one spike-and-slab mixture branch conditional on its
/// mixing variable: the N(0, tau^2 v) density at `value`. Class II call
/// sites additionally multiply the variance by sigma_tilde_sq before
/// calling. The branch density given v does not depend on the mixing
/// family.
pub fn spike_slab_logdensity(value: f64, tau: f64, v: f64) -> f64 {
    let sd = tau * v.sqrt();
    norm_logpdf(value / sd) - sd.ln()
}

/// Simulate from the prior induced on rho = rho_tilde / sigma by
/// sigma_tilde_sq ~ IG(c, d) and rho_tilde | sigma_tilde_sq ~ N(0, tau *
/// sigma_tilde_sq). Every draw lies strictly inside (-1, 1).
pub fn sample_induced_rho_prior(
    spec: &PriorSpec,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid_param("count must be at least 1"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let st2 = sample_inverse_gamma(spec.c, spec.d, rng)?;
        let rho_tilde = (spec.tau * st2).sqrt() * rng.standard_normal();
        out.push(rho_tilde / (st2 + rho_tilde * rho_tilde).sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_calibration_matches_paper_numbers() {
        let spec = default_calibration(500, 10, 10, SlabFamily::Normal, CalibrationContext::Simulation);
        spec.validate().unwrap();
        assert!((spec.tau1_beta - 0.5).abs() < 1e-15);
        assert!((spec.tau1_alpha - 0.5).abs() < 1e-15);
        // 1/sqrt(500 * 10)
        assert!((spec.tau0_beta - 0.014142135623730951).abs() < 1e-15);
        assert!((spec.tau0_alpha - 0.014142135623730951).abs() < 1e-15);
        assert_eq!(spec.a0, 1.0);
        assert_eq!(spec.b0, 1.0);
        assert_eq!(spec.tau, 5.0);
        assert_eq!(spec.c, 1.0);
        assert_eq!(spec.d, 1.0);
        // intercept prior carries the slab variance
        assert!((spec.eta_o - 0.25).abs() < 1e-15);
    }

    #[test]
    fn application_calibration() {
        let spec =
            default_calibration(500, 6, 7, SlabFamily::Normal, CalibrationContext::Application);
        spec.validate().unwrap();
        // sqrt(3)/pi
        assert!((spec.tau1_alpha - 0.5513288954217921).abs() < 1e-12);
        // (4 log 500)^(-1/2) sqrt(log 500) = 1/2 at n = 500
        assert!((spec.tau1_beta - 0.5).abs() < 1e-12);
        assert_eq!(spec.b0, 13.0);
        assert_eq!(spec.eta_o, 100.0);
        assert!(spec.intercept_mix_beta.is_point_mass());
    }

    #[test]
    fn laplace_calibration_preserves_marginal_variance() {
        let norm =
            default_calibration(500, 10, 10, SlabFamily::Normal, CalibrationContext::Simulation);
        let lap =
            default_calibration(500, 10, 10, SlabFamily::Laplace, CalibrationContext::Simulation);
        lap.validate().unwrap();
        let var_norm = norm.tau1_beta.powi(2) * norm.slab_mix_beta.mean();
        let var_lap = lap.tau1_beta.powi(2) * lap.slab_mix_beta.mean();
        assert!((var_norm - var_lap).abs() < 1e-12);
        assert_eq!(lap.slab_mix_beta, MixingFamily::ExponentialHalf);
    }

    #[test]
    fn calibration_valid_for_degenerate_sizes() {
        for n in [1usize, 2, 10, 500, 100_000] {
            for p in [1usize, 3, 50] {
                for fam in [SlabFamily::Normal, SlabFamily::Laplace] {
                    for ctx in [CalibrationContext::Simulation, CalibrationContext::Application] {
                        let spec = default_calibration(n, p, p, fam, ctx);
                        spec.validate()
                            .unwrap_or_else(|e| panic!("n={n} p={p}: {e}"));
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_point_mass_rejected() {
        let mut spec =
            default_calibration(500, 5, 5, SlabFamily::Normal, CalibrationContext::Simulation);
        spec.slab_mix_beta = MixingFamily::ExponentialHalf;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn branch_logdensity_at_origin() {
        // log phi(0) with unit scale
        assert!((spike_slab_logdensity(0.0, 1.0, 1.0) + 0.9189385332046728).abs() < 1e-12);
    }

    #[test]
    fn laplace_marginal_by_mixing_monte_carlo() {
        // averaging the conditional density over v ~ Exp(1/2) recovers the
        // Laplace(0, 1) density: value 0.5 * exp(-1) at x = 1, tau = 1
        let mut rng = RngStream::new(55, 0);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let v = MixingFamily::ExponentialHalf.sample(&mut rng).unwrap();
            acc += spike_slab_logdensity(1.0, 1.0, v).exp();
        }
        let mc = acc / n as f64;
        let want = 0.18393972058572117; // quadrature value of the mixture integral
        assert!((mc - want).abs() / want < 0.01, "mc {mc}");
    }

    #[test]
    fn induced_rho_prior_shape() {
        let spec =
            default_calibration(500, 10, 10, SlabFamily::Normal, CalibrationContext::Simulation);
        let mut rng = RngStream::new(56, 0);
        let draws = sample_induced_rho_prior(&spec, 1_000_000, &mut rng).unwrap();
        assert!(draws.iter().all(|r| r.abs() < 1.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
        // tau = 5: mass piles near the endpoints
        let extreme = draws.iter().filter(|r| r.abs() > 0.8).count() as f64;
        let central = draws.iter().filter(|r| r.abs() < 0.2).count() as f64;
        assert!(extreme > central, "tau=5: {extreme} vs {central}");

        // tau = 0.5 reverses the inequality
        let mut small = spec.clone();
        small.tau = 0.5;
        let draws = sample_induced_rho_prior(&small, 1_000_000, &mut rng).unwrap();
        let extreme = draws.iter().filter(|r| r.abs() > 0.8).count() as f64;
        let central = draws.iter().filter(|r| r.abs() < 0.2).count() as f64;
        assert!(central > extreme, "tau=0.5: {extreme} vs {central}");
    }

    #[test]
    fn ln_gamma_reference_values() {
        // Gamma(5) = 24
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        // Gamma(1/2) = sqrt(pi)
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
        // ln Gamma(1.5) = ln(sqrt(pi)/2)
        assert!((ln_gamma(1.5) - (std::f64::consts::PI.sqrt() / 2.0).ln()).abs() < 1e-12);
    }
}
