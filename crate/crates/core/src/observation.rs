//! Turns raw Bayesian-sensor output (MC dropout samples, or precomputed
//! mean/variance tensors) into calibrated observation units.
//!
//! An observation unit is a regularized probability vector plus per-class
//! Dirichlet concentration parameters derived from the epistemic variance:
//! `alpha_i = -ln(var_i)` with the variance clamped into `[eps_var, 0.25]`.
//! Natural logarithm throughout; 0.25 is the analytic maximum variance of a
//! [0, 1]-valued variable, so `alpha` always lands in
//! `[-ln(0.25), -ln(eps_var)]`.

use crate::scalar::Real;
use crate::types::ClassProbs;

/// Set of M Monte-Carlo forward passes for one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct McSampleSet<T> {
    samples: Vec<ClassProbs<T>>,
}

impl<T: Real> McSampleSet<T> {
    /// Requires at least one sample; all samples must share the class count.
    pub fn new(samples: Vec<ClassProbs<T>>) -> Self {
        assert!(!samples.is_empty(), "need at least one MC sample");
        let k = samples[0].num_classes();
        assert!(
            samples.iter().all(|s| s.num_classes() == k),
            "samples must share the class count"
        );
        Self { samples }
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn num_classes(&self) -> usize {
        self.samples[0].num_classes()
    }

    pub fn samples(&self) -> &[ClassProbs<T>] {
        &self.samples
    }
}

/// Per-class marginal variance of the MC samples, clamped into
/// `[eps_var, 0.25]`. Only the diagonal of the sample covariance is kept;
/// the off-diagonal terms are never consumed by the fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct EpistemicVariance<T> {
    var: Vec<T>,
}

impl<T: Real> EpistemicVariance<T> {
    /// Clamp raw per-class variances into `[eps_var, 0.25]`.
    pub fn from_raw(raw: &[T], eps_var: T) -> Self {
        let ceil = T::from_f64_lossy(0.25);
        Self {
            var: raw.iter().map(|&v| v.max(eps_var).min(ceil)).collect(),
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.var
    }
}

/// Regularized probability vector + per-class concentration parameters for
/// one observation unit (a pixel projected into a voxel).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletObservation<T> {
    pub p_tilde: ClassProbs<T>,
    pub alpha: Vec<T>,
}

/// Knobs shared by observation building and fusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig<T> {
    /// Mixing weight towards the uniform distribution, in [0, 1].
    pub beta: T,
    /// Variance clamp floor; keeps `-ln(var)` finite.
    pub eps_var: T,
    /// Probability clamp floor for unregularized log-space fusion.
    pub p_min: T,
    /// Expected MC sample count (metadata; the math uses whatever arrives).
    pub mc_samples: usize,
}

impl<T: Real> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            beta: T::from_f64_lossy(0.3),
            eps_var: T::from_f64_lossy(1e-6),
            p_min: T::from_f64_lossy(1e-3),
            mc_samples: 32,
        }
    }
}

impl<T: Real> FusionConfig<T> {
    /// Smallest attainable concentration, `-ln(0.25)`.
    pub fn alpha_min() -> T {
        -T::from_f64_lossy(0.25).ln()
    }

    pub fn validate(&self, k: usize) -> Result<(), String> {
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(format!("beta = {} outside [0, 1]", self.beta));
        }
        if !(self.eps_var > T::zero() && self.eps_var <= T::from_f64_lossy(0.25)) {
            return Err(format!("eps_var = {} outside (0, 0.25]", self.eps_var));
        }
        let inv_k = T::one() / T::from_f64_lossy(k as f64);
        if !(self.p_min > T::zero() && self.p_min < inv_k) {
            return Err(format!("p_min = {} outside (0, 1/K)", self.p_min));
        }
        if self.mc_samples == 0 {
            return Err("mc_samples must be positive".into());
        }
        Ok(())
    }
}

/// Componentwise mean of the MC samples (the predictive posterior).
pub fn predictive_mean<T: Real>(s: &McSampleSet<T>) -> ClassProbs<T> {
    let k = s.num_classes();
    let m = T::from_f64_lossy(s.num_samples() as f64);
    let mut mean = vec![T::zero(); k];
    for sample in s.samples() {
        for (acc, &v) in mean.iter_mut().zip(sample.as_slice()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    ClassProbs::from_normalized_unchecked(mean)
}

/// Per-class population variance (1/M · Σ (p - mean)²) of the MC samples,
/// clamped into `[eps_var, 0.25]`.
pub fn epistemic_variance<T: Real>(s: &McSampleSet<T>, eps_var: T) -> EpistemicVariance<T> {
    let mean = predictive_mean(s);
    let k = s.num_classes();
    let m = T::from_f64_lossy(s.num_samples() as f64);
    let mut var = vec![T::zero(); k];
    for sample in s.samples() {
        for i in 0..k {
            let d = sample.component(i) - mean.component(i);
            var[i] += d * d;
        }
    }
    for v in &mut var {
        *v /= m;
    }
    EpistemicVariance::from_raw(&var, eps_var)
}

/// Shannon entropy of the predictive distribution in nats, with 0·ln 0 := 0.
/// Diagnostic only; the fusion itself never consumes it.
pub fn aleatoric_entropy<T: Real>(p: &ClassProbs<T>) -> T {
    let mut h = T::zero();
    for &v in p.as_slice() {
        if v > T::zero() {
            h -= v * v.ln();
        }
    }
    h
}

/// Convex mix towards the uniform distribution:
/// `(1 - beta) · p + beta · (1/K, ..., 1/K)`.
pub fn regularize<T: Real>(p: &ClassProbs<T>, beta: T) -> ClassProbs<T> {
    let k = p.num_classes();
    let u = T::one() / T::from_f64_lossy(k as f64);
    let out = p
        .as_slice()
        .iter()
        .map(|&v| (T::one() - beta) * v + beta * u)
        .collect();
    ClassProbs::from_normalized_unchecked(out)
}

/// Per-class Dirichlet concentration `alpha_i = -ln(var_i)`; strictly
/// decreasing in the variance, so uncertain observations weigh less.
pub fn concentration<T: Real>(v: &EpistemicVariance<T>) -> Vec<T> {
    v.as_slice().iter().map(|&x| -x.ln()).collect()
}

/// Full observation pipeline: predictive mean → regularization, MC variance →
/// concentration.
pub fn build_observation<T: Real>(
    s: &McSampleSet<T>,
    cfg: &FusionConfig<T>,
) -> DirichletObservation<T> {
    let mean = predictive_mean(s);
    let var = epistemic_variance(s, cfg.eps_var);
    observation_from_moments(&mean, &var, true, true, cfg)
}

/// Observation builder from precomputed moments. `regularize_on` /
/// `dirichlet_on` select the ablation variant:
/// - both on: the full robust observation;
/// - `regularize_on` off: the mean is clamped to `[p_min, 1]` and rescaled
///   onto the simplex to keep logs finite;
/// - `dirichlet_on` off: all concentrations forced to 1.
pub fn observation_from_moments<T: Real>(
    mean: &ClassProbs<T>,
    var: &EpistemicVariance<T>,
    regularize_on: bool,
    dirichlet_on: bool,
    cfg: &FusionConfig<T>,
) -> DirichletObservation<T> {
    let p_tilde = if regularize_on {
        regularize(mean, cfg.beta)
    } else {
        let clamped: Vec<T> = mean
            .as_slice()
            .iter()
            .map(|&v| v.max(cfg.p_min).min(T::one()))
            .collect();
        ClassProbs::normalize(&clamped).expect("clamped vector is positive")
    };
    let alpha = if dirichlet_on {
        concentration(var)
    } else {
        vec![T::one(); mean.num_classes()]
    };
    DirichletObservation { p_tilde, alpha }
}
