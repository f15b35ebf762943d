//! Per-voxel fusion state and the four fusion strategies: probability
//! averaging, label voting, the classic Bayesian product, and the robust
//! concentration-weighted update.
//!
//! All multiplicative fusion runs in log space so that products of hundreds
//! of probabilities never underflow; the posterior is renormalized at every
//! query via log-sum-exp.

use crate::observation::{DirichletObservation, FusionConfig};
use crate::scalar::Real;
use crate::types::ClassProbs;

/// Which update rule a map applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionStrategy {
    /// Accumulate the predicted probability vectors and renormalize.
    SumProbs,
    /// Count argmax votes per class.
    SumLabels,
    /// Log-space product of per-observation probabilities.
    BayesianClassic,
    /// Concentration-weighted log-space fusion. `regularize` mixes each
    /// observation towards uniform; `dirichlet` derives per-class exponents
    /// from the epistemic variance. With both off this reduces exactly to
    /// `BayesianClassic`.
    Robust { regularize: bool, dirichlet: bool },
}

impl FusionStrategy {
    /// Benchmark row order: baselines first, then the ablations R, D, D+R.
    pub const BENCHMARK_ORDER: [FusionStrategy; 6] = [
        FusionStrategy::SumProbs,
        FusionStrategy::SumLabels,
        FusionStrategy::BayesianClassic,
        FusionStrategy::Robust {
            regularize: true,
            dirichlet: false,
        },
        FusionStrategy::Robust {
            regularize: false,
            dirichlet: true,
        },
        FusionStrategy::Robust {
            regularize: true,
            dirichlet: true,
        },
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FusionStrategy::SumProbs => "sum_probs",
            FusionStrategy::SumLabels => "sum_labels",
            FusionStrategy::BayesianClassic => "bayesian",
            FusionStrategy::Robust {
                regularize: true,
                dirichlet: false,
            } => "robust_r",
            FusionStrategy::Robust {
                regularize: false,
                dirichlet: true,
            } => "robust_d",
            FusionStrategy::Robust {
                regularize: true,
                dirichlet: true,
            } => "robust_dr",
            FusionStrategy::Robust {
                regularize: false,
                dirichlet: false,
            } => "robust_none",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::BENCHMARK_ORDER
            .iter()
            .copied()
            .chain(std::iter::once(FusionStrategy::Robust {
                regularize: false,
                dirichlet: false,
            }))
            .find(|s| s.name() == name)
    }

    pub fn is_robust(&self) -> bool {
        matches!(self, FusionStrategy::Robust { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Accum<T> {
    Log { log_score: Vec<T>, alpha_bar: Vec<T> },
    ProbSum(Vec<T>),
    Votes(Vec<u64>),
}

/// Fused per-voxel state. Log-space strategies keep the unnormalized log
/// posterior plus the per-class running maximum concentration; the baselines
/// keep their own accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelState<T> {
    accum: Accum<T>,
    obs_count: u64,
}

impl<T: Real> VoxelState<T> {
    /// Fresh voxel: uniform prior, zero observations. For Dirichlet-weighted
    /// strategies `alpha_bar` starts at the smallest attainable concentration
    /// `-ln(0.25)`; the uniform prior is invariant under any positive
    /// exponent, so this cannot bias the first update. For constant-alpha
    /// variants it starts at the forced constant 1 so that the exponents are
    /// exactly 1 and the update matches the classic product.
    pub fn new(k: usize, strategy: FusionStrategy) -> Self {
        assert!(k >= 2, "need at least two classes");
        let accum = match strategy {
            FusionStrategy::SumProbs => Accum::ProbSum(vec![T::zero(); k]),
            FusionStrategy::SumLabels => Accum::Votes(vec![0; k]),
            FusionStrategy::BayesianClassic | FusionStrategy::Robust { .. } => {
                let alpha0 = match strategy {
                    FusionStrategy::Robust { dirichlet: true, .. } => FusionConfig::<T>::alpha_min(),
                    _ => T::one(),
                };
                let lp = -(T::from_f64_lossy(k as f64)).ln();
                Accum::Log {
                    log_score: vec![lp; k],
                    alpha_bar: vec![alpha0; k],
                }
            }
        };
        Self {
            accum,
            obs_count: 0,
        }
    }

    /// Log-space state seeded from an explicit prior and running maxima.
    pub fn with_log_prior(prior: &ClassProbs<T>, alpha_bar: Vec<T>) -> Self {
        assert_eq!(prior.num_classes(), alpha_bar.len());
        Self {
            accum: Accum::Log {
                log_score: prior.as_slice().iter().map(|&p| p.ln()).collect(),
                alpha_bar,
            },
            obs_count: 0,
        }
    }

    pub fn obs_count(&self) -> u64 {
        self.obs_count
    }

    pub fn alpha_bar(&self) -> Option<&[T]> {
        match &self.accum {
            Accum::Log { alpha_bar, .. } => Some(alpha_bar),
            _ => None,
        }
    }

    /// Classic Bayesian product over one frame's observations for this voxel.
    /// Probabilities are clamped to `[p_min, 1]` so the log stays finite.
    pub fn fuse_classic(&mut self, obs: &[ClassProbs<T>], p_min: T) {
        let Accum::Log { log_score, .. } = &mut self.accum else {
            panic!("fuse_classic on a non log-space accumulator");
        };
        for o in obs {
            for (s, &p) in log_score.iter_mut().zip(o.as_slice()) {
                *s += p.max(p_min).min(T::one()).ln();
            }
        }
        self.obs_count += obs.len() as u64;
    }

    /// Concentration-weighted update over one frame's observations.
    ///
    /// Per class i, with `new_bar_i = max(alpha_bar_i, max_j alpha_j_i)`:
    ///
    /// ```text
    /// log p_i  <-  (alpha_bar_i / new_bar_i) * log p_i
    ///            + sum_j (alpha_j_i / new_bar_i) * ln p_tilde_j_i
    /// ```
    ///
    /// The running maximum includes the current frame, which keeps every
    /// exponent in (0, 1]. The prior term is normalized before the exponent
    /// is applied: the per-class exponents are not shared, so the exponent of
    /// an unnormalized score would leak the (arbitrary) normalization
    /// constant into the posterior.
    pub fn fuse_robust(&mut self, obs: &[DirichletObservation<T>]) {
        let Accum::Log {
            log_score,
            alpha_bar,
        } = &mut self.accum
        else {
            panic!("fuse_robust on a non log-space accumulator");
        };
        let k = log_score.len();
        let lse = log_sum_exp(log_score);
        for i in 0..k {
            let obs_max = obs
                .iter()
                .map(|o| o.alpha[i])
                .fold(T::neg_infinity(), T::max);
            let new_bar = alpha_bar[i].max(obs_max);
            let prior_exp = alpha_bar[i] / new_bar;
            debug_assert!(
                prior_exp > T::zero() && prior_exp <= T::one(),
                "prior exponent {prior_exp} outside (0, 1]"
            );
            let mut score = prior_exp * (log_score[i] - lse);
            for o in obs {
                let e = o.alpha[i] / new_bar;
                debug_assert!(
                    e > T::zero() && e <= T::one(),
                    "observation exponent {e} outside (0, 1]"
                );
                score += e * o.p_tilde.component(i).ln();
            }
            log_score[i] = score;
            alpha_bar[i] = new_bar;
        }
        self.obs_count += obs.len() as u64;
    }

    /// Accumulate predicted probability vectors.
    pub fn fuse_sum_probs(&mut self, obs: &[ClassProbs<T>]) {
        let Accum::ProbSum(acc) = &mut self.accum else {
            panic!("fuse_sum_probs on a non prob-sum accumulator");
        };
        for o in obs {
            for (a, &p) in acc.iter_mut().zip(o.as_slice()) {
                *a += p;
            }
        }
        self.obs_count += obs.len() as u64;
    }

    /// Count one argmax vote per observation.
    pub fn fuse_sum_labels(&mut self, obs: &[ClassProbs<T>]) {
        let Accum::Votes(votes) = &mut self.accum else {
            panic!("fuse_sum_labels on a non vote accumulator");
        };
        for o in obs {
            votes[o.argmax()] += 1;
        }
        self.obs_count += obs.len() as u64;
    }

    /// Strategy-appropriate normalized posterior. Fresh accumulators yield
    /// the uniform distribution.
    pub fn posterior(&self) -> ClassProbs<T> {
        match &self.accum {
            Accum::Log { log_score, .. } => {
                let lse = log_sum_exp(log_score);
                ClassProbs::from_normalized_unchecked(
                    log_score.iter().map(|&s| (s - lse).exp()).collect(),
                )
            }
            Accum::ProbSum(acc) => {
                let total: T = acc.iter().copied().sum();
                if total <= T::zero() {
                    ClassProbs::uniform(acc.len())
                } else {
                    ClassProbs::from_normalized_unchecked(
                        acc.iter().map(|&v| v / total).collect(),
                    )
                }
            }
            Accum::Votes(votes) => {
                let total: u64 = votes.iter().sum();
                if total == 0 {
                    ClassProbs::uniform(votes.len())
                } else {
                    let t = T::from_f64_lossy(total as f64);
                    ClassProbs::from_normalized_unchecked(
                        votes
                            .iter()
                            .map(|&v| T::from_f64_lossy(v as f64) / t)
                            .collect(),
                    )
                }
            }
        }
    }
}

/// Overflow-safe log-sum-exp.
fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
