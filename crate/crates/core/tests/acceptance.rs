//! Acceptance gate. One test per criterion; each prints a single
//! `acceptance N PASS ...` line on success. The determinism criterion for the
//! `compare` command lives in the CLI crate's acceptance tests.

use std::collections::HashMap;
use std::time::Instant;

use semvox::fusion::{FusionStrategy, VoxelState};
use semvox::map::SemanticVoxelMap;
use semvox::metrics::evaluate;
use semvox::observation::{
    concentration, observation_from_moments, EpistemicVariance, FusionConfig,
};
use semvox::sim::{
    generate_scene, generate_trajectory, rasterize_gt, simulate_frame, AxisBox, FloorSpec,
    ObservationKind, Scene, SceneSpec, SensorModel, SubstreamRng, TrajectorySpec,
};
use semvox::types::{CameraIntrinsics, ClassProbs, VoxelKey};

/// Random point on the K-simplex with every component >= 0.05 / K.
fn random_probs(rng: &mut SubstreamRng, k: usize) -> ClassProbs<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 0.05 + 0.95 * rng.next_f64()).collect();
    ClassProbs::normalize(&raw).unwrap()
}

fn max_abs_diff(a: &ClassProbs<f64>, b: &ClassProbs<f64>) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn c01_robust_reduces_to_classic() {
    let start = Instant::now();
    let mut cfg = FusionConfig::<f64>::default();
    cfg.beta = 0.0;
    let mut worst = 0.0f64;
    for h in 0..200u64 {
        let mut rng = SubstreamRng::for_substream(0xA11CE, 1, h);
        let k = 2 + (rng.next_below(11) as usize);
        let n = 1 + rng.next_below(50) as usize;
        let mut classic = VoxelState::new(k, FusionStrategy::BayesianClassic);
        // beta = 0 and dirichlet off => p_tilde = mean, every exponent exactly 1
        let strategy = FusionStrategy::Robust {
            regularize: true,
            dirichlet: false,
        };
        let mut robust = VoxelState::new(k, strategy);
        for _ in 0..n {
            let p = random_probs(&mut rng, k);
            let var: Vec<f64> = (0..k).map(|_| 0.3 * rng.next_f64()).collect();
            let v = EpistemicVariance::from_raw(&var, cfg.eps_var);
            classic.fuse_classic(std::slice::from_ref(&p), cfg.p_min);
            robust.fuse_robust(&[observation_from_moments(&p, &v, true, false, &cfg)]);
            worst = worst.max(max_abs_diff(&classic.posterior(), &robust.posterior()));
        }
    }
    assert!(worst < 1e-9, "worst componentwise diff {worst}");
    assert!(start.elapsed().as_secs_f64() < 1.0);
    println!("acceptance 1 PASS reduction equivalence (worst diff {worst:.3e})");
}

#[test]
fn c02_log_space_matches_direct_product() {
    let start = Instant::now();
    let cfg = FusionConfig::<f64>::default();
    let mut worst = 0.0f64;
    for h in 0..100u64 {
        let mut rng = SubstreamRng::for_substream(0xA11CE, 2, h);
        let k = 2 + (rng.next_below(7) as usize);
        let n = 1 + rng.next_below(15) as usize;
        let obs: Vec<ClassProbs<f64>> = (0..n).map(|_| random_probs(&mut rng, k)).collect();

        let mut state = VoxelState::new(k, FusionStrategy::BayesianClassic);
        state.fuse_classic(&obs, cfg.p_min);

        // direct product oracle; components stay >= (0.05/8)^15 >> f64 underflow
        let mut prod = vec![1.0f64; k];
        for p in &obs {
            for (i, acc) in prod.iter_mut().enumerate() {
                *acc *= p.component(i);
            }
        }
        let z: f64 = prod.iter().sum();
        let oracle = ClassProbs::normalize(&prod.iter().map(|v| v / z).collect::<Vec<_>>())
            .unwrap();
        worst = worst.max(max_abs_diff(&state.posterior(), &oracle));
    }
    assert!(worst < 1e-9, "worst componentwise diff {worst}");
    assert!(start.elapsed().as_secs_f64() < 1.0);
    println!("acceptance 2 PASS oracle equivalence (worst diff {worst:.3e})");
}

#[test]
fn c03_outlier_instance() {
    let cfg = FusionConfig::<f64>::default();
    let prior = ClassProbs::new(vec![0.7, 0.3]).unwrap();
    let outlier_mean = ClassProbs::new(vec![0.01, 0.99]).unwrap();

    let mut classic = VoxelState::with_log_prior(&prior, vec![1.0, 1.0]);
    classic.fuse_classic(std::slice::from_ref(&outlier_mean), cfg.p_min);
    let classic_post = classic.posterior();
    assert_eq!(classic_post.argmax(), 1, "classic argmax must flip");
    assert!((classic_post.component(0) - 0.023).abs() < 1e-3);

    let mut robust = VoxelState::with_log_prior(&prior, vec![2.0, 2.0]);
    let var = EpistemicVariance::from_raw(&[0.2, 0.2], cfg.eps_var);
    robust.fuse_robust(&[observation_from_moments(
        &outlier_mean,
        &var,
        true,
        true,
        &cfg,
    )]);
    let robust_post = robust.posterior();
    assert!((robust_post.component(0) - 0.376).abs() < 1e-3);
    assert!((robust_post.component(1) - 0.624).abs() < 1e-3);
    assert!(robust_post.component(0) >= 16.0 * classic_post.component(0));
    println!(
        "acceptance 3 PASS outlier instance (robust {:.4} vs classic {:.4})",
        robust_post.component(0),
        classic_post.component(0)
    );
}

#[test]
fn c04_fuzz_normalization_and_bounds() {
    let start = Instant::now();
    let cfg = FusionConfig::<f64>::default();
    let strategy = FusionStrategy::Robust {
        regularize: true,
        dirichlet: true,
    };
    let mut updates = 0u64;
    for h in 0..2000u64 {
        let mut rng = SubstreamRng::for_substream(0xA11CE, 4, h);
        let k = 2 + (rng.next_below(7) as usize);
        let mut state = VoxelState::new(k, strategy);
        let mut prev_bar = state.alpha_bar().unwrap().to_vec();
        for _ in 0..50 {
            let p = random_probs(&mut rng, k);
            let var: Vec<f64> = (0..k).map(|_| 0.3 * rng.next_f64()).collect();
            let v = EpistemicVariance::from_raw(&var, cfg.eps_var);
            let obs = observation_from_moments(&p, &v, true, true, &cfg);
            let alpha = obs.alpha.clone();
            state.fuse_robust(&[obs]);
            updates += 1;

            let sum: f64 = state.posterior().as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "posterior sum {sum}");
            let bar = state.alpha_bar().unwrap();
            for i in 0..k {
                assert!(bar[i] >= prev_bar[i], "alpha_bar decreased");
                // exponent alpha_i / bar_i must land in (0, 1]
                let e = alpha[i] / bar[i];
                assert!(e > 0.0 && e <= 1.0 + 1e-15, "exponent {e} out of (0,1]");
            }
            prev_bar = bar.to_vec();
        }
    }
    assert_eq!(updates, 100_000);
    assert!(start.elapsed().as_secs_f64() < 10.0);
    println!("acceptance 4 PASS fuzz bounds over {updates} updates");
}

#[test]
fn c05_within_frame_permutation_invariance() {
    let cfg = FusionConfig::<f64>::default();
    let mut worst = 0.0f64;
    for h in 0..100u64 {
        let mut rng = SubstreamRng::for_substream(0xA11CE, 5, h);
        let k = 2 + (rng.next_below(5) as usize);
        let n = 2 + rng.next_below(7) as usize;
        let obs: Vec<_> = (0..n)
            .map(|_| {
                let p = random_probs(&mut rng, k);
                let var: Vec<f64> = (0..k).map(|_| 0.3 * rng.next_f64()).collect();
                let v = EpistemicVariance::from_raw(&var, cfg.eps_var);
                observation_from_moments(&p, &v, true, true, &cfg)
            })
            .collect();
        let probs: Vec<_> = obs.iter().map(|o| o.p_tilde.clone()).collect();

        let mut base_r = VoxelState::new(k, FusionStrategy::Robust {
            regularize: true,
            dirichlet: true,
        });
        base_r.fuse_robust(&obs);
        let mut base_c = VoxelState::new(k, FusionStrategy::BayesianClassic);
        base_c.fuse_classic(&probs, cfg.p_min);

        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..10 {
            // Fisher-Yates
            for i in (1..n).rev() {
                order.swap(i, rng.next_below(i as u64 + 1) as usize);
            }
            let shuffled_o: Vec<_> = order.iter().map(|&i| obs[i].clone()).collect();
            let shuffled_p: Vec<_> = order.iter().map(|&i| probs[i].clone()).collect();
            let mut r = VoxelState::new(k, FusionStrategy::Robust {
                regularize: true,
                dirichlet: true,
            });
            r.fuse_robust(&shuffled_o);
            let mut c = VoxelState::new(k, FusionStrategy::BayesianClassic);
            c.fuse_classic(&shuffled_p, cfg.p_min);
            worst = worst.max(max_abs_diff(&r.posterior(), &base_r.posterior()));
            worst = worst.max(max_abs_diff(&c.posterior(), &base_c.posterior()));
        }
    }
    assert!(worst < 1e-9, "worst diff {worst}");
    println!("acceptance 5 PASS permutation invariance (worst diff {worst:.3e})");
}

/// Three boxes floating just above a floor. Every face plane sits mid-voxel
/// (coordinates at multiples of 0.1 plus 0.05) so float error in ray hits
/// cannot cross a voxel boundary, and box cells never share a layer with
/// floor cells.
fn benchmark_scene() -> Scene {
    generate_scene(&SceneSpec {
        num_classes: 4,
        background_class: 0,
        boxes: vec![
            AxisBox {
                min: [0.55, -0.95, 0.15],
                max: [1.45, 0.35, 0.85],
                class: 1,
            },
            AxisBox {
                min: [-1.25, 0.65, 0.15],
                max: [-0.45, 1.55, 1.15],
                class: 2,
            },
            AxisBox {
                min: [-0.85, -1.35, 0.15],
                max: [-0.15, -0.55, 0.65],
                class: 3,
            },
        ],
        floor: Some(FloorSpec {
            z: 0.05,
            half_extent: 3.95,
            thickness: 0.1,
        }),
    })
    .unwrap()
}

fn orbit(frames: usize) -> Vec<semvox::sim::TimedPose> {
    generate_trajectory(&TrajectorySpec::Orbit {
        center: [0.0, 0.0, 0.45],
        radius: 2.8,
        height: 1.55,
        frames,
        dt: 0.1,
    })
    .unwrap()
}

#[test]
fn c06_noiseless_calibration_floor() {
    let start = Instant::now();
    let scene = benchmark_scene();
    let intr = CameraIntrinsics::new(110.0, 110.0, 80.0, 60.0, 160, 120).unwrap();
    let model = SensorModel {
        p_correct: 1.0,
        outlier_rate: 0.0,
        outlier_confidence: 0.99,
        epistemic_spread_correct: 0.0,
        epistemic_spread_outlier: 0.0,
        uncertainty_error_correlation: 0.0,
        seed: 7,
    };
    let cfg = FusionConfig::<f64>::default();
    let gt = rasterize_gt(&scene, 0.1);
    let gt_map: HashMap<VoxelKey, usize> = gt.iter().copied().collect();

    let mut maps: Vec<_> = FusionStrategy::BENCHMARK_ORDER
        .into_iter()
        .map(|s| SemanticVoxelMap::new(4, 0.1, s, cfg))
        .collect();
    for (i, tp) in orbit(60).iter().enumerate() {
        let (frame, _) = simulate_frame(
            &scene,
            tp,
            &intr,
            &model,
            1,
            i as u64,
            ObservationKind::MeanVariance,
        );
        for map in &mut maps {
            map.integrate_frame(&frame).unwrap();
        }
    }
    for map in &maps {
        let pred: Vec<(VoxelKey, usize)> = map
            .export_labels()
            .into_iter()
            .map(|(k, l, _)| (k, l))
            .collect();
        // observed voxels only: restrict GT to the keys the map touched
        let observed_gt: Vec<(VoxelKey, usize)> = pred
            .iter()
            .map(|&(k, _)| (k, *gt_map.get(&k).expect("predicted voxel must be a surface voxel")))
            .collect();
        let report = evaluate(4, &pred, &observed_gt).unwrap();
        assert_eq!(
            report.accuracy,
            1.0,
            "strategy {} accuracy {}",
            map.strategy().name(),
            report.accuracy
        );
        assert_eq!(
            report.miou,
            1.0,
            "strategy {} miou {}",
            map.strategy().name(),
            report.miou
        );
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 30.0, "took {secs:.1}s");
    println!("acceptance 6 PASS calibration floor ({secs:.1}s, all strategies exact)");
}

#[test]
fn c07_robustness_benchmark() {
    let start = Instant::now();
    let scene = benchmark_scene();
    let intr = CameraIntrinsics::new(85.0, 85.0, 60.0, 45.0, 120, 90).unwrap();
    let cfg = FusionConfig::<f64>::default();
    let gt = rasterize_gt(&scene, 0.1);
    let gt_map: HashMap<VoxelKey, usize> = gt.iter().copied().collect();
    let strategies = [
        FusionStrategy::SumProbs,
        FusionStrategy::BayesianClassic,
        FusionStrategy::Robust {
            regularize: true,
            dirichlet: true,
        },
    ];
    let mut mean_miou = [0.0f64; 3];
    let seeds = [101u64, 202, 303];
    for &seed in &seeds {
        let model = SensorModel {
            p_correct: 0.85,
            outlier_rate: 0.15,
            outlier_confidence: 0.99,
            epistemic_spread_correct: 2e-4,
            epistemic_spread_outlier: 1.0,
            uncertainty_error_correlation: 0.8,
            seed,
        };
        let trajectory = orbit(20);
        let mut maps: Vec<_> = strategies
            .iter()
            .map(|&s| SemanticVoxelMap::new(4, 0.1, s, cfg).with_stride(2))
            .collect();
        for (i, tp) in trajectory.iter().enumerate() {
            let (frame, _) = simulate_frame(
                &scene,
                tp,
                &intr,
                &model,
                32,
                i as u64,
                ObservationKind::MeanVariance,
            );
            for map in &mut maps {
                map.integrate_frame(&frame).unwrap();
            }
        }
        for (mi, map) in maps.iter().enumerate() {
            let pred: Vec<(VoxelKey, usize)> = map
                .export_labels()
                .into_iter()
                .map(|(k, l, _)| (k, l))
                .collect();
            let observed_gt: Vec<(VoxelKey, usize)> = pred
                .iter()
                .map(|&(k, _)| (k, gt_map[&k]))
                .collect();
            mean_miou[mi] += 100.0 * evaluate(4, &pred, &observed_gt).unwrap().miou;
        }
    }
    for m in &mut mean_miou {
        *m /= seeds.len() as f64;
    }
    let [sum_probs, classic, robust_dr] = mean_miou;
    assert!(
        robust_dr >= classic + 2.0,
        "robust_dr {robust_dr:.1} vs classic {classic:.1}"
    );
    assert!(
        robust_dr >= sum_probs,
        "robust_dr {robust_dr:.1} vs sum_probs {sum_probs:.1}"
    );
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 300.0, "took {secs:.1}s");
    println!(
        "acceptance 7 PASS robustness benchmark ({secs:.1}s, mIoU robust_dr {robust_dr:.1} classic {classic:.1} sum_probs {sum_probs:.1})"
    );
}

#[test]
fn c08_metric_oracle() {
    for h in 0..50u64 {
        let mut rng = SubstreamRng::for_substream(0xA11CE, 8, h);
        let k = 2 + (rng.next_below(5) as usize);
        let n_gt = 1 + rng.next_below(1000) as usize;
        let side = 12i64;
        let key = |rng: &mut SubstreamRng| VoxelKey {
            ix: rng.next_below(side as u64 * 2) as i64 - side,
            iy: rng.next_below(side as u64 * 2) as i64 - side,
            iz: rng.next_below(side as u64 * 2) as i64 - side,
        };
        let mut gt_map: HashMap<VoxelKey, usize> = HashMap::new();
        for _ in 0..n_gt {
            let c = rng.next_below(k as u64) as usize;
            gt_map.insert(key(&mut rng), c);
        }
        let gt: Vec<(VoxelKey, usize)> = gt_map.iter().map(|(&k, &c)| (k, c)).collect();
        // prediction: mutate labels, drop some voxels, add some spurious ones
        let mut pred_map: HashMap<VoxelKey, usize> = HashMap::new();
        for &(kk, c) in &gt {
            let r = rng.next_f64();
            if r < 0.2 {
                continue;
            }
            let label = if r < 0.5 {
                rng.next_below(k as u64) as usize
            } else {
                c
            };
            pred_map.insert(kk, label);
        }
        for _ in 0..rng.next_below(200) {
            pred_map.insert(key(&mut rng), rng.next_below(k as u64) as usize);
        }
        let pred: Vec<(VoxelKey, usize)> = pred_map.iter().map(|(&k, &c)| (k, c)).collect();

        let report = evaluate(k, &pred, &gt).unwrap();

        // brute-force confusion oracle
        let mut tp = vec![0u64; k];
        let mut fp = vec![0u64; k];
        let mut fne = vec![0u64; k];
        let mut confusion = vec![0u64; k * k];
        for (&kk, &p) in &pred_map {
            match gt_map.get(&kk) {
                Some(&g) => {
                    confusion[g * k + p] += 1;
                    if g == p {
                        tp[p] += 1;
                    } else {
                        fp[p] += 1;
                        fne[g] += 1;
                    }
                }
                None => fp[p] += 1,
            }
        }
        for (&kk, &g) in &gt_map {
            if !pred_map.contains_key(&kk) {
                fne[g] += 1;
            }
        }
        assert_eq!(report.confusion, confusion);
        let mut ious = Vec::new();
        for c in 0..k {
            let denom = tp[c] + fp[c] + fne[c];
            let iou = (denom > 0).then(|| tp[c] as f64 / denom as f64);
            assert_eq!(report.per_class_iou[c], iou);
            if let Some(v) = iou {
                ious.push(v);
            }
        }
        assert_eq!(report.miou, ious.iter().sum::<f64>() / ious.len() as f64);
        assert_eq!(
            report.accuracy,
            tp.iter().sum::<u64>() as f64 / gt_map.len() as f64
        );
    }
    println!("acceptance 8 PASS metric oracle exact on 50 random maps");
}

#[test]
fn c10_concentration_monotone() {
    let mut rng = SubstreamRng::for_substream(0xA11CE, 10, 0);
    for _ in 0..10_000 {
        let lo = 1e-6f64;
        let hi = 0.25f64;
        let mut a = lo + (hi - lo) * rng.next_f64();
        let mut b = lo + (hi - lo) * rng.next_f64();
        if a == b {
            continue;
        }
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let ca = concentration(&EpistemicVariance::from_raw(&[a], 1e-6))[0];
        let cb = concentration(&EpistemicVariance::from_raw(&[b], 1e-6))[0];
        assert!(ca > cb, "concentration({a}) = {ca} !> concentration({b}) = {cb}");
    }
    println!("acceptance 10 PASS concentration strictly decreasing in variance");
}
