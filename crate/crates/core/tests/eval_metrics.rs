mod common;

use common::oracles::{monotone_map, oracle_srocc, tied_vector};
use proptest::prelude::*;
use skillpath_core::data::{make_splits, synth_trials, SplitScheme, SynthConfig, Trial, TrialMeta};
use skillpath_core::eval::{
    correlation_analysis, cross_validate, fisher_z_average, srocc, Learner,
};
use skillpath_core::model::{Model, ModelConfig, PathId, PathSet};
use skillpath_core::numcore::{Rng, Tensor2D};
use skillpath_core::{Error, Execution, Result};

#[test]
fn srocc_matches_counting_oracle() {
    let mut rng = Rng::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 2 + rng.below(49);
        let a = tied_vector(n, &mut rng);
        let b = tied_vector(n, &mut rng);
        let got = srocc(&a, &b).unwrap().rho;
        worst = worst.max((got - oracle_srocc(&a, &b)).abs());
    }
    assert!(worst <= 1e-10, "worst deviation {worst}");
}

#[test]
fn srocc_example_with_ties() {
    let (a, b) = ([1.0, 2.0, 2.0, 4.0], [1.0, 3.0, 2.0, 4.0]);
    let expect = oracle_srocc(&a, &b);
    assert!((srocc(&a, &b).unwrap().rho - expect).abs() < 1e-15);
}

#[test]
fn srocc_invariant_under_monotone_maps() {
    let mut rng = Rng::new(7);
    for i in 0..100 {
        let n = 2 + rng.below(49);
        let a = tied_vector(n, &mut rng);
        let b = tied_vector(n, &mut rng);
        let f = monotone_map(i, &mut rng);
        let mapped: Vec<f64> = a.iter().map(|&x| f(x)).collect();
        assert_eq!(
            srocc(&mapped, &b).unwrap(),
            srocc(&a, &b).unwrap(),
            "map {i}"
        );
        let mapped_b: Vec<f64> = b.iter().map(|&x| f(x)).collect();
        assert_eq!(
            srocc(&a, &mapped_b).unwrap(),
            srocc(&a, &b).unwrap(),
            "map {i}"
        );
    }
}

#[test]
fn srocc_errors() {
    assert!(matches!(srocc(&[1.0], &[1.0]), Err(Error::Usage(_))));
    assert!(matches!(srocc(&[1.0, 2.0], &[1.0]), Err(Error::Usage(_))));
}

#[test]
fn fisher_examples() {
    assert!((fisher_z_average(&[0.834, 0.756, 0.819]).unwrap() - 0.805).abs() <= 1e-3);
    assert!((fisher_z_average(&[0.791, 0.761, 0.784]).unwrap() - 0.779).abs() <= 1e-3);
    for r in [-0.9, -0.3, 0.0, 0.42, 0.99] {
        assert!((fisher_z_average(&[r, r, r]).unwrap() - r).abs() <= 1e-12);
    }
    assert!(matches!(fisher_z_average(&[]), Err(Error::Usage(_))));
    assert!(fisher_z_average(&[1.0, 1.0]).unwrap() < 1.0);
}

#[test]
fn fisher_near_linear_for_small_correlations() {
    let mut rng = Rng::new(11);
    for _ in 0..500 {
        let n = 1 + rng.below(6);
        let small: Vec<f64> = (0..n).map(|_| rng.uniform_range(-0.01, 0.01)).collect();
        let mean = small.iter().sum::<f64>() / n as f64;
        assert!((fisher_z_average(&small).unwrap() - mean).abs() <= 1e-6);

        // at |r| <= 0.1 the gap is third order in r
        let wider: Vec<f64> = small.iter().map(|r| r * 10.0).collect();
        let mean = wider.iter().sum::<f64>() / n as f64;
        assert!((fisher_z_average(&wider).unwrap() - mean).abs() <= 0.1f64.powi(3) / 3.0);
    }
}

proptest! {
    #[test]
    fn srocc_symmetric_and_bounded(pairs in proptest::collection::vec((-5i32..5, -1e3f64..1e3), 2..40)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ab = srocc(&a, &b).unwrap();
        let ba = srocc(&b, &a).unwrap();
        prop_assert_eq!(ab.rho, ba.rho);
        prop_assert!((-1.0..=1.0).contains(&ab.rho));
    }

    #[test]
    fn fisher_within_range(rs in proptest::collection::vec(-0.999f64..0.999, 1..10)) {
        let z = fisher_z_average(&rs).unwrap();
        let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(z >= lo - 1e-12 && z <= hi + 1e-12);
    }
}

struct Oracle;

impl Learner for Oracle {
    fn describe(&self) -> String {
        "oracle".into()
    }
    fn fit_predict(&self, _: &[&Trial], test: &[&Trial], _: u64, _: Execution) -> Result<Vec<f64>> {
        test.iter().map(|t| t.target()).collect()
    }
}

struct Constant;

impl Learner for Constant {
    fn describe(&self) -> String {
        "constant".into()
    }
    fn fit_predict(&self, _: &[&Trial], test: &[&Trial], _: u64, _: Execution) -> Result<Vec<f64>> {
        Ok(vec![0.5; test.len()])
    }
}

/// Depends on the seed and the training set so determinism is meaningful.
struct Noisy;

impl Learner for Noisy {
    fn describe(&self) -> String {
        "noisy".into()
    }
    fn fit_predict(
        &self,
        train: &[&Trial],
        test: &[&Trial],
        seed: u64,
        _: Execution,
    ) -> Result<Vec<f64>> {
        let mut rng = Rng::new(seed ^ train.len() as u64);
        test.iter()
            .map(|t| Ok(t.target()? + rng.normal(0.0, 0.2)))
            .collect()
    }
}

fn small_dataset(n: usize) -> Vec<Trial> {
    let cfg = SynthConfig {
        n_trials: n,
        length_min: 20,
        length_max: 40,
        tasks: vec!["a".into(), "b".into()],
        ..Default::default()
    };
    synth_trials(&cfg, Execution::Sequential)
        .unwrap()
        .into_iter()
        .map(|s| s.trial)
        .collect()
}

fn metas(trials: &[Trial]) -> Vec<TrialMeta> {
    trials.iter().map(|t| t.meta.clone()).collect()
}

#[test]
fn oracle_learner_scores_one() {
    let trials = small_dataset(24);
    let plan = make_splits(&metas(&trials), SplitScheme::KFold(4), 1).unwrap();
    let report = cross_validate(&trials, &plan, &Oracle, 2, 0, Execution::Sequential).unwrap();
    for run in &report.runs {
        assert!(run.per_task.values().all(|t| (t.srocc - 1.0).abs() < 1e-12));
        assert!((run.overall - 1.0).abs() < 1e-6);
        assert_eq!(
            run.folds.iter().map(|f| f.predictions.len()).sum::<usize>(),
            24
        );
    }
}

#[test]
fn constant_learner_is_degenerate() {
    let trials = small_dataset(12);
    let plan = make_splits(&metas(&trials), SplitScheme::KFold(3), 1).unwrap();
    let report = cross_validate(&trials, &plan, &Constant, 1, 0, Execution::Sequential).unwrap();
    let run = &report.runs[0];
    assert!(run
        .per_task
        .values()
        .all(|t| t.srocc == 0.0 && t.degenerate));
    assert!(run.folds.iter().all(|f| f.degenerate));
    assert_eq!(run.overall, 0.0);
}

#[test]
fn cross_validation_is_deterministic() {
    let trials = small_dataset(20);
    let plan = make_splits(&metas(&trials), SplitScheme::Louo, 3).unwrap();
    let a = cross_validate(&trials, &plan, &Noisy, 3, 9, Execution::Sequential).unwrap();
    let b = cross_validate(&trials, &plan, &Noisy, 3, 9, Execution::Parallel).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let c = cross_validate(&trials, &plan, &Noisy, 3, 10, Execution::Sequential).unwrap();
    assert_ne!(a.to_json(), c.to_json());
    assert!(a.std_overall > 0.0);
}

#[test]
fn cross_validation_rejects_uncovered_trials() {
    let trials = small_dataset(12);
    let plan = make_splits(&metas(&trials[..10]), SplitScheme::KFold(2), 0).unwrap();
    assert!(cross_validate(&trials, &plan, &Oracle, 1, 0, Execution::Sequential).is_err());
}

fn model_for(trials: &[Trial], seed: u64) -> Model {
    let dims = trials[0]
        .features
        .iter()
        .map(|(&id, x)| (id, x.cols()))
        .collect();
    Model::new(ModelConfig::new(&dims, &PathSet::all()).unwrap(), seed).unwrap()
}

#[test]
fn correlation_examples() {
    let trials = small_dataset(3);
    let model = model_for(&trials, 0);
    let traces: Vec<_> = trials
        .iter()
        .map(|t| model.forward(&t.features).unwrap())
        .collect();
    let only_t = PathSet::new([PathId::T]).unwrap();

    // feature channel equal to the path's own weighted scores
    let own: Vec<Tensor2D> = traces
        .iter()
        .map(|tr| Tensor2D::column(&tr.paths[&PathId::T].weighted_scores()))
        .collect();
    let refs: Vec<&Tensor2D> = own.iter().collect();
    let r = correlation_analysis(&traces, &refs, 0, &only_t).unwrap();
    assert!((r - 1.0).abs() < 1e-12);

    let flat: Vec<Tensor2D> = traces
        .iter()
        .map(|tr| Tensor2D::filled(tr.len(), 2, 3.0))
        .collect();
    let refs: Vec<&Tensor2D> = flat.iter().collect();
    assert_eq!(
        correlation_analysis(&traces, &refs, 1, &PathSet::all()).unwrap(),
        0.0
    );
    assert!(matches!(
        correlation_analysis(&traces, &refs, 2, &PathSet::all()),
        Err(Error::Usage(_))
    ));
}

#[test]
fn constant_proxy_is_excluded() {
    let mut trials = small_dataset(2);
    for t in &mut trials {
        let len = t.len();
        t.features.insert(PathId::P, Tensor2D::filled(len, 1, 0.4));
    }
    let model = model_for(&trials, 1);
    let traces: Vec<_> = trials
        .iter()
        .map(|t| model.forward(&t.features).unwrap())
        .collect();
    let own: Vec<Tensor2D> = traces
        .iter()
        .map(|tr| Tensor2D::column(&tr.paths[&PathId::E].weighted_scores()))
        .collect();
    let refs: Vec<&Tensor2D> = own.iter().collect();
    let pe = PathSet::new([PathId::P, PathId::E]).unwrap();
    // the constant proxy drops out, so E alone decides
    assert!((correlation_analysis(&traces, &refs, 0, &pe).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn proxy_channel_beats_noise_channel() {
    let runs = 20;
    let mut wins = 0;
    for seed in 0..runs {
        let cfg = SynthConfig {
            n_trials: 4,
            length_min: 30,
            length_max: 60,
            seed,
            ..Default::default()
        };
        let trials: Vec<Trial> = synth_trials(&cfg, Execution::Sequential)
            .unwrap()
            .into_iter()
            .map(|s| s.trial)
            .collect();
        let model = model_for(&trials, seed);
        let traces: Vec<_> = trials
            .iter()
            .map(|t| model.forward(&t.features).unwrap())
            .collect();
        let mut rng = Rng::new(seed + 1000);
        let with_noise: Vec<Tensor2D> = trials
            .iter()
            .map(|t| {
                let p = &t.features[&PathId::P];
                let rows: Vec<Vec<f64>> = (0..p.rows())
                    .map(|i| vec![p.get(i, 0), rng.normal(0.0, 1.0)])
                    .collect();
                Tensor2D::from_rows(&rows).unwrap()
            })
            .collect();
        let refs: Vec<&Tensor2D> = with_noise.iter().collect();
        let proxy = correlation_analysis(&traces, &refs, 0, &PathSet::all()).unwrap();
        let noise = correlation_analysis(&traces, &refs, 1, &PathSet::all()).unwrap();
        assert!((0.0..=1.0).contains(&proxy) && (0.0..=1.0).contains(&noise));
        wins += usize::from(proxy > noise);
    }
    assert!(wins * 10 >= runs as usize * 9, "{wins}/{runs}");
}

#[test]
fn generated_proxy_tracks_grs() {
    let cfg = SynthConfig {
        n_trials: 200,
        ..Default::default()
    };
    let trials = synth_trials(&cfg, Execution::Parallel).unwrap();
    let proxy_mean: Vec<f64> = trials
        .iter()
        .map(|s| {
            let p = s.trial.features[&PathId::P].data();
            p.iter().sum::<f64>() / p.len() as f64
        })
        .collect();
    let grs: Vec<f64> = trials.iter().map(|s| s.trial.meta.grs).collect();
    let r = oracle_srocc(&proxy_mean, &grs);
    assert!(r >= 0.9, "proxy/GRS rank correlation {r}");
}
