use mogfn::env::{testfns::TestFunction, HyperGrid, NGrams};
use mogfn::gflownet::{
    l1_distribution_gap, sample_candidates, train_mogfn_pc, train_with_reward, ConditionalPolicyNet,
    ScalarizedReward, TrainConfig,
};
use mogfn::metrics::{hypervolume, topk_diversity, topk_reward, uniform_reference_vectors, CandidateSet, HvRef};
use mogfn::mobo::{run_al_loop, ALConfig, ProposerConfig, ProposerKind, SurrogateConfig};
use mogfn::{Front, PreferenceEncoding, Scalarization};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_cfg(steps: usize) -> TrainConfig {
    TrainConfig { steps, batch_size: 32, lr: 0.003, lr_z: 0.03, delta: 0.05, hidden: vec![32, 32], seed: 3, ..Default::default() }
}

#[test]
fn training_closes_the_distribution_gap() {
    let env = HyperGrid::new(4, vec![TestFunction::Branin, TestFunction::Currin]).unwrap();
    let cfg = grid_cfg(1500);
    let reward = ScalarizedReward { scalarization: cfg.scalarization.clone(), beta: cfg.beta };
    let prefs = uniform_reference_vectors(2, 4).unwrap().vectors;
    let untrained =
        ConditionalPolicyNet::new(&env, 2, PreferenceEncoding::Raw, &cfg.hidden, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
    let mean_gap = |p: &ConditionalPolicyNet| {
        prefs.iter().map(|w| l1_distribution_gap(p, &env, &reward, w).unwrap()).sum::<f64>() / prefs.len() as f64
    };
    let mut losses = Vec::new();
    let out = train_with_reward(&env, &reward, &cfg, |rec, _| {
        losses.push(rec.loss.unwrap());
        Ok(())
    })
    .unwrap();
    assert_eq!(out.skipped, 0);
    let (before, after) = (mean_gap(&untrained), mean_gap(&out.policy));
    assert!(after < 0.2 * before, "gap {before} -> {after}");
    let head: f64 = losses[..200].iter().sum::<f64>() / 200.0;
    let tail: f64 = losses[losses.len() - 200..].iter().sum::<f64>() / 200.0;
    assert!(tail < head, "loss {head} -> {tail}");
}

#[test]
fn eight_by_eight_loss_curve_settles() {
    let env = HyperGrid::new(8, vec![TestFunction::Branin, TestFunction::Currin]).unwrap();
    let cfg = TrainConfig { steps: 20_000, lr: 0.005, lr_z: 0.01, delta: 0.05, ..Default::default() };
    let out = train_mogfn_pc(&env, &cfg).unwrap();
    let losses: Vec<f64> = out.losses.iter().map(|l| l.unwrap()).collect();
    let head = losses[..1000].iter().sum::<f64>() / 1000.0;
    let tail = losses[losses.len() - 1000..].iter().sum::<f64>() / 1000.0;
    assert!(tail < 0.05 * head, "loss {head} -> {tail}");
}

#[test]
fn checkpoints_reproduce_the_sampler() {
    let env = HyperGrid::new(4, vec![TestFunction::Branin, TestFunction::Currin]).unwrap();
    let out = train_mogfn_pc(&env, &grid_cfg(50)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    out.policy.save_json(&path).unwrap();
    let loaded = ConditionalPolicyNet::load_json(&path).unwrap();
    assert_eq!(loaded.flat_params(), out.policy.flat_params());
    let w = mogfn::Preference::new(vec![0.3, 0.7]).unwrap();
    let a = sample_candidates(&out.policy, &env, &w, 64, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = sample_candidates(&loaded, &env, &w, 64, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sequence_metrics_are_well_formed() {
    let env = NGrams::amino(8, &["AC", "CV", "VA"]).unwrap();
    let cfg = TrainConfig { steps: 30, batch_size: 16, beta: 4.0, ..grid_cfg(30) };
    let policy = train_mogfn_pc(&env, &cfg).unwrap().policy;
    let scal = Scalarization::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sets: Vec<CandidateSet> = uniform_reference_vectors(3, 2)
        .unwrap()
        .vectors
        .into_iter()
        .map(|w| {
            let candidates = sample_candidates(&policy, &env, &w, 32, &mut rng).unwrap();
            CandidateSet { preference: w, candidates }
        })
        .collect();
    let r = topk_reward(&sets, &scal, 10).unwrap();
    let d = topk_diversity(&sets, &scal, 10).unwrap();
    assert!((0.0..=1.0).contains(&r));
    assert!((0.0..=8.0).contains(&d));
    let all: Vec<_> = sets.iter().flat_map(|s| s.candidates.clone()).collect();
    let front = Front::from_candidates(&all).unwrap().nondominated().unwrap();
    let hv = hypervolume(&front, &HvRef::origin(3).unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&hv));
}

#[test]
fn active_learning_keeps_its_invariants() {
    let oracle = NGrams::new("ABCD", 10, vec!["AB".into(), "BC".into()]).unwrap();
    let cfg = ALConfig {
        alphabet: "ABCD".into(),
        seq_len: 10,
        initial_size: 10,
        rounds: 3,
        batch_size: 4,
        surrogate: SurrogateConfig { members: 3, hidden: vec![8], epochs: 60, ..Default::default() },
        proposer: ProposerConfig { steps: 20, hidden: vec![16], ..Default::default() },
        proposer_kind: ProposerKind::Gflownet,
        num_proposals: 16,
        seed: 5,
        ..Default::default()
    };
    let out = run_al_loop(&oracle, &cfg).unwrap();
    let rel: Vec<f64> = out.rounds.iter().map(|r| r.relative_hv).collect();
    assert_eq!(rel[0], 1.0);
    assert!(rel.windows(2).all(|w| w[1] >= w[0]), "{rel:?}");
    assert_eq!(out.rounds.last().unwrap().oracle_calls, 10 + 3 * 4);
}
