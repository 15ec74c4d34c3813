use isac_core::agents::checkpoint;
use isac_core::agents::{AgentKind, NetShape, PolicyValueNet};
use isac_core::env::RewardMode;
use isac_core::harness::metrics::{metrics_csv_string, HEADER};
use isac_core::harness::{
    evaluate, load_checkpoint, postprocess, read_metrics_csv, save_checkpoint, train, train_to_dir, ActionRule,
    Overrides, RunConfig, Scenario,
};
use isac_core::rng::seeded;
use isac_core::Error;

fn parse(text: &str) -> Result<RunConfig, Error> {
    RunConfig::from_toml_str(text, &Overrides::default())
}

fn violation_keys(err: Error) -> Vec<String> {
    match err {
        Error::Validation(v) => v.into_iter().map(|v| v.key).collect(),
        other => panic!("expected validation error, got {other}"),
    }
}

fn small(iterations: u64) -> RunConfig {
    let mut cfg = RunConfig::default().with_seed(5).with_iterations(iterations, 2);
    cfg.run.log_interval = 1;
    cfg
}

#[test]
fn empty_file_gives_defaults() {
    let cfg = parse("").unwrap();
    assert_eq!(cfg.run.scenario, Scenario::Strong);
    assert_eq!(cfg.run.agent, AgentKind::Ppo);
    assert_eq!(cfg.run.reward, RewardMode::Aou);
    assert_eq!(cfg.run.eval_iterations, cfg.run.iterations);
    assert_eq!(cfg.env.traffic.lambda_slot, 9.0);
}

#[test]
fn scenario_preset_and_explicit_override() {
    let cfg = parse("[run]\nscenario = \"poor\"\n").unwrap();
    assert_eq!(cfg.env.link.blocking_probs, vec![0.1, 0.1, 0.1, 0.7]);
    assert_eq!(cfg.env.link.per_probs, vec![0.8, 0.1, 0.1]);
    assert_eq!(cfg.env.traffic.lambda_slot, 2.0);

    let cfg = parse("[run]\nscenario = \"poor\"\n[traffic]\nlambda_slot = 4.5\n").unwrap();
    assert_eq!(cfg.env.traffic.lambda_slot, 4.5);
    assert_eq!(cfg.env.link.per_probs, vec![0.8, 0.1, 0.1]);
}

#[test]
fn custom_scenario_requires_explicit_values() {
    let keys = violation_keys(parse("[run]\nscenario = \"custom\"\n").unwrap_err());
    assert!(keys.iter().any(|k| k == "traffic.lambda_slot"), "{keys:?}");
}

#[test]
fn per_probs_arity_is_reported_by_key() {
    let err = parse("[channel]\nper_probs = [0.5, 0.5]\n").unwrap_err();
    assert!(err.is_validation());
    assert!(violation_keys(err).iter().any(|k| k == "channel.per_probs"));
}

#[test]
fn unknown_key_names_its_path() {
    match parse("[agent]\nlearning_rate = 0.1\n").unwrap_err() {
        Error::Config { key, message } => {
            assert_eq!(key, "agent.learning_rate");
            assert!(message.contains("learning_rate"), "{message}");
        }
        other => panic!("unexpected {other}"),
    }
    match parse("[traffic]\nq_max = \"big\"\n").unwrap_err() {
        Error::Config { key, .. } => assert_eq!(key, "traffic.q_max"),
        other => panic!("unexpected {other}"),
    }
    assert!(parse("[run\n").unwrap_err().is_validation());
}

#[test]
fn overrides_win_over_file() {
    let overrides = Overrides {
        agent: Some(AgentKind::A2c),
        seed: Some(9),
        iterations: Some(30),
        ..Overrides::default()
    };
    let cfg = RunConfig::from_toml_str("[run]\nagent = \"ppo\"\nseed = 1\n", &overrides).unwrap();
    assert_eq!(cfg.run.agent, AgentKind::A2c);
    assert_eq!(cfg.agent.kind, AgentKind::A2c);
    assert_eq!(cfg.run.seed, 9);
    assert_eq!(cfg.run.iterations, 30);
}

#[test]
fn one_row_per_step_at_unit_interval() {
    let out = train::<f64>(&small(10)).unwrap();
    assert_eq!(out.rows.len(), 10);
    assert_eq!(out.rows.last().unwrap().iteration, 10);
    assert_eq!(out.rows[0].episode, 1);
    assert_eq!(out.rows[9].episode, 2);
    assert_eq!(out.summary.steps, 10);
}

#[test]
fn training_is_deterministic_and_seed_sensitive() {
    let a = train::<f64>(&small(300)).unwrap();
    let b = train::<f64>(&small(300)).unwrap();
    let c = train::<f64>(&small(300).with_seed(6)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.net.params(), b.net.params());
    assert_ne!(a.rows, c.rows);
}

#[test]
fn evaluation_repeats_exactly() {
    let cfg = small(50);
    let net = train::<f64>(&cfg).unwrap().net;
    let x = evaluate(&cfg, &net, ActionRule::Greedy).unwrap();
    let y = evaluate(&cfg, &net, ActionRule::Greedy).unwrap();
    assert_eq!(x.rows, y.rows);
    let forced = evaluate(&cfg, &net, ActionRule::GreedyFixedFrames(100)).unwrap();
    assert_eq!(forced.summary.n_frames, 100.0);
    assert!(evaluate(&cfg, &net, ActionRule::GreedyFixedFrames(101)).is_err());
}

#[test]
fn zero_network_evaluates() {
    let cfg = small(20);
    let shape = NetShape::new(cfg.agent.hidden, cfg.env.sensing.n_frames_max);
    let zeros = PolicyValueNet::<f64>::from_params(shape, vec![0.0; shape.n_params()]).unwrap();
    let out = evaluate(&cfg, &zeros, ActionRule::Greedy).unwrap();
    assert_eq!(out.rows.len(), 20);
    assert!(out.summary.reward.is_finite());
}

#[test]
fn csv_shapes() {
    assert!(matches!(metrics_csv_string(&[]), Err(Error::NoMetrics)));
    let rows = train::<f64>(&small(1)).unwrap().rows;
    let text = metrics_csv_string(&rows).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(40);
    cfg.run.log_interval = 4;
    cfg.run.out_dir = dir.path().join("run");
    let art = train_to_dir(&cfg).unwrap();
    let rows = read_metrics_csv(&art.metrics).unwrap();
    let fresh = train::<f64>(&cfg).unwrap();
    assert_eq!(rows.len(), 10);
    for (r, f) in rows.iter().zip(&fresh.rows) {
        assert_eq!(r.iteration, f.iteration);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(r.reward, f.reward) < 1e-5);
        assert!(rel(r.avg_capacity_bps, f.avg_capacity_bps) < 1e-5);
    }

    let net = load_checkpoint::<f64>(&cfg, &art.checkpoint).unwrap();
    assert_eq!(net.params(), fresh.net.params());

    let post = dir.path().join("post.csv");
    assert_eq!(postprocess(&art.metrics, &post).unwrap(), 10);
    let text = std::fs::read_to_string(&post).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",normalized_reward"));
}

#[test]
fn checkpoint_shape_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.txt");
    let net = PolicyValueNet::<f64>::init(NetShape::new(8, 100), &mut seeded(1));
    save_checkpoint(&net, &path).unwrap();
    let cfg = RunConfig::default();
    assert!(load_checkpoint::<f64>(&cfg, &path).is_err());

    let text = checkpoint::to_text(&net);
    let back = checkpoint::from_text::<f64>(&text, NetShape::new(8, 100)).unwrap();
    assert_eq!(back.params(), net.params());
    let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
    assert!(checkpoint::from_text::<f64>(&truncated, NetShape::new(8, 100)).is_err());
}
