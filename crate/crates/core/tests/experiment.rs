use std::path::PathBuf;

use hyre_core::experiment::{
    checkpoint_from_str, checkpoint_load, checkpoint_save, checkpoint_to_string, emit_report, prepare_task,
    read_metrics, read_summary, run_experiment, run_seed, train_model, ExperimentConfig,
};
use hyre_core::hyre::BeliefState;
use hyre_core::Error;

fn small(task: &str, extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
name = "small"
seeds = [0, 1]
budgets = [0, 2, 4]

[task]
{task}

[ensemble]
heads = 6
hidden = [12]

[train]
steps = 40
batch_size = 32

[adapt]
finetune_steps = 10
{extra}
"#
    ))
    .unwrap()
}

fn cube() -> ExperimentConfig {
    small("kind = \"hypercube\"\nn_train = 64\nn_target = 100", "")
}

fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn seeds_are_deterministic() {
    let cfg = cube();
    let a = run_seed(&cfg, 3).unwrap();
    let b = run_seed(&cfg, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, run_seed(&cfg, 4).unwrap());
    assert_eq!(a.queries.len(), 4);
}

#[test]
fn zero_budget_is_the_uniform_ensemble() {
    for cfg in [
        cube(),
        small("kind = \"conflicting\"\nn_points = 100\nn_pool = 50\nn_eval = 50", ""),
        small("kind = \"gp\"\nn_train = 7\nn_test = 60", ""),
    ] {
        let r = run_seed(&cfg, 0).unwrap();
        assert_eq!(r.hyre[0], r.uniform);
        assert_eq!(r.finetune[0], Some(r.uniform));
        assert_eq!(r.hyre.len(), 3);
    }
}

#[test]
fn report_round_trips() {
    let cfg = cube();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.config_hash, cfg.hash());
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&report, dir.path()).unwrap();
    assert_eq!(written.len(), 4);

    let rows = read_metrics(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), cfg.seeds.len() * cfg.budgets.len());
    assert_eq!(rows, report.metric_rows());
    let back = read_summary(&dir.path().join("summary.json")).unwrap();
    assert_eq!(back, report);
}

#[test]
fn checkpoint_is_bitwise() {
    let cfg = cube();
    let data = prepare_task(&cfg, 0).unwrap();
    let model = train_model(&cfg, &data.train, 0).unwrap();
    let mut belief = BeliefState::uniform(model.heads()).unwrap();
    belief.accumulate(&[0.1, 2.0, 0.0, 1.0 / 3.0, 5.0, 1e-9]).unwrap();

    let text = checkpoint_to_string(&model, &belief).unwrap();
    let (m2, b2) = checkpoint_from_str(&text).unwrap();
    assert_eq!(m2, model);
    assert_eq!(b2, belief);
    let out = model.forward(&data.eval.x).unwrap();
    let out2 = m2.forward(&data.eval.x).unwrap();
    assert!(out.data().iter().zip(out2.data()).all(|(a, b)| a.to_bits() == b.to_bits()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint_save(&model, &belief, &path).unwrap();
    assert_eq!(checkpoint_load(&path).unwrap().0, model);

    let cut = &text[..text.len() / 2];
    assert!(matches!(checkpoint_from_str(cut), Err(Error::Format(_))));
    assert!(matches!(checkpoint_load(&dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn shipped_configs_validate() {
    for name in ["gp", "conflicting", "hypercube"] {
        let cfg = ExperimentConfig::load(&repo_file(&format!("configs/{name}.toml"))).unwrap();
        assert_eq!(cfg.ensemble.heads, 100);
        assert!(cfg.budgets.contains(&0));
    }
    // Table configs refer to data that may not have been fetched.
    for name in ["energy", "kin8nm", "ccpp"] {
        match ExperimentConfig::load(&repo_file(&format!("configs/{name}.toml"))) {
            Ok(cfg) => assert!(cfg.is_regression()),
            Err(e) => assert!(matches!(e, Error::Config(_)), "{e}"),
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        "seeds = []\n[task]\nkind = \"hypercube\"\n",
        "[task]\nkind = \"hypercube\"\n[ensemble]\nheads = 0\n",
        "[task]\nkind = \"gp\"\n[adapt]\ncriterion = \"coreset\"\n",
        "[task]\nkind = \"gp\"\n[adapt]\ntemperature = 0.0\n",
        "[task]\nkind = \"nope\"\n",
        "[task]\nkind = \"uci\"\ntable = \"/nonexistent.csv\"\nschema = \"/nonexistent.toml\"\n",
    ];
    for text in cases {
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
    }
    let minimal = ExperimentConfig::from_toml("[task]\nkind = \"gp\"\n").unwrap();
    assert_eq!(minimal.budgets, vec![0, 1, 2, 4, 8, 16, 32]);
    assert!(minimal.is_regression());
}

#[test]
fn budget_beyond_pool_is_rejected() {
    let mut cfg = small("kind = \"hypercube\"\nn_train = 64\nn_target = 10", "");
    cfg.budgets = vec![0, 8];
    assert!(run_seed(&cfg, 0).is_err());
}
