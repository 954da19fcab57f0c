//! Drives a full experiment through the harness: train with recorded
//! observables, replay each attack and re-evaluate the final checkpoint.

use fkge_lab::attacks::AttackKind;
use fkge_lab::harness::{cmd_attack, cmd_eval, cmd_train, AttackOverrides, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_toml(
        r#"
        name = "harness-demo"
        seed = 1
        dim = 32
        batch = 16
        lr = 0.2
        gamma = 4.0
        rounds = 20
        overlap_frac = 0.5

        [attacks]
        kinds = ["si", "cip", "cia"]
        "#,
    )?;
    cfg.attacks.interval = 5;
    let root = tempfile::tempdir()?;
    let run = cmd_train(&cfg, root.path())?;
    println!(
        "trained {}: MRR {:.4} (untrained {:.4})",
        run.run_dir.display(),
        run.metrics.summary.mrr,
        run.metrics.random_mrr
    );
    for kind in AttackKind::ALL {
        let a = cmd_attack(&run.run_dir, kind, AttackOverrides::default())?;
        println!("{kind}: best F1 {:.3} in round {}", a.summary.best_f1, a.summary.best_round);
    }
    let e = cmd_eval(&run.run_dir, None)?;
    println!("re-evaluated round {}: MRR {:.4}", e.round, e.summary.mrr);
    Ok(())
}
