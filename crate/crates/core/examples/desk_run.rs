//! Fixture cohort to evaluated segmenter, all in memory.
//!
//! cargo run --release -p ssmlab --example desk_run [seed] [epochs]

use std::time::Instant;

use ssmlab::datagen::{generate_in_memory, DatasetConfig, Split};
use ssmlab::eval::evaluate_labels;
use ssmlab::mesh::validate_cohort;
use ssmlab::segmenter::{train, TrainConfig};
use ssmlab::ssm::{build_ssm, gpa_align, Retention};
use ssmlab::{fixture, Workers};

fn main() -> ssmlab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let t0 = Instant::now();

    let fx = fixture::generate(10, 2000, seed)?;
    let cohort = validate_cohort(fx.meshes)?;
    let model = build_ssm(&gpa_align(&cohort, false)?, Retention::All, false)?;
    let config = DatasetConfig {
        n_train: 200,
        n_val: 50,
        n_test: 50,
        n_points: 1024,
        ..DatasetConfig::default()
    };
    let data = generate_in_memory(&model, &fx.labels, &config, seed, Workers::Auto)?;
    println!("generated {} shapes in {:.1?}", data.len(), t0.elapsed());
    let pick = |s: Split| -> Vec<_> {
        data.iter().filter(|(r, _)| r.split == s).map(|(_, c)| c.clone()).collect()
    };
    let (tr, va, te) = (pick(Split::Train), pick(Split::Val), pick(Split::Test));

    let cfg = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let seg = train(&tr, &va, &fx.labels.classes().clone(), &cfg, Workers::Auto)?;
    println!(
        "trained in {:.1?}; loss {:.4} -> {:.4}, val {:.4}",
        t0.elapsed(),
        seg.meta.train_loss[0],
        seg.meta.train_loss.last().unwrap(),
        seg.meta.val_loss.last().unwrap()
    );
    let mut items = Vec::new();
    for c in &te {
        items.push((c.shape_id, c.labels.clone(), seg.predict(&c.cloud, Workers::Auto)?));
    }
    let report = evaluate_labels(&items, true, Workers::Auto)?;
    print!("{}", report.to_text());
    println!("total {:.1?}", t0.elapsed());
    Ok(())
}
