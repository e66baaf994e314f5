// Scratch experiment runner for tuning training hyperparameters.
// Not part of the test suite.

use std::time::Instant;

use lrsim_core::gauss::covariance;
use lrsim_core::net::{DegradationModel, NetConfig};
use lrsim_core::sweep::factor_sweep;
use lrsim_core::synth::{synth_pairs, SyntheticSpec};
use lrsim_core::train::{bicubic_l1, evaluate_l1, train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("c4");
    match which {
        "c4" => criterion4(),
        "c6" => criterion6(),
        "c5" => criterion5(),
        "bench" => bench(),
        _ => eprintln!("unknown experiment {which}"),
    }
}

fn bench() {
    use lrsim_core::tensor::{backward, l1_loss, Tensor};
    let model = DegradationModel::new(NetConfig::desk(4), 7).unwrap();
    let hr = Tensor::from_vec(&[1, 1, 64, 64], vec![0.5; 4096]).unwrap();
    let lr = Tensor::from_vec(&[1, 1, 16, 16], vec![0.5; 256]).unwrap();

    let reps = 50;
    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = model.encode(&hr).unwrap();
    }
    println!("encode fwd: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    let feat = model.encode(&hr).unwrap();
    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = model.abl_forward(&feat).unwrap();
    }
    println!("abl fwd: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    let blurred = model.abl_forward(&feat).unwrap();
    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = model.decode(&blurred).unwrap();
    }
    println!("decode fwd: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = model.forward(&hr).unwrap();
    }
    println!("full fwd: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);

    let t0 = Instant::now();
    for _ in 0..reps {
        let pred = model.forward(&hr).unwrap();
        let loss = l1_loss(&pred, &lr).unwrap();
        for p in model.parameters() {
            p.zero_grad();
        }
        backward(&loss).unwrap();
    }
    println!("fwd+bwd: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);
}

fn criterion4() {
    let deg = 30.0f64.to_radians();
    let cov = covariance(1.0, deg, 0.3).unwrap();
    let spec = SyntheticSpec::procedural(cov, 4);
    let pairs = synth_pairs(&spec, 40, 1001).unwrap();
    let (train_pairs, test_pairs) = pairs.split_at(32);
    let bic = bicubic_l1(test_pairs).unwrap();
    println!("bicubic heldout L1 = {bic:.5}");

    for (seed, lr, epochs, augment) in [
        (7u64, 5e-4, 25, false),
        (8, 5e-4, 25, false),
        (9, 5e-4, 25, false),
        (7, 5e-4, 50, false),
        (7, 2.5e-4, 50, false),
    ] {
        let mut model = DegradationModel::new(NetConfig::desk(4), seed).unwrap();
        let cfg = TrainConfig { lr, epochs, seed: 42, batch_size: 8, augment, ..TrainConfig::default() };
        let t0 = Instant::now();
        let log = train(&mut model, train_pairs, &cfg, |_, _, _| {}).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let steps = log.records.len();
        let held = evaluate_l1(&model, test_pairs).unwrap();
        let tr = evaluate_l1(&model, train_pairs).unwrap();
        println!(
            "seed {seed} lr {lr:>7} epochs {epochs:>3} aug {augment}: steps {steps:>4} train {tr:.5} heldout {held:.5} ratio {:.3} time {dt:.1}s",
            held / bic
        );
    }
}

fn criterion6() {
    let deg = 30.0f64.to_radians();
    let cov = covariance(1.0, deg, 0.3).unwrap();
    for (scale, hr_size) in [(4usize, 64usize), (4, 32), (2, 32)] {
        let mut spec = SyntheticSpec::procedural(cov, scale);
        spec.hr_size = hr_size;
        let pairs = synth_pairs(&spec, 1, 55).unwrap();
        for lr in [2e-3, 5e-3, 1e-2] {
            let mut model = DegradationModel::new(NetConfig::desk(scale), 7).unwrap();
            let cfg = TrainConfig {
                lr,
                epochs: 500,
                batch_size: 1,
                seed: 9,
                augment: false,
                ..TrainConfig::default()
            };
            let t0 = Instant::now();
            let log = train(&mut model, &pairs, &cfg, |_, _, _| {}).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            let curve: Vec<String> = log
                .records
                .iter()
                .step_by(100)
                .map(|r| format!("{:.4}", r.loss))
                .collect();
            println!(
                "scale {scale} hr {hr_size} lr {lr}: final {:.5} after {} steps, {dt:.1}s  curve {}",
                log.final_loss().unwrap(),
                log.records.len(),
                curve.join(" ")
            );
        }
    }
}

fn criterion5() {
    let narrow = covariance(0.5, 0.0, 0.3).unwrap();
    let wide = covariance(2.0, 0.0, 0.3).unwrap();
    let train_pairs = synth_pairs(&SyntheticSpec::procedural(narrow, 4), 32, 2001).unwrap();
    let test_pairs = synth_pairs(&SyntheticSpec::procedural(wide, 4), 8, 2002).unwrap();

    let mut cfg_net = NetConfig::desk(4);
    cfg_net.bank.factors = vec![0.5];
    let mut model = DegradationModel::new(cfg_net, 7).unwrap();
    let cfg = TrainConfig {
        lr: 5e-4,
        epochs: 25,
        seed: 42,
        augment: false,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    train(&mut model, &train_pairs, &cfg, |_, _, _| {}).unwrap();
    println!("trained in {:.1}s", t0.elapsed().as_secs_f64());

    let factors = [0.25, 0.5, 1.0, 2.0, 3.0];
    let report = factor_sweep(std::slice::from_ref(&model), &factors, &test_pairs).unwrap();
    println!("bicubic on wide test: {:.5}", report.baseline_bicubic);
    for (c, f) in factors.iter().enumerate() {
        println!("  adjusted {f}: L1 {:.5}", report.losses[0][c]);
    }
    let (_, c) = report.argmin();
    println!(
        "argmin factor {} loss {:.5} (unadjusted {:.5})",
        factors[c],
        report.min_loss(),
        report.losses[0][1]
    );
}
