use std::time::Instant;

use nextsel::corpus::{dialogs_from_examples, Example, Vocabulary};
use nextsel::esim::ModelConfig;
use nextsel::harness::{
    evaluate_subtask, generate_synthetic, train, EvalAssets, EvalOptions, SelectionModel,
    SynthConfig, TrainConfig, Variant,
};
use nextsel::corpus::Subtask;
use nextsel::tesim::{augment, find_similar, AugmentMode, SubDialogIndex, TRAIN_K};

fn eval_r1(model: &SelectionModel, examples: &[Example], tesim: bool, index: Option<&SubDialogIndex>) -> f64 {
    let mut opts = EvalOptions::new(Subtask::S1);
    opts.tesim = tesim;
    let assets = EvalAssets {
        subdialogs: index,
        ..EvalAssets::default()
    };
    evaluate_subtask(model, examples, &opts, &assets).unwrap().recall_at_1
}

fn augment_train(examples: &[Example], index: &SubDialogIndex) -> Vec<Example> {
    let mut out = Vec::new();
    for ex in examples {
        let similar = find_similar(&ex.context_tokens, index, TRAIN_K, &ex.dialog_id);
        for aug in augment(ex, &similar, AugmentMode::Train) {
            out.push(aug.example);
        }
    }
    out
}

fn model_cfg(seed: u64) -> ModelConfig {
    ModelConfig {
        hidden: 16,
        mlp_hidden: 32,
        emb_dim_a: 24,
        emb_dim_b: 8,
        char_dim: 16,
        char_emb_dim: 8,
        seed,
        ..ModelConfig::default()
    }
}

fn overfit() {
    let lr: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.001);
    println!("=== overfit calibration (lr {lr}) ===");
    let t0 = Instant::now();
    let synth = SynthConfig {
        n_dialogs: 30,
        train_frac: 20.0 / 30.0,
        valid_frac: 5.0 / 30.0,
        slot_in_solution: true,
        n_slots: 8,
        ..SynthConfig::new(424242, 30, 5, 200)
    };
    let out = generate_synthetic(&synth).unwrap();
    println!("train {} valid {} test {}", out.train.len(), out.valid.len(), out.test.len());
    let vocab = Vocabulary::build(&out.train, 1).unwrap();
    let mut model = SelectionModel::new(Variant::Esim, model_cfg(7), &vocab, None).unwrap();

    let mut tc = TrainConfig {
        batch_size: 16,
        max_steps: 500,
        log_every: 100,
        seed: 7,
        lr0: lr,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &out.train, &tc).unwrap();
    println!("losses: {:?}", report.losses);
    let r1_train = eval_r1(&model, &out.train, false, None);
    println!("after 500 steps: train R@1 = {r1_train}  ({:?})", t0.elapsed());

    tc.max_steps = 1500;
    let report = train(&mut model, &out.train, &tc).unwrap();
    println!("losses: {:?}", report.losses);
    let heldout: Vec<Example> = out.valid.iter().chain(out.test.iter()).cloned().collect();
    let r1_held = eval_r1(&model, &heldout, false, None);
    let r1_train2 = eval_r1(&model, &out.train, false, None);
    for ex in &heldout {
        let mut scores: Vec<(String, f64)> = ex
            .candidates
            .iter()
            .map(|c| (c.id.clone(), model.score(&ex.context_tokens, &c.tokens, None).unwrap()))
            .collect();
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let correct = ex.correct_ids.iter().next().unwrap();
        let rank = scores.iter().position(|(id, _)| id == correct).unwrap() + 1;
        println!(
            "{}: rank {}  ctx: {}",
            ex.dialog_id,
            rank,
            ex.context_tokens.join(" ")
        );
        if rank > 1 {
            let correct_text = ex.candidates.iter().find(|c| &c.id == correct).unwrap().tokens.join(" ");
            println!("   correct ({}): {}", correct, correct_text);
            for (id, s) in scores.iter().take(2) {
                let text = ex.candidates.iter().find(|c| &c.id == id).unwrap().tokens.join(" ");
                println!("   {id} {s:.4}: {text}");
            }
        }
    }
    println!(
        "after 2000 steps: train R@1 = {r1_train2}, heldout R@1 = {r1_held}  (total {:?})",
        t0.elapsed()
    );
}

fn directional() {
    println!("=== directional calibration ===");
    let t0 = Instant::now();
    let mut gaps = Vec::new();
    for seed in [1u64, 2, 3] {
        let synth = SynthConfig {
            slot_in_solution: false,
            ..SynthConfig::new(1000 + seed, 125, 24, 80)
        };
        let out = generate_synthetic(&synth).unwrap();
        let index = SubDialogIndex::build(&dialogs_from_examples(&out.train));

        let tc = TrainConfig {
            batch_size: 16,
            max_steps: 400,
            log_every: 200,
            seed,
            ..TrainConfig::default()
        };

        // baseline
        let vocab = Vocabulary::build(&out.train, 1).unwrap();
        let mut baseline = SelectionModel::new(Variant::Esim, model_cfg(seed), &vocab, None).unwrap();
        train(&mut baseline, &out.train, &tc).unwrap();
        let base_r1 = eval_r1(&baseline, &out.test, false, None);

        // retrieval-augmented
        let augmented = augment_train(&out.train, &index);
        let vocab_aug = Vocabulary::build(&augmented, 1).unwrap();
        let mut tesim_model = SelectionModel::new(Variant::Esim, model_cfg(seed), &vocab_aug, None).unwrap();
        train(&mut tesim_model, &augmented, &tc).unwrap();
        let tesim_r1 = eval_r1(&tesim_model, &out.test, true, Some(&index));

        println!(
            "seed {seed}: baseline R@1 = {base_r1:.3}, tesim R@1 = {tesim_r1:.3}  ({:?})",
            t0.elapsed()
        );
        gaps.push(tesim_r1 - base_r1);
    }
    let mean_gap: f64 = gaps.iter().sum::<f64>() / gaps.len() as f64;
    println!("mean gap = {mean_gap:.3}  (total {:?})", t0.elapsed());
}

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "all".to_string());
    if arg == "overfit" || arg == "all" {
        overfit();
    }
    if arg == "directional" || arg == "all" {
        directional();
    }
}
