//! Adam training loop over (context, candidate, label) pairs.
//!
//! Each pair runs a forward/backward pass on its own tape; batch gradients
//! are averaged in a fixed order, so identical seeds give identical loss
//! curves and final parameters.

use rand::seq::SliceRandom;

use super::config::{lr_schedule, TrainConfig};
use super::model::SelectionModel;
use crate::autodiff::{Gradients, Params, Tape, Tensor};
use crate::corpus::Example;
use crate::error::{Error, Result};

/// Adam with the conventional moment defaults.
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &Params) -> Adam {
        let shapes: Vec<Tensor> = params
            .ids()
            .map(|id| {
                let (r, c) = params.get(id).shape();
                Tensor::zeros(r, c)
            })
            .collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    /// One update over every parameter in registration order. Parameters
    /// without a gradient this step still decay their moments.
    pub fn step(&mut self, params: &mut Params, grads: &Gradients, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let ids: Vec<_> = params.ids().collect();
        for (slot, id) in ids.into_iter().enumerate() {
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            let grad = grads.get(id);
            let value = params.get_mut(id);
            for k in 0..value.len() {
                let g = grad.map(|g| g.data()[k]).unwrap_or(0.0);
                let mk = self.beta1 * m.data()[k] + (1.0 - self.beta1) * g;
                let vk = self.beta2 * v.data()[k] + (1.0 - self.beta2) * g * g;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let m_hat = mk / bc1;
                let v_hat = vk / bc2;
                value.data_mut()[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// One scoring unit: indexes into the example list plus a binary label.
#[derive(Debug, Clone, Copy)]
struct TrainPair {
    example: usize,
    candidate: usize,
    label: f64,
}

/// Loss trace and final state of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub steps: usize,
    /// `(step, mean loss since the previous entry)` at every log interval.
    pub losses: Vec<(usize, f64)>,
    pub final_loss: f64,
}

/// Minimizes mean binary cross-entropy over all (context, candidate) pairs
/// of `examples`. Knowledge attached to an example rides along to the
/// scorer. Aborts with a diagnostic if the loss stops being finite.
pub fn train(model: &mut SelectionModel, examples: &[Example], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no training examples".to_string()));
    }
    let mut pairs = Vec::new();
    for (ei, example) in examples.iter().enumerate() {
        for (ci, candidate) in example.candidates.iter().enumerate() {
            pairs.push(TrainPair {
                example: ei,
                candidate: ci,
                label: if example.is_correct(&candidate.id) { 1.0 } else { 0.0 },
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("training examples have no candidates".to_string()));
    }

    let mut rng = crate::seeded_rng(cfg.seed ^ 0x7261_696e);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut adam = Adam::new(model.params());
    let mut report = TrainReport {
        steps: 0,
        losses: Vec::new(),
        final_loss: f64::NAN,
    };
    let mut window_loss = 0.0;
    let mut window_count = 0usize;

    for step in 0..cfg.max_steps {
        let mut batch_grads = Gradients::default();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let pair = pairs[order[cursor]];
            cursor += 1;

            let example = &examples[pair.example];
            let candidate = &example.candidates[pair.candidate];
            let mut tape = Tape::new();
            let score = model.score_node(
                &mut tape,
                &example.context_tokens,
                &candidate.tokens,
                example.knowledge.as_deref(),
            )?;
            let loss = tape.bce_loss(&[score], &[pair.label])?;
            let loss_value = tape.value(loss).get(0, 0);
            if !loss_value.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at step {step} (example {}, candidate {})",
                    example.dialog_id, candidate.id
                )));
            }
            batch_loss += loss_value;
            let grads = tape.backward(loss)?;
            batch_grads.accumulate(&grads);
        }
        batch_grads.scale(1.0 / cfg.batch_size as f64);
        batch_loss /= cfg.batch_size as f64;

        adam.step(model.params_mut(), &batch_grads, lr_schedule(step, cfg));

        window_loss += batch_loss;
        window_count += 1;
        report.final_loss = batch_loss;
        report.steps = step + 1;
        if (step + 1) % cfg.log_every == 0 || step + 1 == cfg.max_steps {
            let mean = window_loss / window_count as f64;
            log::info!(
                "step {:>6}  lr {:.6}  loss {:.6}",
                step + 1,
                lr_schedule(step, cfg),
                mean
            );
            report.losses.push((step + 1, mean));
            window_loss = 0.0;
            window_count = 0;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Candidate, Subtask, Utterance, Vocabulary};
    use crate::esim::ModelConfig;
    use crate::harness::config::Variant;
    use std::collections::BTreeSet;

    fn toy_examples() -> Vec<Example> {
        let mk = |id: &str, ctx: &str, good: &str, bad: &str| {
            let turns = vec![Utterance::new(crate::corpus::Speaker::A, ctx)];
            Example {
                dialog_id: id.to_string(),
                context_tokens: crate::corpus::flatten_turns(&turns),
                turns,
                candidates: vec![Candidate::new("good", good), Candidate::new("bad", bad)],
                correct_ids: ["good".to_string()].into_iter().collect::<BTreeSet<_>>(),
                knowledge: None,
                subtask: Subtask::S1,
            }
        };
        vec![
            mk("d0", "zor mab quil", "ped nim", "kav rax"),
            mk("d1", "zor mab quil", "ped nim", "rax kav"),
            mk("d2", "kav rax holu", "tiv wex", "ped nim"),
            mk("d3", "kav rax holu", "tiv wex", "nim ped"),
        ]
    }

    fn tiny_cfg(steps: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            max_steps: steps,
            log_every: 10,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn build_model(examples: &[Example]) -> SelectionModel {
        let vocab = Vocabulary::build(examples, 1).unwrap();
        let cfg = ModelConfig {
            hidden: 8,
            mlp_hidden: 8,
            emb_dim_a: 8,
            emb_dim_b: 4,
            char_dim: 4,
            char_emb_dim: 3,
            ..ModelConfig::default()
        };
        SelectionModel::new(Variant::Esim, cfg, &vocab, None).unwrap()
    }

    #[test]
    fn loss_decreases_on_toy_task() {
        let examples = toy_examples();
        let mut model = build_model(&examples);
        let report = train(&mut model, &examples, &tiny_cfg(60)).unwrap();
        let first = report.losses.first().unwrap().1;
        let last = report.losses.last().unwrap().1;
        assert!(last < first, "loss did not decrease: {first} -> {last}");
        // the correct candidate now outscores the distractor
        let ex = &examples[0];
        let good = model.score(&ex.context_tokens, &ex.candidates[0].tokens, None).unwrap();
        let bad = model.score(&ex.context_tokens, &ex.candidates[1].tokens, None).unwrap();
        assert!(good > bad);
    }

    #[test]
    fn identical_seeds_give_identical_loss_curves() {
        let examples = toy_examples();
        let mut a = build_model(&examples);
        let mut b = build_model(&examples);
        let ra = train(&mut a, &examples, &tiny_cfg(20)).unwrap();
        let rb = train(&mut b, &examples, &tiny_cfg(20)).unwrap();
        assert_eq!(ra.losses, rb.losses);
        for (ia, ib) in a.params().ids().zip(b.params().ids()) {
            assert_eq!(a.params().get(ia), b.params().get(ib));
        }
    }

    #[test]
    fn poisoned_parameters_abort_with_diagnostic() {
        let examples = toy_examples();
        let mut model = build_model(&examples);
        let id = model.params().id_of("mlp.b2").unwrap();
        model.params_mut().get_mut(id).data_mut()[0] = f64::NAN;
        let err = train(&mut model, &examples, &tiny_cfg(5)).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn trained_checkpoint_round_trips_scores() {
        let examples = toy_examples();
        let mut model = build_model(&examples);
        train(&mut model, &examples, &tiny_cfg(10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trained.ckpt");
        model.save(&path).unwrap();
        let reloaded = SelectionModel::load(&path, None).unwrap();
        let ex = &examples[0];
        for cand in &ex.candidates {
            let a = model.score(&ex.context_tokens, &cand.tokens, None).unwrap();
            let b = reloaded.score(&ex.context_tokens, &cand.tokens, None).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
