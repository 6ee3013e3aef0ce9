use compass_core::error::Error;
use compass_core::steering::{InterventionPlan, Sign, SteeringDirection};
use compass_core::transformer::{
    collect_head_activations, dialect_corpus, read_tensors, ActivationDataset, ForwardOptions, HeadId, Model,
    ModelConfig, PlantedSpec, Sampler,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> ModelConfig {
    ModelConfig { n_layers: 3, n_heads: 2, head_dim: 4, vocab_size: 32, context_len: 24, init_seed: 11 }
}

fn tokens(seed: u64, n: usize, vocab: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..vocab as u32)).collect()
}

fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

fn single(head: HeadId, v: Vec<f64>, sigma: f64, alpha: f64) -> InterventionPlan {
    InterventionPlan::new(vec![SteeringDirection { head, v, sigma }], alpha, Sign::Positive).unwrap()
}

fn all_positions(from: usize) -> ForwardOptions {
    ForwardOptions { capture_attention: false, capture_all_positions: true, intervene_from: from }
}

#[test]
fn attention_rows_are_causal_distributions() {
    let model = Model::random(small()).unwrap();
    let toks = tokens(1, 10, 32);
    let opts = ForwardOptions { capture_attention: true, ..ForwardOptions::default() };
    let out = model.forward_with(&toks, &[], opts).unwrap();
    let attn = out.attention.unwrap();
    for layer in &attn {
        for head in layer {
            assert_eq!(head.len(), toks.len());
            for (i, row) in head.iter().enumerate() {
                assert_eq!(row.len(), i + 1);
                assert!(row.iter().all(|&w| w >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
    let one = model.forward_with(&toks[..1], &[], opts).unwrap().attention.unwrap();
    assert!(one.iter().flatten().all(|h| h == &vec![vec![1.0]]));
}

#[test]
fn forward_is_deterministic_and_seeded() {
    let a = Model::random(small()).unwrap();
    let b = Model::random(small()).unwrap();
    let toks = tokens(2, 12, 32);
    assert_eq!(a.forward(&toks).unwrap(), b.forward(&toks).unwrap());
    let other = Model::random(ModelConfig { init_seed: 12, ..small() }).unwrap();
    assert_ne!(a.forward(&toks).unwrap().logits, other.forward(&toks).unwrap().logits);
}

#[test]
fn prefix_logits_ignore_later_tokens() {
    let model = Model::random(small()).unwrap();
    let toks = tokens(3, 16, 32);
    let full = model.forward(&toks).unwrap();
    for cut in 1..toks.len() {
        let prefix = model.forward(&toks[..cut]).unwrap();
        assert_eq!(prefix.logits[..], full.logits[..cut]);
    }
    let mut altered = toks.clone();
    altered[10] = (altered[10] + 1) % 32;
    let changed = model.forward(&altered).unwrap();
    assert_eq!(changed.logits[..10], full.logits[..10]);
    assert_ne!(changed.logits[10], full.logits[10]);
}

#[test]
fn cached_generation_matches_teacher_forcing() {
    let model = Model::random(small()).unwrap();
    let prompt = tokens(4, 6, 32);
    let generated = model.generate_greedy(&prompt, 10, &[], false).unwrap();
    assert_eq!(generated.len(), 10);
    let mut seq = prompt.clone();
    seq.extend(&generated);
    let out = model.forward(&seq).unwrap();
    for (k, &tok) in generated.iter().enumerate() {
        let logits = &out.logits[prompt.len() - 1 + k];
        let best = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let argmax = logits.iter().position(|&l| l == best).unwrap() as u32;
        assert_eq!(tok, argmax);
    }
}

#[test]
fn generation_respects_the_context_window() {
    let model = Model::random(small()).unwrap();
    let long = tokens(5, 40, 32);
    let trace = model.generate_traced(&long, 8, &[], false, Sampler::Greedy).unwrap();
    assert_eq!(trace.prompt, long[long.len() - 16..]);
    assert_eq!(trace.generated.len(), 8);
    assert!(matches!(model.generate_greedy(&long, 24, &[], false), Err(Error::ContextOverflow(_))));
    assert!(model.forward(&long).is_err());
    assert!(model.forward(&[99]).is_err());
    assert!(model.forward(&[]).is_err());
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let model = Model::random(small()).unwrap();
    let prompt = tokens(6, 5, 32);
    let sampler = |seed| Sampler::Sample { temperature: 1.0, top_p: Some(0.9), seed };
    let run = |seed| model.generate_traced(&prompt, 12, &[], false, sampler(seed)).unwrap().generated;
    assert_eq!(run(1), run(1));
    assert!((0..8).any(|s| run(s) != run(1)));
    let cold = Sampler::Sample { temperature: 0.0, top_p: None, seed: 3 };
    let greedy = model.generate_greedy(&prompt, 12, &[], false).unwrap();
    assert_eq!(model.generate_traced(&prompt, 12, &[], false, cold).unwrap().generated, greedy);
}

#[test]
fn zero_alpha_plan_is_an_exact_identity() {
    let model = Model::random(small()).unwrap();
    let toks = tokens(7, 12, 32);
    let plan = single(HeadId::new(1, 0), unit(4, 2), 3.0, 0.0);
    let base = model.forward_with(&toks, &[], all_positions(0)).unwrap();
    let steered = model.forward_with(&toks, &[plan.clone()], all_positions(0)).unwrap();
    assert_eq!(base.logits, steered.logits);
    assert_eq!(base.head_outputs, steered.steered_outputs);
    let g0 = model.generate_greedy(&toks[..4], 8, &[], false).unwrap();
    assert_eq!(model.generate_greedy(&toks[..4], 8, &[plan], true).unwrap(), g0);
}

#[test]
fn single_head_offset_is_exact_and_local() {
    let model = Model::random(small()).unwrap();
    let toks = tokens(8, 9, 32);
    for target in [HeadId::new(0, 0), HeadId::new(1, 1), HeadId::new(2, 0)] {
        let plan = single(target, unit(4, 1), 1.0, 5.0);
        let base = model.forward_with(&toks, &[], all_positions(0)).unwrap();
        let out = model.forward_with(&toks, &[plan], all_positions(0)).unwrap();
        for (pos, (pre, post)) in out.head_outputs.iter().zip(&out.steered_outputs).enumerate() {
            for (i, (a, b)) in pre.head(target).iter().zip(post.head(target)).enumerate() {
                let expected = if i == 1 { 5.0 } else { 0.0 };
                assert!((b - a - expected).abs() <= 1e-6, "pos {pos} dim {i}");
            }
            for h in model.config().heads() {
                if h.layer <= target.layer && h != target {
                    assert_eq!(post.head(h), base.head_outputs[pos].head(h), "head {h} pos {pos}");
                    assert_eq!(pre.head(h), post.head(h));
                }
                if h.layer <= target.layer {
                    assert_eq!(pre.head(h), base.head_outputs[pos].head(h));
                }
            }
        }
        if target.layer + 1 < model.config().n_layers {
            let later = HeadId::new(target.layer + 1, 0);
            assert_ne!(out.head_outputs.last().unwrap().head(later), base.head_outputs.last().unwrap().head(later));
        }
    }
}

#[test]
fn plan_offsets_respect_the_start_position() {
    let model = Model::random(small()).unwrap();
    let toks = tokens(9, 8, 32);
    let plan = single(HeadId::new(1, 0), unit(4, 0), 2.0, 3.0);
    let base = model.forward(&toks).unwrap();
    let out = model.forward_with(&toks, &[plan], all_positions(5)).unwrap();
    assert_eq!(out.logits[..5], base.logits[..5]);
    assert_ne!(out.logits[5], base.logits[5]);
}

#[test]
fn plan_and_its_negation_cancel() {
    let model = Model::random(small()).unwrap();
    let toks = tokens(10, 10, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dirs: Vec<SteeringDirection> = [HeadId::new(0, 1), HeadId::new(2, 1)]
        .into_iter()
        .map(|head| {
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            SteeringDirection { head, v: raw.iter().map(|x| x / n).collect(), sigma: 0.7 }
        })
        .collect();
    let plan = InterventionPlan::new(dirs, 4.0, Sign::Positive).unwrap();
    let base = model.forward(&toks).unwrap();
    let both = model.forward_with(&toks, &[plan.clone(), plan.negated()], ForwardOptions::default()).unwrap();
    for (a, b) in base.logits.iter().flatten().zip(both.logits.iter().flatten()) {
        assert!((a - b).abs() <= 1e-9);
    }
    let alone = model.forward_with(&toks, &[plan], ForwardOptions::default()).unwrap();
    assert_ne!(alone.logits, base.logits);
}

#[test]
fn plans_are_checked_against_the_model() {
    let model = Model::random(small()).unwrap();
    let outside = single(HeadId::new(5, 0), unit(4, 0), 1.0, 1.0);
    assert!(model.forward_with(&[1, 2], &[outside], ForwardOptions::default()).is_err());
    let wrong_dim = single(HeadId::new(0, 0), unit(3, 0), 1.0, 1.0);
    assert!(matches!(
        model.forward_with(&[1, 2], &[wrong_dim], ForwardOptions::default()),
        Err(Error::MalformedPlan(_))
    ));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let model = Model::planted(ModelConfig::default(), PlantedSpec::default()).unwrap();
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back.config(), model.config());
    assert_eq!(back.planted_spec(), model.planted_spec());
    let toks = tokens(11, 20, 256);
    assert_eq!(back.forward(&toks).unwrap(), model.forward(&toks).unwrap());
    let file = read_tensors(&path).unwrap();
    assert_eq!(file.metadata["kind"], "toy-transformer");

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[100] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(Model::load(&path), Err(Error::MalformedTensors(_))));
}

#[test]
fn collected_dataset_has_one_row_per_sequence() {
    let model = Model::random(small()).unwrap();
    let corpus = dialect_corpus(32, 5, 3, 9, 1).unwrap();
    let ds = collect_head_activations(&model, &corpus).unwrap();
    assert_eq!(ds.len(), 10);
    assert_eq!(ds.heads().len(), 6);
    assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 5);
    let direct = model.head_activations(&corpus[3].tokens).unwrap();
    assert_eq!(ds.row(3, HeadId::new(2, 1)), direct.head(HeadId::new(2, 1)));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("acts.bin");
    ds.save(&path).unwrap();
    assert_eq!(ActivationDataset::load(&path).unwrap(), ds);
}

#[test]
fn minimal_pairs_flip_dialect_only() {
    let corpus = dialect_corpus(256, 20, 4, 12, 3).unwrap();
    for pair in corpus.chunks(2) {
        assert_eq!((pair[0].label, pair[1].label), (0, 1));
        assert_eq!(pair[0].group, pair[1].group);
        for (a, b) in pair[0].tokens.iter().zip(&pair[1].tokens) {
            assert_eq!(a % 128, b % 128);
            assert_ne!(a / 128, b / 128);
        }
    }
    assert!(dialect_corpus(255, 1, 1, 2, 0).is_err());
    assert!(dialect_corpus(256, 1, 5, 2, 0).is_err());
}

#[test]
fn planted_twins_agree_off_the_planted_head() {
    let model = Model::planted(ModelConfig::default(), PlantedSpec::default()).unwrap();
    let corpus = dialect_corpus(256, 4, 10, 20, 9).unwrap();
    let planted = PlantedSpec::default().head;
    for pair in corpus.chunks(2) {
        let a = model.head_activations(&pair[0].tokens).unwrap();
        let b = model.head_activations(&pair[1].tokens).unwrap();
        for h in model.config().heads() {
            if h == planted {
                assert_eq!(a.head(h)[0], -b.head(h)[0]);
                assert_ne!(a.head(h)[0], 0.0);
                assert_eq!(a.head(h)[1..], b.head(h)[1..]);
            } else {
                assert_eq!(a.head(h), b.head(h), "head {h}");
            }
        }
    }
}
