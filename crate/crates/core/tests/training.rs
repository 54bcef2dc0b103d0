use styledecomp::textpipe::{generate_synthetic_corpus, vocab_for};
use styledecomp::training::{
    multi_retrain, train, Checkpoint, MetricsRecord, TrainConfig, Trainer, CHECKPOINT_VERSION,
};
use styledecomp::{ArchitectureVariant, Error, LabeledSentence};

fn small_config(variant: ArchitectureVariant, epochs: usize) -> TrainConfig {
    TrainConfig {
        variant,
        epochs,
        batch_size: 8,
        embed_dim: 8,
        hidden_dim: 12,
        latent_dim: 4,
        disc_hidden_dim: 8,
        latent_disc_hidden_dim: 8,
        ..TrainConfig::default()
    }
}

fn corpus(n: usize) -> Vec<LabeledSentence> {
    generate_synthetic_corpus(3, n, 0.1).unwrap()
}

fn lines(records: &[MetricsRecord]) -> Vec<String> {
    records.iter().map(MetricsRecord::to_json_line).collect()
}

#[test]
fn same_seed_reproduces_metrics_bytes() {
    let data = corpus(48);
    for variant in ArchitectureVariant::ALL {
        let cfg = small_config(variant, 2);
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(lines(&a.metrics), lines(&b.metrics), "{variant}");
        assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
    }
}

#[test]
fn different_seeds_differ() {
    let data = corpus(48);
    let a = train(&small_config(ArchitectureVariant::Baseline, 1), &data).unwrap();
    let cfg = TrainConfig {
        seed: 1001,
        ..small_config(ArchitectureVariant::Baseline, 1)
    };
    let b = train(&cfg, &data).unwrap();
    assert_ne!(lines(&a.metrics), lines(&b.metrics));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let data = corpus(48);
    for variant in ArchitectureVariant::ALL {
        let cfg = small_config(variant, 4);
        let full = train(&cfg, &data).unwrap();

        let vocab = vocab_for(&data, cfg.min_count).unwrap();
        let mut first = Trainer::new(cfg.clone(), vocab, 0).unwrap();
        let mut records = vec![first.train_epoch(&data).unwrap(), first.train_epoch(&data).unwrap()];

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.bin");
        first.checkpoint().save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(&loaded, first.checkpoint());

        let mut resumed = Trainer::from_checkpoint(loaded).unwrap();
        assert_eq!(resumed.epochs_done(), 2);
        while !resumed.is_finished() {
            records.push(resumed.train_epoch(&data).unwrap());
        }
        assert_eq!(lines(&records), lines(&full.metrics), "{variant}");
        assert_eq!(
            resumed.into_checkpoint().to_bytes().unwrap(),
            full.checkpoint.to_bytes().unwrap()
        );
    }
}

#[test]
fn checkpoint_round_trips_through_bytes() {
    let data = corpus(24);
    let run = train(&small_config(ArchitectureVariant::ShiftedAEWithDiscriminator, 1), &data).unwrap();
    let bytes = run.checkpoint.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, run.checkpoint);
    assert_eq!(back.to_bytes().unwrap(), bytes);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let data = corpus(24);
    let run = train(&small_config(ArchitectureVariant::Baseline, 1), &data).unwrap();
    let bytes = run.checkpoint.to_bytes().unwrap();

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Format(_))));

    let mut bad_version = bytes.clone();
    bad_version[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        Checkpoint::from_bytes(&bad_version),
        Err(Error::Version { found, .. }) if found == CHECKPOINT_VERSION + 1
    ));

    for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
    }

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(Checkpoint::from_bytes(&trailing), Err(Error::Format(_))));
}

#[test]
fn loading_a_missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Checkpoint::load(&dir.path().join("nope.bin")), Err(Error::Io { .. })));
}

#[test]
fn multi_retrain_uses_consecutive_seeds() {
    let data = corpus(24);
    let cfg = small_config(ArchitectureVariant::LatentDiscriminator, 1);
    let runs = multi_retrain(&cfg, &data, 3).unwrap();
    assert_eq!(runs.len(), 3);
    for (i, run) in runs.iter().enumerate() {
        assert_eq!(run.checkpoint.run_id, i);
        assert_eq!(run.checkpoint.config.seed, cfg.seed + i as u64);
        assert_eq!(run.metrics[0].run_id, i);
    }
    let single = train(
        &TrainConfig {
            seed: cfg.seed + 2,
            ..cfg.clone()
        },
        &data,
    )
    .unwrap();
    assert_eq!(single.checkpoint.params, runs[2].checkpoint.params);
    assert!(multi_retrain(&cfg, &data, 0).is_err());
}

#[test]
fn zero_epochs_and_empty_corpus_are_rejected() {
    let data = corpus(8);
    assert!(train(&small_config(ArchitectureVariant::Baseline, 0), &data).is_err());
    assert!(train(&small_config(ArchitectureVariant::Baseline, 1), &[]).is_err());
}

#[test]
fn metrics_carry_variant_specific_losses() {
    let data = corpus(16);
    for variant in ArchitectureVariant::ALL {
        let run = train(&small_config(variant, 2), &data).unwrap();
        assert_eq!(run.metrics.len(), 2);
        let r = &run.metrics[1];
        assert_eq!(r.epoch, 2);
        assert_eq!(r.loss_dz.is_some(), variant.uses_latent_disc(), "{variant}");
        assert_eq!(r.loss_cos.is_some(), variant.uses_cosine(), "{variant}");
        assert_eq!(r.dz_accuracy.is_some(), variant.uses_latent_disc(), "{variant}");
        assert!(r.loss_ae.unwrap().is_finite() && r.objective.is_finite());
        assert!((0.0..=1.0).contains(&r.recon_accuracy));
    }
}

#[test]
fn tau_follows_schedule_in_metrics() {
    let data = corpus(8);
    let cfg = small_config(ArchitectureVariant::Baseline, 4);
    let run = train(&cfg, &data).unwrap();
    let taus: Vec<f64> = run.metrics.iter().map(|r| r.tau).collect();
    assert_eq!(taus, vec![1.0, 0.5, 0.25, 0.125]);
}

#[test]
fn baseline_fits_a_small_corpus() {
    let data = corpus(100);
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let run = train(&cfg, &data).unwrap();
    let last = run.metrics.last().unwrap().loss_ae.unwrap();
    assert!(last < 0.5, "final loss_ae {last}");
}

#[test]
fn style_discriminator_separates_real_sentences() {
    let data = corpus(400);
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let run = train(&cfg, &data).unwrap();
    let best = run.metrics.iter().map(|r| r.d_accuracy).fold(0.0, f64::max);
    assert!(best >= 0.95, "best D accuracy {best}");
}
