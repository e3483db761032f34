mod common;

use std::sync::{Arc, OnceLock};

use tcr::cascade::{train_sdm, CascadeConfig, CascadeModel, PerturbationRanges, TrainingLog, TrainingSample, MAGIC};
use tcr::features::GrayImage;
use tcr::geometry::{rmse_percent, BBox, Shape};
use tcr::pipeline::{evaluate, Subset};
use tcr::synth::SynthCorpus;

struct Trained {
    corpus: SynthCorpus,
    model: CascadeModel,
    log: TrainingLog,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let corpus = common::small_corpus(80, 20, 11);
        let (model, log) = train_sdm(&corpus.a.train, &corpus.a.schema, &CascadeConfig::default()).unwrap();
        Trained { corpus, model, log }
    })
}

#[test]
fn training_error_decreases_every_stage() {
    let t = trained();
    assert_eq!(t.log.stage_errors.len(), 6);
    assert!(t.log.is_monotone(), "{:?}", t.log.stage_errors);
    assert!(t.log.stage_errors[5] < t.log.stage_errors[1]);
    assert_eq!(t.model.stages().len(), 5);
    assert_eq!(t.model.output_dim(), 2 * t.corpus.a.schema.len());
}

#[test]
fn beats_the_mean_shape_by_half() {
    let t = trained();
    let fitted = evaluate(&t.model, &t.corpus.a.test, Subset::All, None).unwrap();
    let static_errors: Vec<f64> = t
        .corpus
        .a
        .test
        .iter()
        .map(|s| {
            let to_frame = s.bbox.to_frame(250).unwrap();
            let mean = t.model.mean_shape().transformed(&to_frame.inverse());
            rmse_percent(&mean, &s.truth, None).unwrap()
        })
        .collect();
    let baseline = static_errors.iter().sum::<f64>() / static_errors.len() as f64;
    assert!(
        fitted.mean_error <= 0.5 * baseline,
        "cascade {} vs mean shape {baseline}",
        fitted.mean_error
    );
}

#[test]
fn inference_is_repeatable() {
    let t = trained();
    let s = &t.corpus.a.test[0];
    assert_eq!(
        t.model.infer(&s.image, &s.bbox).unwrap(),
        t.model.infer(&s.image, &s.bbox).unwrap()
    );
}

#[test]
fn persistence_round_trips() {
    let t = trained();
    let bytes = t.model.to_bytes();
    assert_eq!(&bytes[..4], MAGIC);
    let back = CascadeModel::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    let json = CascadeModel::from_json(&t.model.to_json().unwrap()).unwrap();
    assert_eq!(json.to_bytes(), bytes);
    for s in &t.corpus.a.test[..5] {
        assert_eq!(
            back.infer(&s.image, &s.bbox).unwrap(),
            t.model.infer(&s.image, &s.bbox).unwrap()
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tcr");
    t.model.save(&path).unwrap();
    assert_eq!(CascadeModel::load(&path).unwrap().to_bytes(), bytes);
}

#[test]
fn corrupted_model_is_rejected() {
    let mut bytes = trained().model.to_bytes();
    bytes[0] = b'X';
    assert!(CascadeModel::read_binary(bytes.as_slice()).is_err());
    let short = &trained().model.to_bytes()[..100];
    assert!(CascadeModel::read_binary(short).is_err());
}

fn shifted(img: &GrayImage, dx: usize, dy: usize) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        img.get(x.saturating_sub(dx), y.saturating_sub(dy))
    })
    .unwrap()
}

#[test]
fn predictions_follow_translated_content() {
    let t = trained();
    for s in &t.corpus.a.test[..4] {
        let (dx, dy) = (7, 4);
        let b = s.bbox;
        let moved = BBox::new(b.x + dx as f64, b.y + dy as f64, b.w, b.h).unwrap();
        let p0 = t.model.infer(&s.image, &s.bbox).unwrap();
        let p1 = t.model.infer(&shifted(&s.image, dx, dy), &moved).unwrap();
        for (a, q) in p0.points().iter().zip(p1.points()) {
            assert!((q[0] - a[0] - dx as f64).abs() <= 0.5 && (q[1] - a[1] - dy as f64).abs() <= 0.5);
        }
    }
}

#[test]
fn seeded_training_is_bitwise_reproducible() {
    let corpus = common::small_corpus(12, 1, 3);
    let config = CascadeConfig {
        num_stages: 2,
        rng_seed: 9,
        ..CascadeConfig::default()
    };
    let (a, _) = train_sdm(&corpus.b.train, &corpus.b.schema, &config).unwrap();
    let (b, _) = train_sdm(&corpus.b.train, &corpus.b.schema, &config).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let other = CascadeConfig { rng_seed: 10, ..config };
    let (c, _) = train_sdm(&corpus.b.train, &corpus.b.schema, &other).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

#[test]
fn initialization_at_truth_learns_nothing() {
    let corpus = common::small_corpus(2, 1, 1);
    let schema = corpus.a.schema.clone();
    let indices = tcr::synth::SynthConfig::default().schema_a_indices;
    let samples = common::canonical_copies(6, &schema, &indices);
    let config = CascadeConfig {
        perturbation: PerturbationRanges::zero(),
        num_stages: 2,
        ..CascadeConfig::default()
    };
    let (model, log) = train_sdm(&samples, &schema, &config).unwrap();
    assert!(log.stage_errors.iter().all(|&e| e < 1e-6), "{:?}", log.stage_errors);
    for stage in model.stages() {
        assert!(stage.map.frobenius_norm() < 1e-6);
    }
    for s in &samples {
        let p = model.infer(&s.image, &s.bbox).unwrap();
        assert!(rmse_percent(&p, &s.truth, None).unwrap() <= 0.5);
    }
}

#[test]
fn duplicated_samples_give_the_same_model() {
    let corpus = common::small_corpus(6, 1, 2);
    let config = CascadeConfig {
        num_stages: 2,
        ridge_lambda: 0.0,
        ..CascadeConfig::default()
    };
    let once: Vec<TrainingSample> = corpus.a.train.clone();
    let twice: Vec<TrainingSample> = once.iter().chain(&once).cloned().collect();
    let (a, _) = train_sdm(&once, &corpus.a.schema, &config).unwrap();
    let (b, _) = train_sdm(&twice, &corpus.a.schema, &config).unwrap();
    for s in &corpus.b.train[..3] {
        let pa = a.infer(&s.image, &s.bbox).unwrap();
        let pb = b.infer(&s.image, &s.bbox).unwrap();
        for (x, y) in pa.points().iter().zip(pb.points()) {
            assert!((x[0] - y[0]).abs() < 1e-6 && (x[1] - y[1]).abs() < 1e-6);
        }
    }
}

#[test]
fn unusable_samples_are_counted() {
    let corpus = common::small_corpus(4, 1, 4);
    let mut samples = corpus.a.train.clone();
    let s = &samples[0];
    let pts = vec![s.truth.points()[0]; s.truth.len()];
    let collapsed = Shape::new(s.truth.schema().clone(), pts).unwrap();
    samples.push(TrainingSample::new("bad", Arc::clone(&s.image), collapsed, s.bbox).unwrap());
    let config = CascadeConfig {
        num_stages: 1,
        ..CascadeConfig::default()
    };
    let (_, log) = train_sdm(&samples, &corpus.a.schema, &config).unwrap();
    assert_eq!(log.samples_used, 4);
    assert_eq!(log.samples_skipped, 1);
}
