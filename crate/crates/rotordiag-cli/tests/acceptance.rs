//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! Run with `cargo test --test acceptance -- --nocapture`.
//!
//! The experiment-ladder criteria (4, 5, 6) share one set of datasets and
//! training runs, computed once and reused across tests.

use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use tempfile::TempDir;

use rotordiag::audio::{
    quad_a, quad_b, read_wav, synth_rotor_audio, write_wav, AudioClip, RotorSynthSpec,
};
use rotordiag::nn::{
    decode_checkpoint, encode_checkpoint, grad_check_detailed, init_params, ModelSpec, Tensor,
};
use rotordiag::pipeline::{
    build_synthetic_dataset, cross_evaluate, split, train, transfer, DatasetLayout,
    DatasetManifest, Label, PropellerConfig, SampleRecord, Thrust, TrainConfig, TransferConfig,
};
use rotordiag::rng::{derive_seed, SplitMix64};
use rotordiag::spectrogram::{read_image, stft, write_image, SpecImage, SpectrogramParams};

fn pass(criterion: &str, details: &str) {
    println!("[PASS] {criterion}: {details}");
}

/// Criteria with wall-clock budgets take this gate so the harness's test
/// parallelism does not distort their timings.
fn timing_gate() -> MutexGuard<'static, ()> {
    static GATE: Mutex<()> = Mutex::new(());
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

// ---------------------------------------------------------------------------
// Criterion 1: STFT equals the naive double-sum oracle.
// ---------------------------------------------------------------------------

fn naive_stft(samples: &[f32], n: usize, hop: usize) -> Vec<Vec<f64>> {
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos()))
        .collect();
    let frames = (samples.len() - n) / hop + 1;
    (0..frames)
        .map(|t| {
            (0..=n / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0f64, 0.0f64);
                    for i in 0..n {
                        let angle = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                        let v = window[i] * samples[t * hop + i] as f64;
                        re += v * angle.cos();
                        im += v * angle.sin();
                    }
                    re.hypot(im)
                })
                .collect()
        })
        .collect()
}

#[test]
fn criterion_1_stft_oracle() {
    let _gate = timing_gate();
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACCE);
    let mut clips = 0usize;
    let mut max_rel = 0.0f64;
    for &n in &[64usize, 256, 1024] {
        for _ in 0..34 {
            let len = n + rng.next_below(3 * n as u64 + 1) as usize;
            let samples: Vec<f32> = (0..len)
                .map(|_| (rng.next_f64() * 2.0 - 1.0) as f32)
                .collect();
            let clip = AudioClip::new(samples, 44_100);
            let params = SpectrogramParams::new(n, n / 2).unwrap();
            let got = stft(&clip, &params).unwrap();
            let want = naive_stft(&clip.samples, n, n / 2);
            assert_eq!(got.frames(), want.len());
            for (t, row) in want.iter().enumerate() {
                for (k, &expected) in row.iter().enumerate() {
                    let m = got.magnitude(t, k);
                    let rel = (m - expected).abs() / m.abs().max(expected.abs()).max(1e-9);
                    assert!(
                        rel < 1e-6,
                        "criterion 1: n={n} frame {t} bin {k}: {m} vs {expected}"
                    );
                    max_rel = max_rel.max(rel);
                }
            }
            clips += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(clips >= 100, "criterion 1: only {clips} clips checked");
    assert!(
        elapsed.as_secs() < 60,
        "criterion 1: took {:.1}s (budget 60s)",
        elapsed.as_secs_f64()
    );
    pass(
        "criterion 1 (STFT oracle)",
        &format!(
            "{clips} clips, N in {{64, 256, 1024}}, max rel err {max_rel:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: finite-difference gradient check on the default model.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_gradient_check() {
    let _gate = timing_gate();
    let started = Instant::now();
    let spec = ModelSpec::default_classifier(64, 64);
    let results: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|instance| {
            let params = init_params(&spec, derive_seed(0xBEEF, instance));
            let mut rng = SplitMix64::new(derive_seed(0xF00D, instance));
            let input = Tensor::new(
                vec![3, 64, 64],
                (0..3 * 64 * 64).map(|_| rng.next_f64() as f32).collect(),
            );
            let label = (rng.next_u64() % 2) as usize;
            let report = grad_check_detailed(
                &spec,
                &params,
                &input,
                label,
                1e-3,
                derive_seed(0xCAFE, instance),
            )
            .unwrap();
            (report.max_error, report.median_error)
        })
        .collect();

    let worst_max = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_median = results.iter().map(|r| r.1).fold(0.0, f64::max);
    for (instance, (max_err, median_err)) in results.iter().enumerate() {
        assert!(
            *max_err < 1e-2,
            "criterion 2: instance {instance} max rel err {max_err:.3e}"
        );
        assert!(
            *median_err < 1e-3,
            "criterion 2: instance {instance} median rel err {median_err:.3e}"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 120,
        "criterion 2: took {:.1}s (budget 120s)",
        elapsed.as_secs_f64()
    );
    pass(
        "criterion 2 (gradient check)",
        &format!(
            "20 instances, worst max {worst_max:.2e}, worst median {worst_median:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: layer loop-oracles and softmax properties, 50 random shapes.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_layer_oracles() {
    use rotordiag::nn::{avgpool, conv2d_forward, dense_forward, maxpool, softmax};

    let mut rng = SplitMix64::new(0x1A7E);
    for case in 0..50 {
        // Conv vs six nested loops, exact equality.
        let c_in = 1 + rng.next_below(3) as usize;
        let k = 1 + rng.next_below(3) as usize;
        let stride = 1 + rng.next_below(2) as usize;
        let oh = 1 + rng.next_below(6) as usize;
        let h = k + stride * (oh - 1);
        let c_out = 1 + rng.next_below(4) as usize;
        let tensor = |rng: &mut SplitMix64, shape: Vec<usize>| {
            let len: usize = shape.iter().product();
            Tensor::new(
                shape,
                (0..len)
                    .map(|_| (rng.next_f64() * 2.0 - 1.0) as f32)
                    .collect(),
            )
        };
        let input = tensor(&mut rng, vec![c_in, h, h]);
        let weights = tensor(&mut rng, vec![c_out, c_in, k, k]);
        let bias = tensor(&mut rng, vec![c_out]);
        let conv = conv2d_forward(&input, &weights, &bias, stride).unwrap();
        for o in 0..c_out {
            for i in 0..oh {
                for j in 0..oh {
                    let mut acc = bias.data()[o] as f64;
                    for c in 0..c_in {
                        for u in 0..k {
                            for v in 0..k {
                                acc += weights.data()[((o * c_in + c) * k + u) * k + v] as f64
                                    * input.at3(c, i * stride + u, j * stride + v) as f64;
                            }
                        }
                    }
                    assert_eq!(
                        conv.at3(o, i, j),
                        acc as f32,
                        "criterion 3 conv case {case}"
                    );
                }
            }
        }

        // Pools over one random divisible shape.
        let size = 2 + rng.next_below(2) as usize;
        let blocks = 1 + rng.next_below(4) as usize;
        let side = size * blocks;
        let x = tensor(&mut rng, vec![c_in, side, side]);
        let (maxed, _) = maxpool(&x, size).unwrap();
        let averaged = avgpool(&x, size).unwrap();
        for ch in 0..c_in {
            for bi in 0..blocks {
                for bj in 0..blocks {
                    let mut best = f32::NEG_INFINITY;
                    let mut acc = 0.0f64;
                    for u in 0..size {
                        for v in 0..size {
                            let v = x.at3(ch, bi * size + u, bj * size + v);
                            best = best.max(v);
                            acc += v as f64;
                        }
                    }
                    assert_eq!(
                        maxed.at3(ch, bi, bj),
                        best,
                        "criterion 3 maxpool case {case}"
                    );
                    let mean = (acc / (size * size) as f64) as f32;
                    assert!(
                        (averaged.at3(ch, bi, bj) - mean).abs() <= 1e-6 * mean.abs().max(1.0),
                        "criterion 3 avgpool case {case}"
                    );
                }
            }
        }

        // Dense vs dot product, exact equality.
        let in_dim = 1 + rng.next_below(30) as usize;
        let out_dim = 1 + rng.next_below(8) as usize;
        let x = tensor(&mut rng, vec![in_dim]);
        let w = tensor(&mut rng, vec![out_dim, in_dim]);
        let b = tensor(&mut rng, vec![out_dim]);
        let dense = dense_forward(&x, &w, &b).unwrap();
        for o in 0..out_dim {
            let mut acc = b.data()[o] as f64;
            for i in 0..in_dim {
                acc += w.data()[o * in_dim + i] as f64 * x.data()[i] as f64;
            }
            assert_eq!(dense.data()[o], acc as f32, "criterion 3 dense case {case}");
        }

        // Softmax: distribution and shift invariance.
        let classes = 2 + rng.next_below(6) as usize;
        let logits = tensor(&mut rng, vec![classes]);
        let p = softmax(&logits);
        let sum: f32 = p.data().iter().sum();
        assert!(
            (sum - 1.0).abs() < 1e-6,
            "criterion 3 softmax sum case {case}"
        );
        let shift = (rng.next_f64() * 10.0 - 5.0) as f32;
        let shifted = softmax(&Tensor::new(
            vec![classes],
            logits.data().iter().map(|&z| z + shift).collect(),
        ));
        for (a, b) in p.data().iter().zip(shifted.data()) {
            assert!(
                (a - b).abs() < 1e-6,
                "criterion 3 softmax shift case {case}"
            );
        }
    }
    pass("criterion 3 (layer oracles)", "conv/maxpool/avgpool/dense exact on 50 random shapes; softmax sums to 1 and is shift-invariant");
}

// ---------------------------------------------------------------------------
// Criteria 4-6: the experiment ladder, shared across tests.
// ---------------------------------------------------------------------------

/// The pinned experiment battery: five split/init seeds over one fixed pair
/// of datasets. Everything downstream is deterministic in these.
const LADDER_SEEDS: [u64; 5] = [1, 2, 7, 9, 11];

struct SeedOutcome {
    seed: u64,
    native: f64,
    cross: f64,
    transfer_10: f64,
    transfer_20: f64,
    train_seconds: f64,
}

struct Ladder {
    _dir: TempDir,
    outcomes: Vec<SeedOutcome>,
}

fn ladder() -> &'static Ladder {
    static LADDER: OnceLock<Ladder> = OnceLock::new();
    LADDER.get_or_init(|| {
        // Per-seed training times feed criterion 4's runtime budget.
        let _gate = timing_gate();
        let dir = TempDir::new().expect("tempdir");
        let layout = DatasetLayout::default();
        let quad_a_manifest = build_synthetic_dataset(
            &quad_a(),
            80,
            &dir.path().join("quadA"),
            derive_seed(9_000, 1),
            &layout,
        )
        .expect("quadA dataset");
        let quad_b_manifest = build_synthetic_dataset(
            &quad_b(),
            80,
            &dir.path().join("quadB"),
            derive_seed(9_000, 2),
            &layout,
        )
        .expect("quadB dataset");

        let spec = ModelSpec::default_classifier(layout.image_height, layout.image_width);
        let outcomes = LADDER_SEEDS
            .iter()
            .map(|&seed| {
                let started = Instant::now();
                let plan = split(&quad_a_manifest, derive_seed(seed, 100), 50, 15).expect("split");
                let config = TrainConfig {
                    seed: derive_seed(seed, 101),
                    ..TrainConfig::default()
                };
                let (params, report) =
                    train(&spec, &quad_a_manifest, &plan, &config).expect("train");
                let train_seconds = started.elapsed().as_secs_f64();

                let cross = cross_evaluate(&spec, &params, &quad_b_manifest)
                    .expect("cross-eval")
                    .accuracy;

                let t10 = transfer(
                    &spec,
                    &params,
                    &quad_b_manifest,
                    &TransferConfig::recommended(5, derive_seed(seed, 102)),
                )
                .expect("transfer 10")
                .1
                .test_accuracy;
                let t20 = transfer(
                    &spec,
                    &params,
                    &quad_b_manifest,
                    &TransferConfig::recommended(10, derive_seed(seed, 103)),
                )
                .expect("transfer 20")
                .1
                .test_accuracy;

                SeedOutcome {
                    seed,
                    native: report.test_accuracy,
                    cross,
                    transfer_10: t10,
                    transfer_20: t20,
                    train_seconds,
                }
            })
            .collect();
        Ladder {
            _dir: dir,
            outcomes,
        }
    })
}

fn ladder_summary(outcomes: &[SeedOutcome]) -> String {
    outcomes
        .iter()
        .map(|o| {
            format!(
                "seed {}: native {:.4} cross {:.4} t10 {:.4} t20 {:.4}",
                o.seed, o.native, o.cross, o.transfer_10, o.transfer_20
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[test]
fn criterion_4_native_training() {
    let ladder = ladder();
    let passing = ladder.outcomes.iter().filter(|o| o.native >= 0.90).count();
    let slowest = ladder
        .outcomes
        .iter()
        .map(|o| o.train_seconds)
        .fold(0.0, f64::max);
    assert!(
        passing >= 4,
        "criterion 4: native accuracy >= 0.90 for only {passing}/5 seeds ({})",
        ladder_summary(&ladder.outcomes)
    );
    assert!(
        slowest < 300.0,
        "criterion 4: slowest training took {slowest:.0}s (budget 300s per seed)"
    );
    pass(
        "criterion 4 (native training)",
        &format!("test accuracy >= 0.90 for {passing}/5 seeds, slowest train {slowest:.0}s",),
    );
}

#[test]
fn criterion_5_cross_quadrotor_baseline() {
    let ladder = ladder();
    let passing = ladder.outcomes.iter().filter(|o| o.cross <= 0.70).count();
    assert!(
        passing >= 4,
        "criterion 5: cross-eval <= 0.70 for only {passing}/5 seeds ({})",
        ladder_summary(&ladder.outcomes)
    );
    let worst = ladder.outcomes.iter().map(|o| o.cross).fold(0.0, f64::max);
    pass(
        "criterion 5 (cross-quadrotor baseline)",
        &format!("cross-eval <= 0.70 for {passing}/5 seeds (worst {worst:.4})"),
    );
}

#[test]
fn criterion_6_transfer_ladder() {
    let ladder = ladder();
    let passing = ladder
        .outcomes
        .iter()
        .filter(|o| {
            o.transfer_10 >= 0.75
                && o.transfer_20 >= 0.85
                && o.transfer_10 >= o.cross + 0.05
                && o.transfer_20 >= o.transfer_10 + 0.05
                && o.transfer_20 <= o.native
        })
        .count();
    assert!(
        passing >= 4,
        "criterion 6: full ladder holds for only {passing}/5 seeds ({})",
        ladder_summary(&ladder.outcomes)
    );
    pass(
        "criterion 6 (transfer ladder)",
        &format!(
            "cross < t10 < t20 <= native with 0.05 gaps, t10 >= 0.75, t20 >= 0.85 for {passing}/5 seeds ({})",
            ladder_summary(&ladder.outcomes)
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: CLI determinism.
// ---------------------------------------------------------------------------

fn run_cli(dir: &Path, args: &[&str]) {
    let output = Command::new(env!("CARGO_BIN_EXE_rotordiag"))
        .args(["--output-dir", dir.to_str().unwrap()])
        .args(args)
        .env_remove("ROTORDIAG_SEED")
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(at) = stack.pop() {
        for entry in std::fs::read_dir(&at).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_7_cli_determinism() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for dir in &dirs {
        let d = dir.path();
        run_cli(
            d,
            &[
                "--seed",
                "4242",
                "synth",
                "--preset",
                "quadA",
                "--per-class",
                "12",
                "--out",
                "ds",
            ],
        );
        run_cli(
            d,
            &[
                "--seed",
                "4242",
                "synth",
                "--preset",
                "quadB",
                "--per-class",
                "12",
                "--out",
                "dsb",
            ],
        );
        run_cli(
            d,
            &[
                "--seed",
                "4242",
                "train",
                "--manifest",
                "ds/manifest.csv",
                "--train-per-class",
                "8",
                "--val-per-class",
                "2",
                "--epochs",
                "4",
                "--checkpoint-out",
                "model.rdgn",
                "--report-dir",
                "reports",
            ],
        );
        run_cli(
            d,
            &[
                "--seed",
                "4242",
                "eval",
                "--checkpoint",
                "model.rdgn",
                "--manifest",
                "dsb/manifest.csv",
                "--report",
                "eval.csv",
            ],
        );
        run_cli(
            d,
            &[
                "--seed",
                "4242",
                "transfer",
                "--checkpoint",
                "model.rdgn",
                "--manifest",
                "dsb/manifest.csv",
                "--n-per-class",
                "2",
                "--val-per-class",
                "3",
                "--epochs",
                "4",
                "--checkpoint-out",
                "transferred.rdgn",
                "--report-dir",
                "treports",
            ],
        );
        // One WAV through the spectrogram command.
        let spec = RotorSynthSpec {
            shaft_rate_hz: 50.0,
            blade_count: 2,
            harmonic_amplitudes: vec![0.6, 0.3],
            imbalance_depth: 0.2,
            subharmonic_gain: 0.2,
            noise_level: 0.02,
            seed: 77,
        };
        let clip = synth_rotor_audio(&spec, 1.0, 8000).unwrap();
        write_wav(&clip, &d.join("probe.wav")).unwrap();
        run_cli(
            d,
            &[
                "--seed",
                "4242",
                "spectrogram",
                "--wav",
                "probe.wav",
                "--out",
                "probe.ppm",
                "--window",
                "256",
                "--hop",
                "128",
            ],
        );
    }

    let a = tree_bytes(dirs[0].path());
    let b = tree_bytes(dirs[1].path());
    assert_eq!(a.len(), b.len(), "criterion 7: differing file sets");
    let mut compared = 0usize;
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b, "criterion 7: file sets diverge");
        assert_eq!(
            bytes_a, bytes_b,
            "criterion 7: {name_a} differs between identical runs"
        );
        compared += 1;
    }
    pass(
        "criterion 7 (CLI determinism)",
        &format!("{compared} files byte-identical across repeated synth/train/eval/transfer/spectrogram runs"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: round-trips.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut rng = SplitMix64::new(0x0815);

    // WAV: error at most one 16-bit code per sample.
    for case in 0..20 {
        let samples: Vec<f32> = (0..4096)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) as f32)
            .collect();
        let clip = AudioClip::new(samples, 44_100);
        let path = dir.path().join(format!("clip_{case}.wav"));
        write_wav(&clip, &path).unwrap();
        let back = read_wav(&path).unwrap();
        for (x, y) in clip.samples.iter().zip(&back.samples) {
            assert!(
                (x - y).abs() <= 1.0 / 32_768.0,
                "criterion 8: WAV error {x} vs {y}"
            );
        }
    }

    // PPM: byte-identical pixels.
    for case in 0..20 {
        let (h, w) = (
            1 + rng.next_below(64) as usize,
            1 + rng.next_below(64) as usize,
        );
        let pixels: Vec<u8> = (0..3 * h * w).map(|_| rng.next_u64() as u8).collect();
        let img = SpecImage::new(h, w, pixels);
        let path = dir.path().join(format!("img_{case}.ppm"));
        write_image(&img, &path).unwrap();
        assert_eq!(
            read_image(&path).unwrap(),
            img,
            "criterion 8: PPM round-trip"
        );
    }

    // Checkpoint: byte-identical re-serialization.
    for case in 0..10u64 {
        let spec = ModelSpec::default_classifier(64, 64);
        let params = init_params(&spec, case);
        let bytes = encode_checkpoint(&spec, &params);
        let (spec2, params2) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(
            encode_checkpoint(&spec2, &params2),
            bytes,
            "criterion 8: checkpoint round-trip"
        );
    }
    pass(
        "criterion 8 (round-trips)",
        "WAV within 1/32768 per sample; PPM and checkpoint byte-identical",
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: the split protocol, 1000 seeds.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_split_protocol() {
    // An 80 + 80 manifest without files; the split never touches images.
    let records: Vec<SampleRecord> = (0..160)
        .map(|i| {
            let broken = i % 2 == 1;
            SampleRecord {
                image_path: format!("img_{i:03}.ppm").into(),
                label: if broken {
                    Label::Broken
                } else {
                    Label::Unbroken
                },
                quadrotor_id: "quadA".into(),
                propeller_set: if broken {
                    PropellerConfig::Config2
                } else {
                    PropellerConfig::Config1
                },
                thrust: Thrust::Medium,
            }
        })
        .collect();
    let manifest = DatasetManifest {
        records,
        root: ".".into(),
    };

    for seed in 0..1000u64 {
        let plan = split(&manifest, seed, 50, 15).unwrap();
        assert_eq!(plan.train.len(), 100, "criterion 9: seed {seed}");
        assert_eq!(plan.validation.len(), 30, "criterion 9: seed {seed}");
        assert_eq!(plan.test.len(), 30, "criterion 9: seed {seed}");

        let mut seen = vec![0u8; 160];
        for &i in plan.train.iter().chain(&plan.validation).chain(&plan.test) {
            seen[i] += 1;
        }
        assert!(
            seen.iter().all(|&c| c == 1),
            "criterion 9: seed {seed} produced overlapping or missing indices"
        );

        for (set, per_class) in [(&plan.train, 50), (&plan.validation, 15), (&plan.test, 15)] {
            for label in Label::ALL {
                let count = set
                    .iter()
                    .filter(|&&i| manifest.records[i].label == label)
                    .count();
                assert_eq!(
                    count, per_class,
                    "criterion 9: seed {seed} class counts off"
                );
            }
        }
    }
    pass(
        "criterion 9 (split protocol)",
        "1000 seeds: disjoint splits with exact 50/15/15 per class",
    );
}
