//! The STFT against a brute-force evaluation of the windowed DFT double sum.
//!
//! The oracle below is deliberately naive — O(T * N^2) with its own window
//! computation — and shares nothing with the library's transform path.

use rotordiag::audio::AudioClip;
use rotordiag::rng::SplitMix64;
use rotordiag::spectrogram::{stft, SpectrogramParams};

/// Naive one-sided magnitude spectrogram:
/// |sum_n W(n) x(n + t h) e^{-2 pi i k n / N}| for k = 0..=N/2.
fn naive_magnitudes(samples: &[f32], n: usize, hop: usize) -> Vec<Vec<f64>> {
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos()))
        .collect();
    let frames = (samples.len() - n) / hop + 1;
    (0..frames)
        .map(|t| {
            (0..=n / 2)
                .map(|k| {
                    let mut re = 0.0f64;
                    let mut im = 0.0f64;
                    for i in 0..n {
                        let angle = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                        let v = window[i] * samples[t * hop + i] as f64;
                        re += v * angle.cos();
                        im += v * angle.sin();
                    }
                    (re * re + im * im).sqrt()
                })
                .collect()
        })
        .collect()
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-9)
}

fn random_clip(rng: &mut SplitMix64, len: usize) -> AudioClip {
    AudioClip::new(
        (0..len)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) as f32)
            .collect(),
        8000,
    )
}

#[test]
fn stft_matches_naive_double_sum_on_random_clips() {
    let mut rng = SplitMix64::new(20_240_601);
    let mut checked = 0usize;
    for &n in &[64usize, 256] {
        let hop = n / 2;
        for _ in 0..12 {
            let len = n + (rng.next_below(3 * n as u64 + 1) as usize);
            let clip = random_clip(&mut rng, len);
            let got = stft(&clip, &SpectrogramParams::new(n, hop).unwrap()).unwrap();
            let want = naive_magnitudes(&clip.samples, n, hop);
            assert_eq!(got.frames(), want.len());
            for (t, row) in want.iter().enumerate() {
                for (k, &expected) in row.iter().enumerate() {
                    let err = relative_error(got.magnitude(t, k), expected);
                    assert!(
                        err < 1e-6,
                        "n={n} t={t} k={k}: {} vs {expected} (rel {err:.2e})",
                        got.magnitude(t, k)
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 2_000, "only {checked} magnitudes compared");
}

#[test]
fn stft_matches_oracle_with_odd_lengths_and_hops() {
    // Non-power-of-two windows exercise the direct transform path.
    let mut rng = SplitMix64::new(77);
    for &(n, hop) in &[(96usize, 32usize), (100, 41), (130, 130)] {
        let clip = random_clip(&mut rng, 3 * n + 17);
        let got = stft(&clip, &SpectrogramParams::new(n, hop).unwrap()).unwrap();
        let want = naive_magnitudes(&clip.samples, n, hop);
        assert_eq!(got.frames(), want.len());
        for (t, row) in want.iter().enumerate() {
            for (k, &expected) in row.iter().enumerate() {
                assert!(relative_error(got.magnitude(t, k), expected) < 1e-6);
            }
        }
    }
}

#[test]
fn pure_tone_at_bin_center_matches_oracle_peak() {
    // A sinusoid exactly on bin k0: the oracle's bin-k0 magnitude equals the
    // windowed coherent gain (sum of the window) / 2.
    let n = 256usize;
    let fs = 8000u32;
    let k0 = 32usize;
    let freq = k0 as f64 * fs as f64 / n as f64;
    let samples: Vec<f32> = (0..2 * n)
        .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs as f64).sin() as f32)
        .collect();
    let clip = AudioClip::new(samples, fs);
    let got = stft(&clip, &SpectrogramParams::new(n, n / 2).unwrap()).unwrap();
    let want = naive_magnitudes(&clip.samples, n, n / 2);

    let window_sum: f64 = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos()))
        .sum();
    for t in 0..got.frames() {
        assert!(relative_error(got.magnitude(t, k0), want[t][k0]) < 1e-6);
        // Hann-windowed unit sinusoid on-bin: |X(k0)| = window_sum / 2.
        assert!(
            (got.magnitude(t, k0) - window_sum / 2.0).abs() < 1e-3 * window_sum,
            "frame {t}: {} vs {}",
            got.magnitude(t, k0),
            window_sum / 2.0
        );
        // The peak dominates every bin two or more away.
        for k in 0..got.freq_bins() {
            if (k as i64 - k0 as i64).unsigned_abs() >= 2 {
                assert!(got.magnitude(t, k) < got.magnitude(t, k0) * 0.05);
            }
        }
    }
}

#[test]
fn per_frame_parseval_holds_through_the_oracle() {
    // Full-spectrum Parseval: sum_k |X(t,k)|^2 = N * sum_n |W(n) x(n+th)|^2.
    // The one-sided library output is extended to the full spectrum by
    // conjugate symmetry of real-signal transforms.
    let mut rng = SplitMix64::new(9);
    let n = 128usize;
    let hop = 64usize;
    let clip = random_clip(&mut rng, 1000);
    let got = stft(&clip, &SpectrogramParams::new(n, hop).unwrap()).unwrap();

    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos()))
        .collect();
    for t in 0..got.frames() {
        let mut spectral = got.magnitude(t, 0).powi(2) + got.magnitude(t, n / 2).powi(2);
        for k in 1..n / 2 {
            spectral += 2.0 * got.magnitude(t, k).powi(2);
        }
        let mut windowed = 0.0f64;
        for i in 0..n {
            let v = window[i] * clip.samples[t * hop + i] as f64;
            windowed += v * v;
        }
        let expected = n as f64 * windowed;
        assert!(
            (spectral - expected).abs() <= 1e-6 * expected.max(1e-9),
            "frame {t}: {spectral} vs {expected}"
        );
    }
}
