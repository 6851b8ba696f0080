use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spagent_core::dsp::{
    angle_stat, doppler_spectral_entropy, fpar, stft, stftm, time_information_entropy, SignalFrame,
};

const FS: f64 = 1000.0;

fn noise(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn random_signal(rng: &mut ChaCha8Rng) -> SignalFrame {
    let len = 512 + 64 * rng.gen_range(0..8);
    let f0 = rng.gen_range(-0.45..0.45);
    let amp = rng.gen_range(0.0..4.0);
    let samples = noise(len, rng)
        .into_iter()
        .enumerate()
        .map(|(n, z)| z + Complex64::from_polar(amp, 2.0 * PI * f0 * n as f64))
        .collect();
    SignalFrame::new(samples, FS).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn features_are_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x = random_signal(&mut rng);
        let base = [
            time_information_entropy(&x, 16).unwrap(),
            doppler_spectral_entropy(&x, 256).unwrap(),
            fpar(&x, 50.0, 500.0).unwrap(),
            angle_stat(&x),
            stftm(&x, 0.1, 128, 64).unwrap(),
        ];
        for c in [1e-3, 7.5, 1e4] {
            let y = x.scaled(c);
            let scaled = [
                time_information_entropy(&y, 16).unwrap(),
                doppler_spectral_entropy(&y, 256).unwrap(),
                fpar(&y, 50.0, 500.0).unwrap(),
                angle_stat(&y),
                stftm(&y, 0.1, 128, 64).unwrap() / c,
            ];
            for (a, b) in base.iter().zip(&scaled) {
                assert!(close(*a, *b, 1e-9), "scale {c}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn entropies_stay_in_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..60 {
        let x = if i % 3 == 0 {
            // pure tone: spectrum concentrated in one bin
            SignalFrame::new((0..1024).map(|n| Complex64::from_polar(1.0, 2.0 * PI * 0.125 * n as f64)).collect(), FS)
                .unwrap()
        } else {
            random_signal(&mut rng)
        };
        let bins = rng.gen_range(2..64);
        let h = doppler_spectral_entropy(&x, 256).unwrap();
        assert!((0.0..=256f64.ln() + 1e-12).contains(&h), "{h}");
        let t = time_information_entropy(&x, bins).unwrap();
        assert!((0.0..=(bins as f64).ln() + 1e-12).contains(&t), "{t}");
    }
}

#[test]
fn white_noise_doppler_entropy_near_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = 256f64.ln();
    for _ in 0..100 {
        let x = SignalFrame::new(noise(1024, &mut rng), FS).unwrap();
        let h = doppler_spectral_entropy(&x, 256).unwrap();
        assert!((h - target).abs() <= 0.05 * target, "{h}");
    }
}

#[test]
fn stft_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = SignalFrame::new(noise(96, &mut rng), FS).unwrap();
    let (w, hop) = (32usize, 16usize);
    let spec = stft(&x, w, hop).unwrap();
    assert_eq!(spec.frames(), (96 - w) / hop + 1);
    for t in 0..spec.frames() {
        for k in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..w {
                let win = 0.5 - 0.5 * (2.0 * PI * n as f64 / w as f64).cos();
                acc += x.samples()[t * hop + n] * win * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / w as f64);
            }
            assert!((spec.get(t, k) - acc.norm()).abs() < 1e-9);
        }
    }
}

#[test]
fn tone_has_large_fpar_and_low_entropy() {
    let tone = SignalFrame::new((0..1024).map(|n| Complex64::from_polar(1.0, 2.0 * PI * 0.25 * n as f64)).collect(), FS)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let white = SignalFrame::new(noise(1024, &mut rng), FS).unwrap();
    assert!(fpar(&tone, 0.0, 500.0).unwrap() > 10.0 * fpar(&white, 0.0, 500.0).unwrap());
    assert!(doppler_spectral_entropy(&tone, 256).unwrap() < 0.1);
}

#[test]
fn constant_phase_has_zero_angle_stat() {
    let x = SignalFrame::new((1..=64).map(|n| Complex64::from_polar(n as f64, 0.7)).collect(), FS).unwrap();
    assert!(angle_stat(&x).abs() < 1e-6);
}
