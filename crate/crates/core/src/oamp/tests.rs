use super::*;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity_instance(sigma2: f64) -> MimoInstance {
    let a = FRAC_1_SQRT_2;
    let x = vec![c(a, -a), c(-a, a)];
    let h = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
    MimoInstance::new(2, 2, h, x.clone(), sigma2, x).unwrap()
}

#[test]
fn denoiser_limits() {
    assert_eq!(mmse_denoiser(&[c(0.0, 0.0)], 1.0, Constellation::Qpsk).unwrap(), vec![c(0.0, 0.0)]);
    let r = [c(0.3, -2.0), c(-0.01, 0.02)];
    let hard = mmse_denoiser(&r, 1e-6, Constellation::Qpsk).unwrap();
    for (h, z) in hard.iter().zip(&r) {
        assert!((h - Constellation::Qpsk.hard_decision(*z)).norm() < 1e-12);
    }
    assert!(mmse_denoiser(&r, 0.0, Constellation::Qpsk).is_err());
    assert!(mmse_denoiser(&r, -1.0, Constellation::Qpsk).is_err());
}

#[test]
fn denoiser_matches_posterior_sum() {
    for (r, tau2) in [(c(0.5, 0.0), 1.0), (c(0.5, -0.2), 0.3), (c(-1.3, 0.7), 2.5)] {
        let pts = Constellation::Qpsk.points();
        let w: Vec<f64> = pts.iter().map(|p| (-(r - p).norm_sqr() / tau2).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean: Complex64 = pts.iter().zip(&w).map(|(p, w)| p * (w / z)).sum();
        let got = mmse_denoiser(&[r], tau2, Constellation::Qpsk).unwrap()[0];
        assert!((got - mean).norm() < 1e-9, "{got} vs {mean}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn denoiser_is_bounded(re in -50.0f64..50.0, im in -50.0f64..50.0, tau2 in 1e-9f64..100.0) {
        let x = mmse_denoiser(&[c(re, im)], tau2, Constellation::Qpsk).unwrap()[0];
        prop_assert!(x.re.abs() <= FRAC_1_SQRT_2 + 1e-15);
        prop_assert!(x.im.abs() <= FRAC_1_SQRT_2 + 1e-15);
    }

    #[test]
    fn variances_stay_floored(seed in 0u64..1000, snr in -10.0f64..40.0, gamma in -2.0f64..3.0, theta in -2.0f64..3.0) {
        let inst = sample_mimo(3, 4, snr, SeedKey::new(seed, 0)).unwrap();
        let mut s = OampState::initial(3);
        for _ in 0..3 {
            s = oamp_layer(&s, &inst, gamma, theta).unwrap();
            prop_assert!(s.v2 >= VARIANCE_FLOOR && s.v2.is_finite());
            prop_assert!(s.tau2 >= VARIANCE_FLOOR && s.tau2.is_finite());
        }
    }
}

#[test]
fn identity_channel_is_recovered_in_one_layer() {
    let inst = identity_instance(0.0);
    let s = oamp_layer(&OampState::initial(2), &inst, 1.0, 1.0).unwrap();
    assert_eq!(s.r, inst.y);
    assert_eq!(s.x, inst.x_true);
    assert!((s.v2 - 1.0).abs() < 1e-15);
    assert_eq!(s.tau2, VARIANCE_FLOOR);
    let d = oamp_detect(&inst, &OampParams::fixed(1)).unwrap();
    assert_eq!(d.hard, inst.x_true);
}

#[test]
fn heavy_noise_pushes_output_to_prior_mean() {
    let inst = identity_instance(1e8);
    let s = oamp_layer(&OampState::initial(2), &inst, 1.0, 1.0).unwrap();
    assert!(s.tau2 > 1e6);
    assert!(s.x.iter().all(|z| z.norm() < 1e-5));
}

/// One layer from `x = 0` written out with an explicit 2×2 inverse.
#[test]
fn two_by_two_layer_by_hand() {
    let h = [c(0.8, -0.3), c(0.2, 0.5), c(-0.4, 0.1), c(1.1, 0.6)];
    let y = [c(0.7, 0.2), c(-0.5, 0.9)];
    let a = FRAC_1_SQRT_2;
    let (sigma2, gamma, theta) = (0.3, 0.9, 1.2);
    let inst = MimoInstance::new(2, 2, h.to_vec(), y.to_vec(), sigma2, vec![c(a, a), c(a, -a)]).unwrap();
    let s = oamp_layer(&OampState::initial(2), &inst, gamma, theta).unwrap();

    let tr_hh: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    let v2 = ((y[0].norm_sqr() + y[1].norm_sqr() - 2.0 * sigma2) / tr_hh).max(1e-12);
    // A = v² H Hᴴ + σ² I
    let hh = |i: usize, k: usize| h[2 * i] * h[2 * k].conj() + h[2 * i + 1] * h[2 * k + 1].conj();
    let a00 = hh(0, 0) * v2 + sigma2;
    let a01 = hh(0, 1) * v2;
    let a10 = hh(1, 0) * v2;
    let a11 = hh(1, 1) * v2 + sigma2;
    let det = a00 * a11 - a01 * a10;
    let inv = [a11 / det, -a01 / det, -a10 / det, a00 / det];
    // Ŵ = v² Hᴴ A⁻¹
    let mut w = [c(0.0, 0.0); 4];
    for j in 0..2 {
        for i in 0..2 {
            w[2 * j + i] = (h[j].conj() * inv[i] + h[2 + j].conj() * inv[2 + i]) * v2;
        }
    }
    let wh = |r: usize, k: usize| w[2 * r] * h[k] + w[2 * r + 1] * h[2 + k];
    let scale = c(2.0, 0.0) / (wh(0, 0) + wh(1, 1));
    let w: Vec<Complex64> = w.iter().map(|z| z * scale).collect();
    let r: Vec<Complex64> = (0..2).map(|j| (w[2 * j] * y[0] + w[2 * j + 1] * y[1]) * gamma).collect();
    let mut tr_cc = 0.0;
    for i in 0..2 {
        for k in 0..2 {
            let whik = (w[2 * i] * h[k] + w[2 * i + 1] * h[2 + k]) * theta;
            let cik = if i == k { c(1.0, 0.0) - whik } else { -whik };
            tr_cc += cik.norm_sqr();
        }
    }
    let tr_ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let tau2 = (tr_cc * v2 + theta * theta * sigma2 * tr_ww) / 2.0;
    let x: Vec<Complex64> = r
        .iter()
        .map(|z| c(a * (2f64.sqrt() * z.re / tau2).tanh(), a * (2f64.sqrt() * z.im / tau2).tanh()))
        .collect();

    assert!((s.v2 - v2).abs() < 1e-12);
    assert!((s.tau2 - tau2).abs() < 1e-12 * tau2.max(1.0), "{} vs {tau2}", s.tau2);
    for j in 0..2 {
        assert!((s.r[j] - r[j]).norm() < 1e-12);
        assert!((s.x[j] - x[j]).norm() < 1e-12);
    }
}

#[test]
fn solver_matches_nalgebra() {
    let mut s = SeedKey::new(42, 0).stream();
    let n = 5;
    let a: Vec<Complex64> = (0..n * n).map(|_| s.complex_normal()).collect();
    let b: Vec<Complex64> = (0..n * 2).map(|_| s.complex_normal()).collect();
    let x = solve(&a, &b, n, 2).unwrap();
    let na = nalgebra::DMatrix::from_row_slice(n, n, &a);
    let nb = nalgebra::DMatrix::from_row_slice(n, 2, &b);
    let nx = na.lu().solve(&nb).unwrap();
    for i in 0..n {
        for j in 0..2 {
            assert!((x[i * 2 + j] - nx[(i, j)]).norm() < 1e-10);
        }
    }
}

#[test]
fn singular_system_is_ridged_and_flagged() {
    let a = FRAC_1_SQRT_2;
    // Noiseless, more receive than transmit antennas: v²HHᴴ is rank 1 of 2.
    let h = vec![c(1.0, 0.0), c(1.0, 0.0)];
    let x = vec![c(a, a)];
    let inst = MimoInstance::new(2, 1, h, vec![x[0], x[0]], 0.0, x).unwrap();
    let s = oamp_layer(&OampState::initial(1), &inst, 1.0, 1.0).unwrap();
    assert!(s.regularized);
    assert!(s.x.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    assert!(!oamp_layer(&OampState::initial(2), &identity_instance(0.1), 1.0, 1.0).unwrap().regularized);
}

#[test]
fn detection_is_deterministic_and_equivariant() {
    let params = OampParams { layers: 3, gamma: vec![1.0, 0.8, 1.1], theta: vec![1.0, 0.9, 1.2], constellation: Constellation::Qpsk };
    for t in 0..20 {
        let inst = sample_mimo(4, 4, 8.0, SeedKey::new(7, t)).unwrap();
        let a = oamp_detect(&inst, &params).unwrap();
        assert_eq!(a, oamp_detect(&inst, &params).unwrap());
        let perm = [2, 0, 3, 1];
        let b = oamp_detect(&inst.permuted_columns(&perm), &params).unwrap();
        for (j, &p) in perm.iter().enumerate() {
            assert!((b.soft[j] - a.soft[p]).norm() < 1e-10);
        }
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let a = FRAC_1_SQRT_2;
    let x = vec![c(a, a)];
    assert!(MimoInstance::new(1, 1, vec![c(1.0, 0.0)], vec![c(0.0, 0.0)], 1.0, vec![c(0.5, 0.5)]).is_err());
    assert!(MimoInstance::new(1, 1, vec![], vec![c(0.0, 0.0)], 1.0, x.clone()).is_err());
    assert!(MimoInstance::new(1, 1, vec![c(1.0, 0.0)], vec![c(0.0, 0.0)], -1.0, x).is_err());
    let mut p = OampParams::fixed(2);
    p.theta.pop();
    assert!(p.validate().is_err());
    assert!(OampParams::fixed(0).validate().is_err());
    assert!(oamp_layer(&OampState::initial(3), &identity_instance(0.1), 1.0, 1.0).is_err());
}

#[test]
fn ml_detector_finds_noiseless_truth() {
    for t in 0..20 {
        let mut inst = sample_mimo(3, 3, 10.0, SeedKey::new(8, t)).unwrap();
        inst.y = (0..3).map(|i| (0..3).map(|j| inst.h[i * 3 + j] * inst.x_true[j]).sum()).collect();
        assert_eq!(ml_detect(&inst).unwrap(), inst.x_true);
    }
    let big = sample_mimo(9, 9, 10.0, SeedKey::new(8, 0)).unwrap();
    assert!(matches!(ml_detect(&big), Err(Error::Size { .. })));
}

#[test]
fn ser_of_reference_detectors() {
    let key = SeedKey::new(11, 0);
    assert_eq!(ser_eval(&Detector::Genie, 4, 4, 10.0, 1000, key).unwrap().ser, 0.0);
    let random = ser_eval(&Detector::Random, 4, 4, 10.0, 2000, key).unwrap();
    assert!((random.ser - 0.75).abs() < 3.0 * random.ci_half_width + 1e-3, "{random:?}");
    let lmmse = ser_eval(&Detector::Lmmse, 4, 4, 10.0, 2000, key).unwrap();
    assert!(lmmse.ser > 0.0 && lmmse.ser < random.ser - random.ci_half_width);
    assert!(ser_eval(&Detector::Genie, 4, 4, 10.0, 999, key).is_err());
}

#[test]
fn oamp_beats_lmmse_at_high_snr() {
    let oamp = Detector::Oamp { params: OampParams::fixed(4) };
    let p = ser_paired(&oamp, &Detector::Lmmse, 4, 4, 15.0, 2000, SeedKey::new(12, 0)).unwrap();
    assert!(p.a.ser <= p.b.ser, "{p:?}");
}

#[test]
fn oamp_tracks_ml_more_closely_than_lmmse() {
    let oamp = Detector::Oamp { params: OampParams::fixed(4) };
    let key = SeedKey::new(13, 0);
    let (mut with_oamp, mut with_lmmse) = (0, 0);
    for t in 0..2000 {
        let inst = trial_instance(2, 2, 20.0, key, t).unwrap();
        let ml = ml_detect(&inst).unwrap();
        with_oamp += (oamp.detect(&inst, key).unwrap() == ml) as usize;
        with_lmmse += (lmmse_detect(&inst) == ml) as usize;
    }
    assert!(with_oamp > with_lmmse, "{with_oamp} vs {with_lmmse}");
    assert!(with_oamp >= 1940, "{with_oamp}");
}

#[test]
fn gradient_matches_finite_differences() {
    for (layers, freeze) in [(1, false), (4, false), (4, true)] {
        let inst = sample_mimo(4, 4, 10.0, SeedKey::new(14, layers as u64)).unwrap();
        let mut params = OampParams::fixed(layers);
        params.gamma[0] = 0.9;
        params.theta[layers - 1] = 1.1;
        let (loss, g) = oamp_gradient(&inst, &params, freeze).unwrap();
        assert_eq!(loss, oamp_loss(&inst, &params).unwrap());
        if freeze {
            continue;
        }
        let h = 1e-6;
        for k in 0..2 * layers {
            let bump = |d: f64| {
                let mut p = params.clone();
                if k < layers { p.gamma[k] += d } else { p.theta[k - layers] += d }
                oamp_loss(&inst, &p).unwrap()
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let rel = (g[k] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-4 || (g[k] - fd).abs() < 1e-9, "layers {layers} coord {k}: {} vs {fd}", g[k]);
        }
    }
}

#[test]
fn training_keeps_best_validation_loss() {
    let train = gen_mimo_set(200, 4, 4, 10.0, SeedKey::new(15, 0)).unwrap();
    let valid = gen_mimo_set(200, 4, 4, 10.0, SeedKey::new(15, 10_000)).unwrap();
    let config = OampTrainConfig { epochs: 3, ..OampTrainConfig::default() };
    let (params, report) = train_oamp(&train, &valid, &OampParams::fixed(2), &config).unwrap();
    assert_eq!(report.valid_loss.len(), 4);
    let best = report.valid_loss[report.best_index];
    assert!(report.valid_loss.iter().all(|&v| v >= best));
    assert!(best <= report.valid_loss[0]);
    let again = train_oamp(&train, &valid, &OampParams::fixed(2), &config).unwrap();
    assert_eq!(again.0, params);
}
