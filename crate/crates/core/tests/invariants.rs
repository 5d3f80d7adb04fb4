use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use qlidar::biphoton::{build_biphoton, BiphotonParams, IDLER, SIGNAL};
use qlidar::bsi::{apply_bsi, PairSelector};
use qlidar::channel::ChannelParams;
use qlidar::estimation::receiver_state;
use qlidar::montecarlo::{run_campaign, run_lossy_campaign, SinglePhotonLidar};
use qlidar::{CoordLabel, GaussianAmplitude, Rep, Role};

fn state(re: [f64; 3], im: [f64; 3], b: [f64; 4], reps: (bool, bool)) -> GaussianAmplitude {
    // lower-triangular factor keeps the real part positive definite
    let l = DMatrix::from_row_slice(2, 2, &[re[0].abs() + 0.3, 0.0, re[1], re[2].abs() + 0.3]);
    let r = &l * l.transpose();
    let a = DMatrix::from_fn(2, 2, |i, j| {
        let k = if i == j { 2 * i } else { 1 };
        C64::new(r[(i, j)], im[k])
    });
    let rep = |t: bool| if t { Rep::Time } else { Rep::Frequency };
    GaussianAmplitude::new(
        a,
        DVector::from_vec(vec![C64::new(b[0], b[1]), C64::new(b[2], b[3])]),
        vec![
            CoordLabel::new(SIGNAL, Role::Signal, rep(reps.0)),
            CoordLabel::new(IDLER, Role::Idler, rep(reps.1)),
        ],
    )
    .unwrap()
}

fn arb_state() -> impl Strategy<Value = GaussianAmplitude> {
    (
        prop::array::uniform3(-1.5..1.5f64),
        prop::array::uniform3(-1.0..1.0f64),
        prop::array::uniform4(-2.0..2.0f64),
        (any::<bool>(), any::<bool>()),
    )
        .prop_map(|(re, im, b, reps)| state(re, im, b, reps))
}

fn arb_biphoton() -> impl Strategy<Value = BiphotonParams> {
    (0.3..8.0f64, 0.05..3.0f64, -2.0..2.0f64, -2.0..2.0f64)
        .prop_map(|(coh, cor, dw, wp)| BiphotonParams::new(coh, cor).with_carriers(dw, wp))
}

fn arb_channel() -> impl Strategy<Value = ChannelParams> {
    (-5.0..5.0f64, -1.0..1.0f64, -5.0..5.0f64).prop_map(|(t, w, i)| ChannelParams::lossless(t, w, i))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fourier_is_an_involution_up_to_phase(s in arb_state(), k in 0usize..2) {
        let twice = s.fourier(k).unwrap().fourier(k).unwrap();
        prop_assert!(s.compare_up_to_phase(&twice).unwrap().max_diff() < 1e-10);
    }

    #[test]
    fn shifts_commute_with_representation_change(s in arb_state(), k in 0usize..2, tau in -3.0..3.0f64, mu in -3.0..3.0f64) {
        let direct = s.time_shift(k, tau).unwrap().freq_shift(k, mu).unwrap().fourier(k).unwrap();
        let flipped = s.fourier(k).unwrap().time_shift(k, tau).unwrap().freq_shift(k, mu).unwrap();
        prop_assert!(direct.compare_up_to_phase(&flipped).unwrap().max_diff() < 1e-10);
    }

    #[test]
    fn norm_is_preserved_by_unitaries(s in arb_state(), k in 0usize..2, tau in -3.0..3.0f64) {
        let n = s.log_norm_sq().unwrap();
        let moved = s.fourier(k).unwrap().time_shift(k, tau).unwrap();
        prop_assert!((moved.log_norm_sq().unwrap() - n).abs() < 1e-10);
        let b = apply_bsi(&s, PairSelector::new(SIGNAL, IDLER)).unwrap();
        prop_assert!((b.log_norm_sq().unwrap() - n).abs() < 1e-10);
    }

    #[test]
    fn overlaps_obey_cauchy_schwarz(a in arb_state(), b in arb_state()) {
        let b = b.with_reps_of(a.labels()).unwrap();
        let lhs = 2.0 * a.log_overlap(&b).unwrap().re;
        prop_assert!(lhs <= a.log_norm_sq().unwrap() + b.log_norm_sq().unwrap() + 1e-9);
    }

    #[test]
    fn disentangled_receiver_state_factorizes(p in arb_biphoton(), ch in arb_channel()) {
        let out = apply_bsi(&receiver_state(&p, &ch).unwrap(), PairSelector::new(SIGNAL, IDLER)).unwrap();
        prop_assert!(out.cross_coupling(&[SIGNAL], &[IDLER]).unwrap() < 1e-12);
    }

    #[test]
    fn estimators_are_unbiased_with_exact_spreads(p in arb_biphoton(), ch in arb_channel()) {
        let (mean, std) = SinglePhotonLidar::new(&p, &ch).unwrap().estimator_moments();
        prop_assert!((mean[0] - ch.delta_t_s).abs() < 1e-9);
        prop_assert!((mean[1] - ch.delta_omega_s).abs() < 1e-9);
        prop_assert!((std[0] / p.sigma_cor - 1.0).abs() < 1e-9);
        prop_assert!((std[1] * 2.0 * p.sigma_coh - 1.0).abs() < 1e-9);
    }
}

#[test]
fn biphoton_is_normalized() {
    let s = build_biphoton(&BiphotonParams::new(3.0, 0.4).with_carriers(1.0, 2.0)).unwrap();
    assert!(s.log_norm_sq().unwrap().abs() < 1e-12);
}

#[test]
fn campaigns_do_not_depend_on_thread_count() {
    let p = BiphotonParams::new(10.0, 0.1);
    let ch = ChannelParams { eta: 0.2, ..ChannelParams::lossless(3.0, 0.2, 5.0) };
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1).install(|| (run_campaign(&p, &ch, 2000, 5).unwrap(), run_lossy_campaign(&p, &ch, 2000, 5).unwrap()));
    let many = pool(5).install(|| (run_campaign(&p, &ch, 2000, 5).unwrap(), run_lossy_campaign(&p, &ch, 2000, 5).unwrap()));
    assert_eq!(one, many);
}
