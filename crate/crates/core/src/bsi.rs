//! The signal/idler sum-difference unitary `B_SI` and the single-photon lidar
//! built around it.
//!
//! In frequency the map is `(w_s, w_i) -> ((w_s + w_i)/2, w_s - w_i)`; in time
//! it is `(t_s, t_i) -> (t_s + t_i, (t_s - t_i)/2)`. Both matrices have
//! `|det| = 1` and are inverse transposes of each other, so either
//! representation gives the same state.
//!
//! | qubit superdense coding | continuous-variable lidar          |
//! |-------------------------|------------------------------------|
//! | CNOT before encoding    | `B_SI^dagger` (source entangler)   |
//! | `Z^b2 X^b1` on A        | delay / Doppler / delay on signal  |
//! | CNOT after encoding     | `B_SI` (disentangler)              |
//! | `Z^b2 X^b1 (x) X^b1`    | product of displacements           |

use nalgebra::DMatrix;

use crate::channel::{apply_channel_and_storage, ChannelParams};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianAmplitude, PhaseComparison, Rep, Role};

/// Which coordinates of a state form the signal/idler pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSelector {
    pub signal: usize,
    pub idler: usize,
}

impl PairSelector {
    pub fn new(signal: usize, idler: usize) -> Self {
        PairSelector { signal, idler }
    }

    fn check(&self, state: &GaussianAmplitude) -> Result<()> {
        if self.signal == self.idler {
            return Err(Error::InvalidPair(format!("photon {} selected twice", self.signal)));
        }
        if state.label(self.signal)?.role != Role::Signal {
            return Err(Error::InvalidPair(format!("photon {} is not a signal", self.signal)));
        }
        if state.label(self.idler)?.role != Role::Idler {
            return Err(Error::InvalidPair(format!("photon {} is not an idler", self.idler)));
        }
        Ok(())
    }
}

pub fn bsi_frequency_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.0, -1.0])
}

pub fn bsi_time_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.5, -0.5])
}

fn bsi_matrix(rep: Rep, dagger: bool) -> DMatrix<f64> {
    match (rep, dagger) {
        (Rep::Frequency, false) => bsi_frequency_matrix(),
        (Rep::Time, false) => bsi_time_matrix(),
        // inverses of the two maps above
        (Rep::Frequency, true) => DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, -0.5]),
        (Rep::Time, true) => DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.5, -1.0]),
    }
}

fn apply(state: &GaussianAmplitude, pair: PairSelector, dagger: bool) -> Result<GaussianAmplitude> {
    pair.check(state)?;
    let rep = state.label(pair.signal)?.rep;
    let aligned = state.to_rep(pair.idler, rep)?;
    aligned.linear_map_on(&[pair.signal, pair.idler], &bsi_matrix(rep, dagger))
}

/// Applies `B_SI`. If the idler is in a different representation from the
/// signal it is first Fourier-flipped to match.
pub fn apply_bsi(state: &GaussianAmplitude, pair: PairSelector) -> Result<GaussianAmplitude> {
    apply(state, pair, false)
}

pub fn apply_bsi_dagger(state: &GaussianAmplitude, pair: PairSelector) -> Result<GaussianAmplitude> {
    apply(state, pair, true)
}

/// The end-to-end single-photon unitary, in one of its two constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinglePhotonUnitary {
    /// `B_SI (channel (x) storage) B_SI^dagger`.
    EntangledPath(ChannelParams),
    /// `[D_St(dt_s + dt_i) D_Sw(dw_s/2)] (x) [D_It((dt_s - dt_i)/2) D_Iw(dw_s)]`.
    ProductPath(ChannelParams),
}

pub fn u_single_entangled_path(p: &ChannelParams) -> SinglePhotonUnitary {
    SinglePhotonUnitary::EntangledPath(*p)
}

pub fn u_single_product_path(p: &ChannelParams) -> SinglePhotonUnitary {
    SinglePhotonUnitary::ProductPath(*p)
}

/// Displacements of the product-path unitary on one pair.
pub fn apply_product_displacements(
    state: &GaussianAmplitude,
    pair: PairSelector,
    p: &ChannelParams,
) -> Result<GaussianAmplitude> {
    state
        .freq_shift(pair.signal, 0.5 * p.delta_omega_s)?
        .time_shift(pair.signal, p.delta_t_s + p.delta_t_i)?
        .freq_shift(pair.idler, p.delta_omega_s)?
        .time_shift(pair.idler, 0.5 * (p.delta_t_s - p.delta_t_i))
}

impl SinglePhotonUnitary {
    pub fn apply(&self, state: &GaussianAmplitude, pair: PairSelector) -> Result<GaussianAmplitude> {
        match self {
            SinglePhotonUnitary::EntangledPath(p) => {
                let entangled = apply_bsi_dagger(state, pair)?;
                let moved = apply_channel_and_storage(&entangled, pair.signal, pair.idler, p)?;
                apply_bsi(&moved, pair)
            }
            SinglePhotonUnitary::ProductPath(p) => {
                pair.check(state)?;
                apply_product_displacements(state, pair, p)
            }
        }
    }
}

/// Runs both constructions on the same input and compares them up to phase.
pub fn compare_unitary_paths(
    state: &GaussianAmplitude,
    pair: PairSelector,
    p: &ChannelParams,
) -> Result<PhaseComparison> {
    let a = u_single_entangled_path(p).apply(state, pair)?;
    let b = u_single_product_path(p).apply(state, pair)?;
    a.compare_up_to_phase(&b)
}

/// Single-photon estimates `(2 t_i + dt_i, 2 w_s - w_p)`.
pub fn estimate_from_outcomes(omega_s: f64, t_i: f64, delta_t_i: f64, omega_p: f64) -> (f64, f64) {
    (2.0 * t_i + delta_t_i, 2.0 * omega_s - omega_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biphoton::{build_biphoton, BiphotonParams, IDLER, SIGNAL};
    use crate::gaussian::CoordLabel;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use num_complex::Complex64 as C64;

    fn pair() -> PairSelector {
        PairSelector::new(SIGNAL, IDLER)
    }

    #[test]
    fn coordinate_map_on_a_basis_point() {
        let l = bsi_frequency_matrix();
        let w = l * nalgebra::Vector2::new(5.0, 3.0);
        assert_eq!((w[0], w[1]), (4.0, 2.0));
        assert_relative_eq!(bsi_frequency_matrix().determinant().abs(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(bsi_time_matrix().determinant().abs(), 1.0, epsilon = 1e-15);
        let inv_t = bsi_frequency_matrix().try_inverse().unwrap().transpose();
        assert!((inv_t - bsi_time_matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn dagger_inverts() {
        let s = build_biphoton(&BiphotonParams::new(2.0, 0.3).with_carriers(0.4, 1.2)).unwrap();
        let back = apply_bsi_dagger(&apply_bsi(&s, pair()).unwrap(), pair()).unwrap();
        let cmp = s.compare_up_to_phase(&back).unwrap();
        assert!(cmp.max_diff() < 1e-12);
    }

    #[test]
    fn time_and_frequency_constructions_agree() {
        let s = build_biphoton(&BiphotonParams::new(2.0, 0.3).with_carriers(0.4, 1.2)).unwrap();
        let via_time = apply_bsi(&s, pair()).unwrap();
        let f = s.fourier(SIGNAL).unwrap().fourier(IDLER).unwrap();
        let via_freq = apply_bsi(&f, pair()).unwrap();
        let cmp = via_time.compare_up_to_phase(&via_freq).unwrap();
        assert!(cmp.max_diff() < 1e-10, "{cmp:?}");
    }

    #[test]
    fn disentangles_channel_transformed_biphoton() {
        let p = BiphotonParams::new(10.0, 0.1).with_carriers(0.7, 3.0);
        let ch = ChannelParams::lossless(3.0, 0.2, 5.0);
        let s = apply_channel_and_storage(&build_biphoton(&p).unwrap(), SIGNAL, IDLER, &ch).unwrap();
        let out = apply_bsi(&s, pair()).unwrap();
        assert!(out.cross_coupling(&[SIGNAL], &[IDLER]).unwrap() < 1e-12);
        // Idler marginal: time-rep amplitude exp(-(2 t_i - dt_s + dt_i)^2 / (4 s_cor^2))
        // carrying frequency dw_s + dw.
        let d = out.measurement_density().unwrap();
        assert_relative_eq!(d.mean[1], 0.5 * (ch.delta_t_s - ch.delta_t_i), epsilon = 1e-10);
        assert_relative_eq!(d.std(1), p.sigma_cor / 2.0, max_relative = 1e-10);
        let di = out.fourier(IDLER).unwrap().measurement_density().unwrap();
        assert_relative_eq!(di.mean[1], ch.delta_omega_s + p.delta_omega, epsilon = 1e-9);
        // Signal marginal in frequency: exp(-(2 w_s - w_p - dw_s)^2 s_coh^2).
        let ds = out.fourier(SIGNAL).unwrap().measurement_density().unwrap();
        assert_relative_eq!(ds.mean[0], 0.5 * (p.omega_p + ch.delta_omega_s), epsilon = 1e-10);
        assert_relative_eq!(ds.std(0), 1.0 / (4.0 * p.sigma_coh), max_relative = 1e-10);
    }

    #[test]
    fn product_path_means() {
        let input = GaussianAmplitude::new(
            DMatrix::from_row_slice(2, 2, &[C64::new(2.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.5, 0.0)]),
            DVector::zeros(2),
            vec![CoordLabel::signal_freq(SIGNAL), CoordLabel::idler_freq(IDLER)],
        )
        .unwrap();
        let ch = ChannelParams::lossless(3.0, 0.2, 5.0);
        let out = u_single_product_path(&ch).apply(&input, pair()).unwrap();
        let d = out.measurement_density().unwrap();
        assert_relative_eq!(d.mean[0], 0.1, epsilon = 1e-12);
        let dt = out.fourier(IDLER).unwrap().measurement_density().unwrap();
        assert_relative_eq!(dt.mean[1], -1.0, epsilon = 1e-12);
        let (dt_est, dw_est) = estimate_from_outcomes(0.1, -1.0, 5.0, 0.0);
        assert_relative_eq!(dt_est, 3.0);
        assert_relative_eq!(dw_est, 0.2);
    }

    #[test]
    fn estimator_formulas() {
        assert_eq!(estimate_from_outcomes(0.0, 0.0, 0.0, 0.0), (0.0, 0.0));
        assert_eq!(estimate_from_outcomes(0.0, -1.0, 5.0, 0.0).0, 3.0);
        let wp = 4.0;
        assert_relative_eq!(estimate_from_outcomes(wp / 2.0 + 0.1, 0.0, 0.0, wp).1, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn zero_channel_paths_are_identity() {
        let s = build_biphoton(&BiphotonParams::new(1.0, 0.5)).unwrap();
        let ch = ChannelParams::lossless(0.0, 0.0, 0.0);
        for u in [u_single_entangled_path(&ch), u_single_product_path(&ch)] {
            let cmp = s.compare_up_to_phase(&u.apply(&s, pair()).unwrap()).unwrap();
            assert!(cmp.max_diff() < 1e-12 && cmp.phase.abs() < 1e-12);
        }
    }

    #[test]
    fn pair_selector_validation() {
        let s = build_biphoton(&BiphotonParams::new(1.0, 0.5)).unwrap();
        assert!(matches!(apply_bsi(&s, PairSelector::new(IDLER, SIGNAL)), Err(Error::InvalidPair(_))));
        assert!(matches!(apply_bsi(&s, PairSelector::new(SIGNAL, SIGNAL)), Err(Error::InvalidPair(_))));
        assert!(matches!(apply_bsi(&s, PairSelector::new(SIGNAL, 4)), Err(Error::CoordNotFound(4))));
    }
}
