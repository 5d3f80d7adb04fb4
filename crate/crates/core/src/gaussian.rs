//! Multivariate Gaussian pure-state wavefunctions.
//!
//! A state over `n` labelled coordinates is stored as
//!
//! ```text
//! psi(x) = exp(-1/2 x^T A x + b^T x + c)
//! ```
//!
//! with `A` complex symmetric and `Re(A)` positive definite. Each coordinate
//! is either a photon arrival time or a photon angular frequency; the Fourier
//! convention is `Psi(w) = (2 pi)^-1/2 \int dt e^{i w t} psi(t)`.
//!
//! All operations are closed-form updates of `(A, b, c)`. The global phase
//! `Im(c)` is carried along exactly, so overlaps between states produced by
//! different routes are meaningful including their phase.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamDomain};

const SYMMETRY_TOL: f64 = 1e-12;
const UNIMODULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Signal,
    Idler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rep {
    Time,
    Frequency,
}

impl Rep {
    pub fn dual(self) -> Rep {
        match self {
            Rep::Time => Rep::Frequency,
            Rep::Frequency => Rep::Time,
        }
    }
}

/// Label attached to one coordinate of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoordLabel {
    pub photon: usize,
    pub role: Role,
    pub rep: Rep,
}

impl CoordLabel {
    pub fn new(photon: usize, role: Role, rep: Rep) -> Self {
        CoordLabel { photon, role, rep }
    }

    pub fn signal_time(photon: usize) -> Self {
        Self::new(photon, Role::Signal, Rep::Time)
    }

    pub fn idler_time(photon: usize) -> Self {
        Self::new(photon, Role::Idler, Rep::Time)
    }

    pub fn signal_freq(photon: usize) -> Self {
        Self::new(photon, Role::Signal, Rep::Frequency)
    }

    pub fn idler_freq(photon: usize) -> Self {
        Self::new(photon, Role::Idler, Rep::Frequency)
    }

    fn with_rep(self, rep: Rep) -> Self {
        CoordLabel { rep, ..self }
    }
}

/// Gaussian pure-state wavefunction `exp(-1/2 x^T A x + b^T x + c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAmplitude {
    labels: Vec<CoordLabel>,
    a: DMatrix<C64>,
    b: DVector<C64>,
    c: C64,
}

/// Result of comparing two states up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseComparison {
    /// Largest entry of `|A1 - A2|`.
    pub a_diff: f64,
    /// Largest entry of `|b1 - b2|`.
    pub b_diff: f64,
    /// `|Re(c1 - c2)|`, zero when both states carry the same norm.
    pub modulus_diff: f64,
    /// Phase offset `Im(c2 - c1)` wrapped to `(-pi, pi]`.
    pub phase: f64,
}

impl PhaseComparison {
    /// Largest of the three structural differences.
    pub fn max_diff(&self) -> f64 {
        self.a_diff.max(self.b_diff).max(self.modulus_diff)
    }
}

pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut p = phi.rem_euclid(two_pi);
    if p > PI {
        p -= two_pi;
    }
    p
}

fn symmetrize(a: &mut DMatrix<C64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (a[(i, j)] + a[(j, i)]) * 0.5;
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

fn re_part(a: &DMatrix<C64>) -> DMatrix<f64> {
    a.map(|z| z.re)
}

fn im_part(a: &DMatrix<C64>) -> DMatrix<f64> {
    a.map(|z| z.im)
}

/// `ln det M` for complex symmetric `M` with positive definite real part, on
/// the branch continuously connected to the real case.
fn ln_det_complex_symmetric(m: &DMatrix<C64>) -> Result<C64> {
    let p = re_part(m);
    let q = im_part(m);
    let chol = p.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let ln_det_p: f64 = l.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    // K = L^-1 Q L^-T
    let x = l
        .solve_lower_triangular(&q)
        .ok_or(Error::NotPositiveDefinite)?;
    let k = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let k = (&k + k.transpose()) * 0.5;
    let eig = k.symmetric_eigenvalues();
    let mut acc = C64::new(ln_det_p, 0.0);
    for q in eig.iter() {
        acc += C64::new(1.0, *q).ln();
    }
    Ok(acc)
}

impl GaussianAmplitude {
    /// Builds a normalised state from a quadratic form and linear term.
    /// `Im(c)` is set to zero.
    pub fn new(a: DMatrix<C64>, b: DVector<C64>, labels: Vec<CoordLabel>) -> Result<Self> {
        let n = labels.len();
        if a.nrows() != n || a.ncols() != n || b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, b has {} entries, {} labels",
                a.nrows(),
                a.ncols(),
                b.len(),
                n
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].iter().any(|m| m.photon == l.photon) {
                return Err(Error::DuplicatePhoton(l.photon));
            }
        }
        let scale = a.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((a[(i, j)] - a[(j, i)]).norm());
            }
        }
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NonSymmetric(asym));
        }
        let mut a = a;
        symmetrize(&mut a);
        let mut state = GaussianAmplitude {
            labels,
            a,
            b,
            c: C64::new(0.0, 0.0),
        };
        let ln_n = state.log_norm_sq()?;
        state.c = C64::new(-0.5 * ln_n, 0.0);
        Ok(state)
    }

    /// Assembles a state from raw parameters without renormalising.
    pub(crate) fn from_parts(
        labels: Vec<CoordLabel>,
        mut a: DMatrix<C64>,
        b: DVector<C64>,
        c: C64,
    ) -> Self {
        symmetrize(&mut a);
        GaussianAmplitude { labels, a, b, c }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[CoordLabel] {
        &self.labels
    }

    pub fn a(&self) -> &DMatrix<C64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<C64> {
        &self.b
    }

    pub fn c(&self) -> C64 {
        self.c
    }

    pub fn index_of(&self, photon: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.photon == photon)
            .ok_or(Error::CoordNotFound(photon))
    }

    pub fn label(&self, photon: usize) -> Result<CoordLabel> {
        Ok(self.labels[self.index_of(photon)?])
    }

    /// `ln \int |psi|^2 dx`, zero for a normalised state.
    pub fn log_norm_sq(&self) -> Result<f64> {
        let n = self.dim();
        let p = re_part(&self.a) * 2.0;
        let chol = p.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let h = self.b.map(|z| 2.0 * z.re);
        let quad = h.dot(&chol.solve(&h));
        Ok(2.0 * self.c.re + 0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * ln_det + 0.5 * quad)
    }

    /// Wavefunction value at a point given in the state's own coordinates.
    pub fn evaluate(&self, x: &[f64]) -> C64 {
        let n = self.dim();
        let mut exponent = self.c;
        for i in 0..n {
            exponent += self.b[i] * x[i];
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += self.a[(i, j)] * x[j];
            }
            exponent -= row * x[i] * 0.5;
        }
        exponent.exp()
    }

    /// Flips one coordinate between time and frequency representation.
    pub fn fourier(&self, photon: usize) -> Result<Self> {
        let k = self.index_of(photon)?;
        let label = self.labels[k];
        let sign = match label.rep {
            Rep::Time => 1.0,
            Rep::Frequency => -1.0,
        };
        let n = self.dim();
        let a_kk = self.a[(k, k)];
        let inv = C64::new(1.0, 0.0) / a_kk;
        let b_k = self.b[k];
        let si = C64::new(0.0, sign);

        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for i in 0..n {
            if i == k {
                continue;
            }
            for j in 0..n {
                if j == k {
                    continue;
                }
                a[(i, j)] = self.a[(i, j)] - self.a[(i, k)] * self.a[(k, j)] * inv;
            }
            a[(i, k)] = si * self.a[(i, k)] * inv;
            a[(k, i)] = si * self.a[(k, i)] * inv;
            b[i] = self.b[i] - self.a[(i, k)] * b_k * inv;
        }
        a[(k, k)] = inv;
        b[k] = si * b_k * inv;
        let c = self.c + b_k * b_k * inv * 0.5 - a_kk.ln() * 0.5;

        let mut labels = self.labels.clone();
        labels[k] = label.with_rep(label.rep.dual());
        Ok(Self::from_parts(labels, a, b, c))
    }

    /// Returns the state with the photon's coordinate in the requested
    /// representation, applying a Fourier flip only when needed.
    pub fn to_rep(&self, photon: usize, rep: Rep) -> Result<Self> {
        if self.label(photon)?.rep == rep {
            Ok(self.clone())
        } else {
            self.fourier(photon)
        }
    }

    /// Brings every coordinate whose photon appears in `template` into the
    /// template's representation.
    pub fn with_reps_of(&self, template: &[CoordLabel]) -> Result<Self> {
        let mut out = self.clone();
        for l in template {
            out = out.to_rep(l.photon, l.rep)?;
        }
        Ok(out)
    }

    /// `psi(x) -> psi(x - d e_k)` in the coordinate's native representation.
    fn displace(&self, k: usize, d: f64) -> Self {
        let mut b = self.b.clone();
        for i in 0..self.dim() {
            b[i] += self.a[(i, k)] * d;
        }
        let c = self.c - self.a[(k, k)] * (0.5 * d * d) - self.b[k] * d;
        Self::from_parts(self.labels.clone(), self.a.clone(), b, c)
    }

    /// `psi(x) -> psi(x) exp(i s x_k)`.
    fn linear_phase(&self, k: usize, s: f64) -> Self {
        let mut b = self.b.clone();
        b[k] += C64::new(0.0, s);
        Self::from_parts(self.labels.clone(), self.a.clone(), b, self.c)
    }

    /// Delays the photon by `tau`. In frequency representation this is the
    /// factor `exp(i w tau)`.
    pub fn time_shift(&self, photon: usize, tau: f64) -> Result<Self> {
        let k = self.index_of(photon)?;
        Ok(match self.labels[k].rep {
            Rep::Time => self.displace(k, tau),
            Rep::Frequency => self.linear_phase(k, tau),
        })
    }

    /// Shifts the photon's frequency by `mu`. In time representation this is
    /// the factor `exp(-i mu t)`.
    pub fn freq_shift(&self, photon: usize, mu: f64) -> Result<Self> {
        let k = self.index_of(photon)?;
        Ok(match self.labels[k].rep {
            Rep::Frequency => self.displace(k, mu),
            Rep::Time => self.linear_phase(k, -mu),
        })
    }

    /// Point transformation `psi'(x) = psi(L^-1 x)` over all coordinates.
    pub fn linear_map(&self, l: &DMatrix<f64>) -> Result<Self> {
        let photons: Vec<usize> = self.labels.iter().map(|l| l.photon).collect();
        self.linear_map_on(&photons, l)
    }

    /// Point transformation acting on the listed photons only, in the listed
    /// order. All listed coordinates must share one representation and
    /// `|det L| = 1`.
    pub fn linear_map_on(&self, photons: &[usize], l: &DMatrix<f64>) -> Result<Self> {
        let m = photons.len();
        if l.nrows() != m || l.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "map is {}x{} for {} coordinates",
                l.nrows(),
                l.ncols(),
                m
            )));
        }
        let idx = photons
            .iter()
            .map(|&p| self.index_of(p))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = idx.first() {
            let rep = self.labels[*first].rep;
            if idx.iter().any(|&i| self.labels[i].rep != rep) {
                return Err(Error::MixedRepresentation);
            }
        }
        let lu = l.clone().lu();
        let det = lu.determinant();
        if (det.abs() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::NonUnimodular(det.abs()));
        }

        // Embed L into the identity over all coordinates.
        let n = self.dim();
        let mut full = DMatrix::<f64>::identity(n, n);
        for (r, &i) in idx.iter().enumerate() {
            for (s, &j) in idx.iter().enumerate() {
                full[(i, j)] = l[(r, s)];
            }
        }
        // A' = L^-T A L^-1 and b' = L^-T b, obtained by solving with L^T.
        let lt = full.transpose().map(|x| C64::new(x, 0.0)).lu();
        let x = lt
            .solve(&self.a)
            .ok_or(Error::NonUnimodular(det.abs()))?;
        let y = lt
            .solve(&x.transpose())
            .ok_or(Error::NonUnimodular(det.abs()))?;
        let a = y.transpose();
        let b = lt.solve(&self.b).ok_or(Error::NonUnimodular(det.abs()))?;
        Ok(Self::from_parts(self.labels.clone(), a, b, self.c))
    }

    /// Born-rule density of a joint measurement of every coordinate in its
    /// current representation.
    pub fn measurement_density(&self) -> Result<MeasurementDensity> {
        MeasurementDensity::from_state(self)
    }

    /// Draws one joint outcome, deterministic in `(seed, stream)`.
    pub fn sample(&self, seed: u64, stream: u64) -> Result<DVector<f64>> {
        let density = self.measurement_density()?;
        let mut rng = stream_rng(seed, StreamDomain::Measurement, stream);
        Ok(density.sample(&mut rng))
    }

    /// `<self|other>`; coordinates of `other` are Fourier-flipped to match
    /// this state's representations where they differ.
    pub fn overlap(&self, other: &GaussianAmplitude) -> Result<C64> {
        Ok(self.log_overlap(other)?.exp())
    }

    /// Principal logarithm of the overlap, continuous in the state parameters.
    pub fn log_overlap(&self, other: &GaussianAmplitude) -> Result<C64> {
        let other = self.harmonize(other)?;
        let n = self.dim();
        let m = self.a.map(|z| z.conj()) + &other.a;
        let h = self.b.map(|z| z.conj()) + &other.b;
        let ln_det = ln_det_complex_symmetric(&m)?;
        let y = m.clone().lu().solve(&h).ok_or(Error::NotPositiveDefinite)?;
        let quad: C64 = h.iter().zip(y.iter()).map(|(p, q)| p * q).sum();
        Ok(self.c.conj() + other.c + 0.5 * n as f64 * (2.0 * PI).ln() - ln_det * 0.5 + quad * 0.5)
    }

    /// Reorders and Fourier-flips `other` so its labels match this state's.
    fn harmonize(&self, other: &GaussianAmplitude) -> Result<GaussianAmplitude> {
        if self.dim() != other.dim() {
            return Err(Error::LabelMismatch);
        }
        let aligned = other.with_reps_of(&self.labels).map_err(|_| Error::LabelMismatch)?;
        let order = self
            .labels
            .iter()
            .map(|l| {
                let j = aligned.index_of(l.photon).map_err(|_| Error::LabelMismatch)?;
                if aligned.labels[j].role != l.role {
                    return Err(Error::LabelMismatch);
                }
                Ok(j)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(aligned.permuted(&order))
    }

    fn permuted(&self, order: &[usize]) -> Self {
        let n = order.len();
        let a = DMatrix::from_fn(n, n, |i, j| self.a[(order[i], order[j])]);
        let b = DVector::from_fn(n, |i, _| self.b[order[i]]);
        let labels = order.iter().map(|&i| self.labels[i]).collect();
        GaussianAmplitude { labels, a, b, c: self.c }
    }

    /// Tensor product; the coordinates of `other` follow those of `self`.
    pub fn tensor(&self, other: &GaussianAmplitude) -> Result<Self> {
        if let Some(l) = other.labels.iter().find(|l| self.index_of(l.photon).is_ok()) {
            return Err(Error::DuplicatePhoton(l.photon));
        }
        let (n, m) = (self.dim(), other.dim());
        let mut a = DMatrix::zeros(n + m, n + m);
        a.view_mut((0, 0), (n, n)).copy_from(&self.a);
        a.view_mut((n, n), (m, m)).copy_from(&other.a);
        let b = DVector::from_iterator(n + m, self.b.iter().chain(other.b.iter()).copied());
        let labels = self.labels.iter().chain(other.labels.iter()).copied().collect();
        Ok(Self::from_parts(labels, a, b, self.c + other.c))
    }

    /// Largest `|A_ij|` with `i` and `j` in different blocks of the partition.
    pub fn cross_coupling(&self, first: &[usize], second: &[usize]) -> Result<f64> {
        let mut seen = vec![false; self.dim()];
        let mut block = |photons: &[usize]| -> Result<Vec<usize>> {
            photons
                .iter()
                .map(|&p| {
                    let i = self.index_of(p).map_err(|_| Error::BadPartition)?;
                    if seen[i] {
                        return Err(Error::BadPartition);
                    }
                    seen[i] = true;
                    Ok(i)
                })
                .collect()
        };
        let x = block(first)?;
        let y = block(second)?;
        if seen.iter().any(|s| !s) {
            return Err(Error::BadPartition);
        }
        let mut worst = 0.0_f64;
        for &i in &x {
            for &j in &y {
                worst = worst.max(self.a[(i, j)].norm());
            }
        }
        Ok(worst)
    }

    /// Compares `(A, b, |e^c|)` after aligning `other` to this state's labels.
    pub fn compare_up_to_phase(&self, other: &GaussianAmplitude) -> Result<PhaseComparison> {
        let other = self.harmonize(other)?;
        let a_diff = (&self.a - &other.a).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let b_diff = (&self.b - &other.b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dc = other.c - self.c;
        Ok(PhaseComparison {
            a_diff,
            b_diff,
            modulus_diff: dc.re.abs(),
            phase: wrap_phase(dc.im),
        })
    }
}

/// Gaussian density `|psi(x)|^2` of a joint coordinate measurement.
#[derive(Debug, Clone)]
pub struct MeasurementDensity {
    pub labels: Vec<CoordLabel>,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Lower Cholesky factor of the precision matrix `2 Re(A)`.
    precision_factor: DMatrix<f64>,
}

impl MeasurementDensity {
    fn from_state(state: &GaussianAmplitude) -> Result<Self> {
        let re_a = re_part(&state.a);
        let precision = &re_a * 2.0;
        let chol = precision.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let re_b = state.b.map(|z| z.re * 2.0);
        let mean = chol.solve(&re_b);
        let mut covariance = chol.inverse();
        covariance = (&covariance + covariance.transpose()) * 0.5;
        Ok(MeasurementDensity {
            labels: state.labels.clone(),
            mean,
            covariance,
            precision_factor: chol.l(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self, index: usize) -> f64 {
        self.covariance[(index, index)].sqrt()
    }

    /// Mean and standard deviation of the linear functional `w . x`.
    pub fn linear_moments(&self, w: &DVector<f64>) -> (f64, f64) {
        let mean = w.dot(&self.mean);
        let var = w.dot(&(&self.covariance * w));
        (mean, var.max(0.0).sqrt())
    }

    /// `x = mean + L^-T z`, with `L L^T` the precision matrix.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let dx = self
            .precision_factor
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + dx
    }
}
