//! Long-time single-photon emission amplitudes in the Wigner-Weisskopf limit
//! and the spectra they generate.
//!
//! For a photon initially in the cavity and the mirror in `|n0>`, the
//! amplitude to find the mirror in `|l>` and the photon in mode `Delta` is
//!
//! `B_{n0,l}(Delta) = sum_{n < n_d} xi_c <l|n~><n~|n0> / (Delta + delta - (n - l) + i gamma_c / 2)`
//!
//! up to a global phase that cancels in every product used here. The overlap
//! kernel `Lambda_{n,m}(Delta) = sum_l conj(B_{n,l}) B_{m,l}` maps a mechanical
//! density matrix onto its spectrum `S = sum_{m,n} rho_{m,n} Lambda_{n,m}`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::params::SystemParams;
use crate::scalar::{cabs, from_usize, lit, to_f64, Real};
use crate::special::franck_condon_table;
use crate::spectrum::Spectrum;
use crate::state::{DensityMatrix, MechanicalState, PhononDistribution};

/// Relative size of the imaginary part tolerated in a synthesized spectrum.
pub const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-10;

/// Anything that can supply the overlap kernel at a detuning: the closed-form
/// model, or a time-domain simulation sampled on its own grid.
pub trait LambdaSource<T: Real> {
    /// `Lambda[(n, m)] = Lambda_{n,m}(detuning)` for `n, m < dim`.
    fn lambda_matrix(&self, dim: usize, detuning: T) -> Result<DMatrix<Complex<T>>>;

    /// `Lambda_{n,n}(detuning)` for `n < dim`.
    fn lambda_diagonal(&self, dim: usize, detuning: T) -> Result<Vec<T>> {
        let lam = self.lambda_matrix(dim, detuning)?;
        Ok((0..dim).map(|n| lam[(n, n)].re).collect())
    }

    /// Short human-readable tag recorded in result provenance.
    fn engine(&self) -> String;
}

/// Closed-form emission model with its Franck-Condon tables precomputed.
#[derive(Clone, Debug)]
pub struct EmissionModel<T: Real> {
    params: SystemParams<T>,
    n_d: usize,
    // fc_out[(l, n)] = <l|n~>, fc_in[(n, n0)] = <n~|n0>
    fc_out: DMatrix<T>,
    fc_in: DMatrix<T>,
}

impl<T: Real> EmissionModel<T> {
    /// `n_d` is the summation dimension shared by the eigenstate sum inside
    /// each amplitude and the trace over final phonon numbers.
    pub fn new(params: SystemParams<T>, n_d: usize) -> Result<Self> {
        if n_d == 0 {
            return Err(invalid("summation dimension n_d must be >= 1"));
        }
        let beta = params.beta0();
        Ok(Self {
            params,
            n_d,
            fc_out: franck_condon_table(n_d, beta),
            fc_in: franck_condon_table(n_d, -beta),
        })
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    // 1 / (Delta + delta - k + i gamma/2) indexed by k + n_d - 1, k = n - l
    fn resolvents(&self, detuning: T) -> Vec<Complex<T>> {
        let base = detuning + self.params.delta();
        let half_width = self.params.gamma_c() * lit(0.5);
        let offset = self.n_d as isize - 1;
        (-offset..=offset)
            .map(|k| {
                let re = base - lit::<T>(k as f64);
                let den = re * re + half_width * half_width;
                Complex::new(re / den, -half_width / den)
            })
            .collect()
    }

    /// `B_{n0,l}(detuning)` for `n0, l < n_d`.
    pub fn amplitude(&self, n0: usize, l: usize, detuning: T) -> Complex<T> {
        assert!(n0 < self.n_d && l < self.n_d, "indices must be below n_d");
        let res = self.resolvents(detuning);
        self.amplitude_with(&res, n0, l)
    }

    fn amplitude_with(&self, res: &[Complex<T>], n0: usize, l: usize) -> Complex<T> {
        let offset = self.n_d - 1;
        let mut acc = Complex::new(T::zero(), T::zero());
        for n in 0..self.n_d {
            let w = self.fc_out[(l, n)] * self.fc_in[(n, n0)];
            acc += res[n + offset - l] * w;
        }
        acc * self.params.continuum_coupling()
    }

    /// Amplitude table `A[(n0, l)] = B_{n0,l}(detuning)` for `n0 < dim`,
    /// `l < n_d`.
    pub fn amplitudes(&self, dim: usize, detuning: T) -> Result<DMatrix<Complex<T>>> {
        self.check_dim(dim)?;
        let res = self.resolvents(detuning);
        Ok(DMatrix::from_fn(dim, self.n_d, |n0, l| {
            self.amplitude_with(&res, n0, l)
        }))
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim > self.n_d {
            return Err(invalid(format!(
                "state dimension {dim} exceeds summation dimension n_d = {}",
                self.n_d
            )));
        }
        Ok(())
    }

    /// `Lambda_{n,m}(detuning)` summed over `l < n_d`.
    pub fn lambda_element(&self, n: usize, m: usize, detuning: T) -> Complex<T> {
        let res = self.resolvents(detuning);
        let mut acc = Complex::new(T::zero(), T::zero());
        if n == m {
            let mut sum = T::zero();
            for l in 0..self.n_d {
                sum += self.amplitude_with(&res, n, l).norm_sqr();
            }
            acc.re = sum;
            return acc;
        }
        for l in 0..self.n_d {
            acc += self.amplitude_with(&res, n, l).conj() * self.amplitude_with(&res, m, l);
        }
        acc
    }

    /// Emission spectrum of the Fock state `|n>` on `grid`.
    pub fn spectrum_fock(&self, n: usize, grid: &[T]) -> Result<Spectrum<T>> {
        self.check_dim(n + 1)?;
        let values = grid
            .iter()
            .map(|&d| self.lambda_element(n, n, d).re)
            .collect();
        Spectrum::new(grid.to_vec(), values)
    }

    /// Emission spectrum of an arbitrary mechanical state on `grid`.
    pub fn spectrum(&self, state: &MechanicalState<T>, grid: &[T]) -> Result<Spectrum<T>> {
        let values = match state {
            MechanicalState::Diagonal(p) => self.diagonal_values(p, grid)?,
            MechanicalState::General(rho) => self.general_values(rho, grid)?,
        };
        Spectrum::new(grid.to_vec(), values)
    }

    fn diagonal_values(&self, p: &PhononDistribution<T>, grid: &[T]) -> Result<Vec<T>> {
        let dim = p.len();
        grid.iter()
            .map(|&d| {
                let diag = self.lambda_diagonal(dim, d)?;
                Ok(diag
                    .iter()
                    .zip(p.values())
                    .fold(T::zero(), |acc, (&lam, &w)| acc + lam * w))
            })
            .collect()
    }

    fn general_values(&self, rho: &DensityMatrix<T>, grid: &[T]) -> Result<Vec<T>> {
        let dim = rho.dim();
        grid.iter()
            .map(|&d| {
                let lam = self.lambda_matrix(dim, d)?;
                real_spectrum_value(rho, &lam, d)
            })
            .collect()
    }
}

/// `sum_{m,n} rho_{m,n} Lambda_{n,m}`, rejecting a non-negligible imaginary
/// part.
pub(crate) fn real_spectrum_value<T: Real>(
    rho: &DensityMatrix<T>,
    lam: &DMatrix<Complex<T>>,
    detuning: T,
) -> Result<T> {
    let dim = rho.dim();
    let mut total = Complex::new(T::zero(), T::zero());
    let mut scale = T::zero();
    for m in 0..dim {
        for n in 0..dim {
            let term = rho.get(m, n) * lam[(n, m)];
            scale += cabs(term);
            total += term;
        }
    }
    let allowed = scale * lit::<T>(IMAGINARY_RESIDUE_TOLERANCE);
    if total.im.abs() > allowed {
        return Err(Error::InternalConsistency(format!(
            "spectrum at detuning {:e} has imaginary part {:e} (scale {:e}); \
             the density matrix is not Hermitian",
            to_f64(detuning),
            to_f64(total.im),
            to_f64(scale)
        )));
    }
    Ok(total.re)
}

impl<T: Real> LambdaSource<T> for EmissionModel<T> {
    fn lambda_matrix(&self, dim: usize, detuning: T) -> Result<DMatrix<Complex<T>>> {
        let amp = self.amplitudes(dim, detuning)?;
        let mut lam = DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero()));
        for n in 0..dim {
            let mut diag = T::zero();
            for l in 0..self.n_d {
                diag += amp[(n, l)].norm_sqr();
            }
            lam[(n, n)] = Complex::new(diag, T::zero());
            for m in (n + 1)..dim {
                let mut acc = Complex::new(T::zero(), T::zero());
                for l in 0..self.n_d {
                    acc += amp[(n, l)].conj() * amp[(m, l)];
                }
                lam[(n, m)] = acc;
                lam[(m, n)] = acc.conj();
            }
        }
        Ok(lam)
    }

    fn lambda_diagonal(&self, dim: usize, detuning: T) -> Result<Vec<T>> {
        let amp = self.amplitudes(dim, detuning)?;
        Ok((0..dim)
            .map(|n| {
                (0..self.n_d).fold(T::zero(), |acc, l| acc + amp[(n, l)].norm_sqr())
            })
            .collect())
    }

    fn engine(&self) -> String {
        format!("analytic(n_d={})", self.n_d)
    }
}

/// `B_{n0,l}(detuning)` with summation dimension `n_d`.
pub fn emission_amplitude<T: Real>(
    n0: usize,
    l: usize,
    detuning: T,
    params: &SystemParams<T>,
    n_d: usize,
) -> Result<Complex<T>> {
    if n0 >= n_d || l >= n_d {
        return Err(invalid(format!("indices ({n0}, {l}) must be below n_d = {n_d}")));
    }
    Ok(EmissionModel::new(*params, n_d)?.amplitude(n0, l, detuning))
}

/// `Lambda_{n,m}(detuning)` with the final-state trace running over `l < n_d`.
pub fn lambda_element<T: Real>(
    n: usize,
    m: usize,
    detuning: T,
    params: &SystemParams<T>,
    n_d: usize,
) -> Result<Complex<T>> {
    if n >= n_d || m >= n_d {
        return Err(invalid(format!("indices ({n}, {m}) must be below n_d = {n_d}")));
    }
    Ok(EmissionModel::new(*params, n_d)?.lambda_element(n, m, detuning))
}

pub fn spectrum_fock<T: Real>(
    n: usize,
    grid: &[T],
    params: &SystemParams<T>,
    n_d: usize,
) -> Result<Spectrum<T>> {
    EmissionModel::new(*params, n_d)?.spectrum_fock(n, grid)
}

pub fn spectrum_emission<T: Real>(
    state: &MechanicalState<T>,
    grid: &[T],
    params: &SystemParams<T>,
    n_d: usize,
) -> Result<Spectrum<T>> {
    EmissionModel::new(*params, n_d)?.spectrum(state, grid)
}

/// Zero-coupling line shape `gamma / (2 pi) / (Delta^2 + gamma^2 / 4)`.
pub fn cavity_lorentzian<T: Real>(gamma_c: T, detuning: T) -> T {
    let half = gamma_c * lit(0.5);
    gamma_c / (lit::<T>(2.0) * T::pi()) / (detuning * detuning + half * half)
}

/// Uniform grid of `points` detunings over `[low, high]`.
pub fn uniform_grid<T: Real>(low: T, high: T, points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![low],
        _ => {
            let step = (high - low) / from_usize::<T>(points - 1);
            (0..points).map(|i| low + step * from_usize::<T>(i)).collect()
        }
    }
}
