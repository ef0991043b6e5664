//! Mechanical states in the truncated number basis.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{cabs, from_usize, lit, tol_floor, Real};

/// Phonon number `n` labelling `|n>`.
pub type FockIndex = usize;

/// Numerical slack allowed on probabilities, traces and eigenvalues of input
/// states.
pub const STATE_TOLERANCE: f64 = 1e-9;

/// Phonon-number distribution `P_n` over `n = 0..len`.
///
/// Input distributions are validated (non-negative, total at most one).
/// Reconstruction outputs are built with [`PhononDistribution::unchecked`] and
/// may carry small negative entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhononDistribution<T>(Vec<T>);

impl<T: Real> PhononDistribution<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty phonon distribution"));
        }
        let eps: T = tol_floor(STATE_TOLERANCE);
        let mut total = T::zero();
        for (n, &p) in values.iter().enumerate() {
            if !p.is_finite() {
                return Err(invalid(format!("P[{n}] is not finite")));
            }
            if p < -eps {
                return Err(invalid(format!("P[{n}] = {p:e} is negative")));
            }
            total += p;
        }
        if total > T::one() + eps {
            return Err(invalid(format!("distribution sums to {total:e} > 1")));
        }
        Ok(Self(values))
    }

    pub fn unchecked(values: Vec<T>) -> Self {
        Self(values)
    }

    /// Truncated thermal distribution `nbar^n / (nbar + 1)^(n + 1)`, not
    /// renormalized after truncation.
    pub fn thermal(mean_occupation: T, dim: usize) -> Result<Self> {
        if !(mean_occupation >= T::zero()) || !mean_occupation.is_finite() {
            return Err(invalid("thermal occupation must be finite and >= 0"));
        }
        if dim == 0 {
            return Err(invalid("thermal distribution needs dimension >= 1"));
        }
        let ratio = mean_occupation / (mean_occupation + T::one());
        let mut p = T::one() / (mean_occupation + T::one());
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(p);
            p *= ratio;
        }
        Ok(Self(values))
    }

    /// Uniform distribution over the lowest `support` number states, padded
    /// with zeros to `dim`.
    pub fn maximally_mixed(support: usize, dim: usize) -> Result<Self> {
        if support == 0 || dim < support {
            return Err(invalid(format!(
                "maximally mixed state needs 1 <= support ({support}) <= dim ({dim})"
            )));
        }
        let p = T::one() / from_usize(support);
        let mut values = vec![T::zero(); dim];
        values[..support].iter_mut().for_each(|v| *v = p);
        Ok(Self(values))
    }

    pub fn fock(n: FockIndex, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(invalid(format!("Fock index {n} outside dimension {dim}")));
        }
        let mut values = vec![T::zero(); dim];
        values[n] = T::one();
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_values(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, &p| acc + p)
    }

    /// Copy zero-padded (or truncated) to `dim` entries.
    pub fn resized(&self, dim: usize) -> Self {
        let mut values = self.0.clone();
        values.resize(dim, T::zero());
        Self(values)
    }

    /// Sum of absolute entry differences, zero-padding the shorter vector.
    pub fn l1_distance(&self, other: &Self) -> T {
        let dim = self.len().max(other.len());
        (0..dim).fold(T::zero(), |acc, n| {
            let a = self.0.get(n).copied().unwrap_or_else(T::zero);
            let b = other.0.get(n).copied().unwrap_or_else(T::zero);
            acc + (a - b).abs()
        })
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        let dim = self.len();
        DensityMatrix(DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex::new(self.0[i], T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        }))
    }
}

/// Density matrix `rho[m, n] = <m| rho |n>` in the truncated number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real>(DMatrix<Complex<T>>);

impl<T: Real> DensityMatrix<T> {
    /// Validates an input state: square, Hermitian, trace at most one and
    /// positive semidefinite, each to [`STATE_TOLERANCE`].
    pub fn new(elements: DMatrix<Complex<T>>) -> Result<Self> {
        if !elements.is_square() || elements.nrows() == 0 {
            return Err(invalid(format!(
                "density matrix must be square and non-empty, got {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        let eps: T = tol_floor(STATE_TOLERANCE);
        let rho = Self(elements);
        let herm = rho.hermiticity_deviation();
        if herm > eps {
            return Err(invalid(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let trace = rho.trace();
        if trace.re > T::one() + eps {
            return Err(invalid(format!("density matrix trace {:e} exceeds 1", trace.re)));
        }
        let min_eig = rho
            .hermitian_part()
            .eigenvalues()
            .iter()
            .fold(T::max_value().unwrap(), |acc, &e| acc.min(e));
        if min_eig < -eps {
            return Err(invalid(format!(
                "density matrix not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(rho)
    }

    pub fn unchecked(elements: DMatrix<Complex<T>>) -> Self {
        Self(elements)
    }

    /// Pure state `|psi><psi|` for the normalized coefficient vector.
    pub fn superposed_fock(coefficients: &[Complex<T>]) -> Result<Self> {
        let norm2 = coefficients
            .iter()
            .fold(T::zero(), |acc, c| acc + c.norm_sqr());
        if coefficients.is_empty() || norm2 == T::zero() || !norm2.is_finite() {
            return Err(invalid("superposition coefficients must be nonzero and finite"));
        }
        let scale = T::one() / norm2.sqrt();
        let psi: Vec<Complex<T>> = coefficients.iter().map(|c| c * scale).collect();
        let dim = psi.len();
        Ok(Self(DMatrix::from_fn(dim, dim, |m, n| psi[m] * psi[n].conj())))
    }

    pub fn fock(n: FockIndex, dim: usize) -> Result<Self> {
        Ok(PhononDistribution::fock(n, dim)?.to_density())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn elements(&self) -> &DMatrix<Complex<T>> {
        &self.0
    }

    pub fn into_elements(self) -> DMatrix<Complex<T>> {
        self.0
    }

    pub fn get(&self, m: usize, n: usize) -> Complex<T> {
        self.0[(m, n)]
    }

    pub fn trace(&self) -> Complex<T> {
        self.0.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b)
    }

    /// `max |rho - rho^dag|` over all entries.
    pub fn hermiticity_deviation(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(cabs(self.0[(i, j)] - self.0[(j, i)].conj()));
            }
        }
        worst
    }

    /// `(rho + rho^dag) / 2`.
    pub fn hermitian_part(&self) -> HermitianMatrix<T> {
        let half: T = lit(0.5);
        let adj = self.0.adjoint();
        HermitianMatrix((&self.0 + adj).map(|z| z * half))
    }

    pub fn diagonal(&self) -> PhononDistribution<T> {
        PhononDistribution::unchecked(self.0.diagonal().iter().map(|z| z.re).collect())
    }

    pub fn resized(&self, dim: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self(DMatrix::from_fn(dim, dim, |i, j| {
            if i < self.dim() && j < self.dim() {
                self.0[(i, j)]
            } else {
                zero
            }
        }))
    }

    /// Nearest physical state: Hermitian part, negative eigenvalues clipped,
    /// trace renormalized to one.
    pub fn project_to_physical(&self) -> Result<Self> {
        let eig = self.hermitian_part().eigen();
        let clipped: Vec<T> = eig.eigenvalues.iter().map(|&e| e.max(T::zero())).collect();
        let total = clipped.iter().fold(T::zero(), |a, &b| a + b);
        if total == T::zero() {
            return Err(invalid("projection of a state with no positive weight"));
        }
        let v = &eig.eigenvectors;
        let dim = self.dim();
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            clipped.iter().enumerate().fold(Complex::new(T::zero(), T::zero()), |acc, (k, &w)| {
                acc + v[(i, k)] * v[(j, k)].conj() * (w / total)
            })
        });
        Ok(Self(m))
    }
}

/// Matrix known to be Hermitian by construction.
#[derive(Clone, Debug)]
pub struct HermitianMatrix<T: Real>(pub(crate) DMatrix<Complex<T>>);

impl<T: Real> HermitianMatrix<T> {
    pub fn eigen(&self) -> SymmetricEigen<Complex<T>, nalgebra::Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.0.clone().symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.0
    }
}

/// Initial mechanical state: diagonal in the number basis or general.
#[derive(Clone, Debug)]
pub enum MechanicalState<T: Real> {
    Diagonal(PhononDistribution<T>),
    General(DensityMatrix<T>),
}

impl<T: Real> MechanicalState<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(p) => p.len(),
            Self::General(rho) => rho.dim(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        match self {
            Self::Diagonal(p) => p.to_density(),
            Self::General(rho) => rho.clone(),
        }
    }
}

impl<T: Real> From<PhononDistribution<T>> for MechanicalState<T> {
    fn from(p: PhononDistribution<T>) -> Self {
        Self::Diagonal(p)
    }
}

impl<T: Real> From<DensityMatrix<T>> for MechanicalState<T> {
    fn from(rho: DensityMatrix<T>) -> Self {
        Self::General(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn thermal_matches_geometric_reference() {
        let p = PhononDistribution::thermal(1.0, 8).unwrap();
        let expected = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];
        assert_eq!(p.values(), &expected);
        let total = p.total();
        assert_relative_eq!(total, 1.0 - 0.5f64.powi(8), epsilon = 1e-15);
    }

    #[test]
    fn thermal_zero_temperature_is_ground_state() {
        let p = PhononDistribution::thermal(0.0, 5).unwrap();
        assert_eq!(p.values(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn thermal_is_log_linear() {
        for &nbar in &[0.2, 0.9, 1.0, 3.0] {
            let p = PhononDistribution::<f64>::thermal(nbar, 30).unwrap();
            let step = (nbar / (nbar + 1.0)).ln();
            for w in p.values().windows(2) {
                assert_relative_eq!((w[1] / w[0]).ln(), step, epsilon = 1e-12);
                if nbar < 1.0 {
                    assert!(w[1] < w[0]);
                }
            }
        }
    }

    #[test]
    fn maximally_mixed_shapes() {
        let p = PhononDistribution::<f64>::maximally_mixed(5, 8).unwrap();
        assert_eq!(p.values(), &[0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0, 0.0]);
        assert_relative_eq!(p.total(), 1.0, epsilon = 1e-15);
        let g = PhononDistribution::<f64>::maximally_mixed(1, 4).unwrap();
        assert_eq!(g, PhononDistribution::fock(0, 4).unwrap());
        assert!(PhononDistribution::<f64>::maximally_mixed(5, 4).is_err());
        assert!(PhononDistribution::<f64>::maximally_mixed(0, 4).is_err());
    }

    #[test]
    fn input_distribution_validation() {
        assert!(PhononDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(PhononDistribution::new(vec![0.5, -0.1]).is_err());
        assert!(PhononDistribution::new(vec![f64::NAN]).is_err());
        assert!(PhononDistribution::new(vec![0.5, 0.5]).is_ok());
        // reconstruction outputs may be slightly negative
        let out = PhononDistribution::unchecked(vec![1.01, -0.01]);
        assert_eq!(out.values()[1], -0.01);
    }

    #[test]
    fn superposition_density_matrix() {
        let rho = DensityMatrix::superposed_fock(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]).unwrap();
        let third = 1.0 / 3.0;
        let expected = [
            [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0)],
            [c(0.0, 1.0), c(1.0, 0.0), c(0.0, -1.0)],
            [c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)],
        ];
        for m in 0..3 {
            for n in 0..3 {
                let d = rho.get(m, n) - expected[m][n] * third;
                assert!(d.norm() < 1e-15);
            }
        }
        let single = DensityMatrix::superposed_fock(&[c(1.0, 0.0)]).unwrap();
        assert_eq!(single.get(0, 0), c(1.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::superposed_fock(&[c(s, 0.0), c(s, 0.0)]).unwrap();
        for z in plus.elements().iter() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        assert!(DensityMatrix::<f64>::superposed_fock(&[c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn density_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.6, 0.0), c(0.6, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(neg).is_err());
        let over = DMatrix::from_row_slice(1, 1, &[c(1.5, 0.0)]);
        assert!(DensityMatrix::new(over).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(ok).is_ok());
    }

    #[test]
    fn projection_restores_physicality() {
        let raw = DMatrix::from_row_slice(2, 2, &[c(1.1, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)]);
        let rho = DensityMatrix::unchecked(raw).project_to_physical().unwrap();
        assert!((rho.get(0, 0) - c(1.0, 0.0)).norm() < 1e-14);
        assert!(rho.get(1, 1).norm() < 1e-14);
    }

    #[test]
    fn l1_distance_pads_shorter() {
        let a = PhononDistribution::unchecked(vec![0.5, 0.5]);
        let b = PhononDistribution::unchecked(vec![0.5, 0.25, 0.25]);
        assert_relative_eq!(a.l1_distance(&b), 0.5);
    }
}
