//! Closeness measures between reconstructed and reference states.
//!
//! Distributions use the squared Bhattacharyya coefficient
//! `F = (sum_n sqrt(P_n Q_n))^2`; density matrices use the Uhlmann fidelity
//! `F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::{from_usize, Real};
use crate::state::{DensityMatrix, HermitianMatrix, PhononDistribution};

/// Squared Bhattacharyya coefficient. Negative entries are clipped to zero
/// before use; unnormalized inputs may give values slightly above one.
pub fn fidelity_distribution<T: Real>(
    p: &PhononDistribution<T>,
    q: &PhononDistribution<T>,
) -> Result<T> {
    if p.len() != q.len() {
        return Err(invalid(format!(
            "distribution lengths differ ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    let overlap = p
        .values()
        .iter()
        .zip(q.values())
        .fold(T::zero(), |acc, (&a, &b)| {
            acc + (a.max(T::zero()) * b.max(T::zero())).sqrt()
        });
    Ok(overlap * overlap)
}

/// Like [`fidelity_distribution`] but zero-pads the shorter argument.
pub fn fidelity_distribution_padded<T: Real>(
    p: &PhononDistribution<T>,
    q: &PhononDistribution<T>,
) -> T {
    let dim = p.len().max(q.len());
    fidelity_distribution(&p.resized(dim), &q.resized(dim)).expect("equal lengths after padding")
}

/// Eigenvalues at round-off level relative to the largest are zeroed so their
/// square roots do not leak into the trace.
fn clip_roundoff<T: Real>(eigenvalues: &[T]) -> Vec<T> {
    let scale = eigenvalues.iter().fold(T::zero(), |acc, &e| acc.max(e.abs()));
    let floor = scale * T::default_epsilon() * from_usize::<T>(16 * eigenvalues.len().max(1));
    eigenvalues
        .iter()
        .map(|&e| if e <= floor { T::zero() } else { e })
        .collect()
}

fn psd_sqrt<T: Real>(h: &HermitianMatrix<T>) -> DMatrix<Complex<T>> {
    let eig = h.eigen();
    let v = &eig.eigenvectors;
    let raw: Vec<T> = eig.eigenvalues.iter().copied().collect();
    let roots: Vec<T> = clip_roundoff(&raw).into_iter().map(|e| e.sqrt()).collect();
    let dim = v.nrows();
    DMatrix::from_fn(dim, dim, |i, j| {
        roots
            .iter()
            .enumerate()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (k, &r)| {
                acc + v[(i, k)] * v[(j, k)].conj() * r
            })
    })
}

/// Uhlmann fidelity. Both arguments are replaced by their Hermitian parts
/// first so reconstruction outputs with small anti-Hermitian residue are
/// accepted.
pub fn fidelity_density<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    let (a, b) = (rho.elements(), sigma.elements());
    if !a.is_square() || !b.is_square() {
        return Err(invalid("fidelity of non-square matrices"));
    }
    if a.nrows() != b.nrows() {
        return Err(invalid(format!(
            "density matrix dimensions differ ({} vs {})",
            a.nrows(),
            b.nrows()
        )));
    }
    let root = psd_sqrt(&rho.hermitian_part());
    let sigma_h = sigma.hermitian_part();
    let inner = &root * sigma_h.matrix() * &root;
    let inner = DensityMatrix::unchecked(inner).hermitian_part();
    let trace = clip_roundoff(&inner.eigenvalues())
        .into_iter()
        .fold(T::zero(), |acc, e| acc + e.sqrt());
    Ok(trace * trace)
}

/// Uhlmann fidelity after zero-padding both matrices to a common dimension.
pub fn fidelity_density_padded<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> T {
    let dim = rho.dim().max(sigma.dim());
    fidelity_density(&rho.resized(dim), &sigma.resized(dim)).expect("square, equal dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identical_normalized_distributions() {
        let p = PhononDistribution::<f64>::maximally_mixed(3, 5).unwrap();
        assert_relative_eq!(fidelity_distribution(&p, &p).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_support_is_zero() {
        let p = PhononDistribution::unchecked(vec![0.5, 0.5, 0.0, 0.0]);
        let q = PhononDistribution::unchecked(vec![0.0, 0.0, 0.3, 0.7]);
        assert_eq!(fidelity_distribution(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let p = PhononDistribution::unchecked(vec![1.0]);
        let q = PhononDistribution::unchecked(vec![1.0, 0.0]);
        assert!(fidelity_distribution(&p, &q).is_err());
        assert_relative_eq!(fidelity_distribution_padded(&p, &q), 1.0);
    }

    #[test]
    fn printed_reconstruction_against_thermal_reference() {
        let reconstructed = PhononDistribution::unchecked(vec![
            0.50106, 0.24944, 0.12506, 0.06358, 0.03105, 0.01592, 0.00566, 0.00766,
        ]);
        let exact = PhononDistribution::<f64>::thermal(1.0, 8).unwrap();
        let f = fidelity_distribution(&reconstructed, &exact).unwrap();
        assert!((f - 0.995).abs() <= 1e-3, "{f}");
    }

    #[test]
    fn negative_entries_are_clipped() {
        let p = PhononDistribution::unchecked(vec![1.0, -0.2]);
        let q = PhononDistribution::unchecked(vec![0.5, 0.5]);
        assert_relative_eq!(fidelity_distribution(&p, &q).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn uhlmann_basic_cases() {
        let zero = DensityMatrix::<f64>::fock(0, 2).unwrap();
        let one = DensityMatrix::fock(1, 2).unwrap();
        assert!(fidelity_density(&zero, &one).unwrap().abs() < 1e-14);
        assert_relative_eq!(fidelity_density(&zero, &zero).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = PhononDistribution::<f64>::thermal(0.7, 6).unwrap().to_density();
        let f = fidelity_density(&mixed, &mixed).unwrap();
        // unnormalized truncation: F(rho, rho) = (Tr rho)^2
        assert_relative_eq!(f, mixed.trace().re.powi(2), epsilon = 1e-10);
    }

    #[test]
    fn pure_state_reduces_to_expectation() {
        let psi = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)];
        let rho = DensityMatrix::superposed_fock(&psi).unwrap();
        let sigma = PhononDistribution::unchecked(vec![0.5, 0.3, 0.2]).to_density();
        // <psi|sigma|psi> = (0.5 + 0.3 + 0.2) / 3
        let f = fidelity_density(&rho, &sigma).unwrap();
        assert_relative_eq!(f, 1.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn non_square_rejected() {
        let rect = DensityMatrix::unchecked(DMatrix::from_element(2, 3, c(0.0, 0.0)));
        let sq = DensityMatrix::<f64>::fock(0, 2).unwrap();
        assert!(fidelity_density(&rect, &sq).is_err());
    }

    proptest! {
        #[test]
        fn distribution_fidelity_symmetric(raw in proptest::collection::vec(0.0f64..1.0, 6),
                                           raw2 in proptest::collection::vec(0.0f64..1.0, 6)) {
            let s1: f64 = raw.iter().sum::<f64>().max(1e-9);
            let s2: f64 = raw2.iter().sum::<f64>().max(1e-9);
            let p = PhononDistribution::unchecked(raw.iter().map(|x| x / s1).collect());
            let q = PhononDistribution::unchecked(raw2.iter().map(|x| x / s2).collect());
            let f1 = fidelity_distribution(&p, &q).unwrap();
            let f2 = fidelity_distribution(&q, &p).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-15);
            prop_assert!(f1 <= 1.0 + 1e-12);
            let same = fidelity_distribution(&p, &p).unwrap();
            prop_assert!((same - 1.0).abs() < 1e-12);
            if p.l1_distance(&q) > 1e-3 {
                prop_assert!(f1 < 1.0 - 1e-12);
            }
        }
    }
}
