//! Density matrices and the entanglement metrics computed from them.
//!
//! Mixed-state *evolution* is out of scope; density matrices exist so that
//! fidelity, purity and concurrence of prepared states can be quoted against
//! known targets.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quantum::ket::Ket;
use crate::quantum::operator::{self, Operator};

const HERM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
    n_qubits: usize,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positive semidefiniteness.
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        let d = mat.nrows();
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(d));
        }
        let n_qubits = d.trailing_zeros() as usize;
        for r in 0..d {
            for c in 0..d {
                if (mat[(r, c)] - mat[(c, r)].conj()).norm() > HERM_TOL {
                    return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
                }
            }
        }
        let trace: C64 = (0..d).map(|i| mat[(i, i)]).sum();
        if (trace - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {} != 1",
                trace.re
            )));
        }
        let eig = mat.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -PSD_TOL) {
            return Err(Error::InvalidDensityMatrix(
                "negative eigenvalue beyond tolerance".into(),
            ));
        }
        Ok(DensityMatrix { mat, n_qubits })
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩` in the ket's current label order.
    pub fn from_ket(state: &Ket) -> Result<Self> {
        let psi = state.normalized()?;
        let d = psi.amps().len();
        let mut mat = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for (r, a) in psi.amps().iter().enumerate() {
            for (c, b) in psi.amps().iter().enumerate() {
                mat[(r, c)] = a * b.conj();
            }
        }
        Self::new(mat)
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let mat = DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        DensityMatrix { mat, n_qubits }
    }

    /// Convex mixture; weights must be nonnegative and sum to one.
    pub fn mix(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidDensityMatrix("empty mixture".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < -1e-15) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensityMatrix("weights must sum to 1".into()));
        }
        let d = parts[0].1.mat.nrows();
        let mut mat = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for (w, rho) in parts {
            if rho.mat.nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: rho.mat.nrows(),
                });
            }
            mat += &rho.mat * C64::new(*w, 0.0);
        }
        Self::new(mat)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        let sq = &self.mat * &self.mat;
        (0..sq.nrows()).map(|i| sq[(i, i)].re).sum()
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
    ///
    /// The squared convention makes the self-fidelity of a pure state 1 and
    /// reduces to `⟨ψ|σ|ψ⟩` when `ρ = |ψ⟩⟨ψ|`.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        if self.mat.nrows() != other.mat.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.mat.nrows(),
                actual: other.mat.nrows(),
            });
        }
        let root = sqrt_psd(&self.mat);
        let inner = &root * &other.mat * &root;
        let eig = inner.symmetric_eigen();
        let tr: f64 = sqrt_spectrum(eig.eigenvalues.as_slice()).iter().sum();
        Ok((tr * tr).clamp(0.0, 1.0))
    }

    /// Wootters concurrence of a 2-qubit state via the spin-flip spectrum.
    pub fn concurrence(&self) -> Result<f64> {
        if self.n_qubits != 2 {
            return Err(Error::ConcurrenceArity(self.n_qubits));
        }
        let yy = operator::sigma_y().tensor(&operator::sigma_y());
        let conj = self.mat.map(|c| c.conj());
        let rho_tilde = yy.matrix() * conj * yy.matrix();
        // Eigenvalues of ρ·ρ̃ equal those of the Hermitian √ρ ρ̃ √ρ.
        let root = sqrt_psd(&self.mat);
        let m = &root * rho_tilde * &root;
        let eig = m.symmetric_eigen();
        let mut lambdas = sqrt_spectrum(eig.eigenvalues.as_slice());
        lambdas.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
    }

    /// Hermitian eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.mat.clone().symmetric_eigen();
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v
    }

    /// `U ρ U†` for a square operator of matching dimension.
    pub fn evolved(&self, u: &Operator) -> Result<DensityMatrix> {
        if u.matrix().nrows() != self.mat.nrows() || u.matrix().ncols() != self.mat.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.mat.nrows(),
                actual: u.matrix().nrows(),
            });
        }
        Self::new(u.matrix() * &self.mat * u.matrix().adjoint())
    }
}

/// Square roots of a PSD spectrum with a relative rank cutoff: eigenvalues
/// below `λ_max · 1e-14` are numerical noise whose square roots would
/// otherwise contaminate spin-flip spectra at the 1e-7 level.
fn sqrt_spectrum(eigenvalues: &[f64]) -> Vec<f64> {
    let lmax = eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let cutoff = lmax * 1e-14;
    eigenvalues
        .iter()
        .map(|&l| if l > cutoff { l.sqrt() } else { 0.0 })
        .collect()
}

/// Principal square root of a PSD Hermitian matrix, clamping tiny negative
/// eigenvalues to zero.
fn sqrt_psd(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = m.clone().symmetric_eigen();
    let roots: Vec<C64> = sqrt_spectrum(eig.eigenvalues.as_slice())
        .into_iter()
        .map(|r| C64::new(r, 0.0))
        .collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn psi_minus() -> Ket {
        let s = 1.0 / 2f64.sqrt();
        Ket::new(
            &["a", "b"],
            vec![
                C64::new(0.0, 0.0),
                C64::new(s, 0.0),
                C64::new(-s, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap()
    }

    fn werner(p: f64) -> DensityMatrix {
        let pure = DensityMatrix::from_ket(&psi_minus()).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        DensityMatrix::mix(&[(1.0 - p, &pure), (p, &mixed)]).unwrap()
    }

    fn random_su2(rng: &mut ChaCha8Rng) -> Operator {
        // cos(t) I - i sin(t) (n · σ) for a random axis n.
        let t: f64 = rng.random::<f64>() * PI;
        let phi: f64 = rng.random::<f64>() * 2.0 * PI;
        let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let r = (1.0 - z * z).sqrt();
        let (nx, ny, nz) = (r * phi.cos(), r * phi.sin(), z);
        let (c, s) = (t.cos(), t.sin());
        Operator::from_rows(
            2,
            &[
                C64::new(c, -s * nz),
                C64::new(-s * ny, -s * nx),
                C64::new(s * ny, -s * nx),
                C64::new(c, s * nz),
            ],
        )
        .unwrap()
    }

    #[test]
    fn self_fidelity_is_one() {
        let rho = werner(0.13);
        assert_abs_diff_eq!(rho.fidelity(&rho).unwrap(), 1.0, epsilon = 1e-10);
        let pure = DensityMatrix::from_ket(&psi_minus()).unwrap();
        assert_abs_diff_eq!(pure.fidelity(&pure).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn purity_of_maximally_mixed_two_qubits() {
        assert_abs_diff_eq!(
            DensityMatrix::maximally_mixed(2).purity(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn concurrence_of_singlet_is_one() {
        let rho = DensityMatrix::from_ket(&psi_minus()).unwrap();
        assert_abs_diff_eq!(rho.concurrence().unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn concurrence_rejects_wrong_register() {
        let rho = DensityMatrix::maximally_mixed(1);
        assert!(matches!(
            rho.concurrence(),
            Err(Error::ConcurrenceArity(1))
        ));
    }

    #[test]
    fn fidelity_pure_times_mixed_matches_direct_overlap() {
        // Independent route for the squared convention: ⟨ψ|ρ|ψ⟩.
        let p = 0.2;
        let rho = werner(p);
        let pure = DensityMatrix::from_ket(&psi_minus()).unwrap();
        let uhlmann = pure.fidelity(&rho).unwrap();
        let direct = 1.0 - 3.0 * p / 4.0;
        assert_abs_diff_eq!(uhlmann, direct, epsilon = 1e-10);
        // And the reverse argument order.
        assert_abs_diff_eq!(rho.fidelity(&pure).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn werner_concurrence_matches_closed_form_at_quoted_fidelity() {
        // p fixed by a source fidelity of 0.9879; concurrence must equal 1 - 3p/2.
        let p = 4.0 * (1.0 - 0.9879) / 3.0;
        let rho = werner(p);
        let pure = DensityMatrix::from_ket(&psi_minus()).unwrap();
        assert_abs_diff_eq!(pure.fidelity(&rho).unwrap(), 0.9879, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rho.concurrence().unwrap(),
            1.0 - 1.5 * p,
            epsilon = 1e-10
        );
    }

    #[test]
    fn concurrence_invariant_under_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = werner(0.08);
        let base = rho.concurrence().unwrap();
        for _ in 0..25 {
            let u = random_su2(&mut rng).tensor(&random_su2(&mut rng));
            let moved = rho.evolved(&u).unwrap();
            assert!((moved.concurrence().unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn metrics_invariant_under_relabeling() {
        let psi = psi_minus();
        let swapped = psi.reordered(&["b", "a"]).unwrap();
        let r1 = DensityMatrix::from_ket(&psi).unwrap();
        let r2 = DensityMatrix::from_ket(&swapped).unwrap();
        assert_abs_diff_eq!(r1.purity(), r2.purity(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            r1.concurrence().unwrap(),
            r2.concurrence().unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn metric_ranges_on_werner_family() {
        for &p in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            let rho = werner(p);
            let purity = rho.purity();
            assert!((0.25..=1.0 + 1e-12).contains(&purity));
            let c = rho.concurrence().unwrap();
            assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn rejects_non_psd_matrix() {
        let mut m = DMatrix::from_element(2, 2, C64::new(0.0, 0.0));
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(Error::InvalidDensityMatrix(_))
        ));
    }
}
