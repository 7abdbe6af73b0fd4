//! Linear operators on labelled qubit registers.
//!
//! An [`Operator`] is a dense complex matrix mapping `2^k` input amplitudes
//! to `2^m` output amplitudes. Most gates are square unitaries; the type-I
//! fusion gate is a genuine 2-to-1 Kraus operator, which is why input and
//! output arity are tracked separately.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quantum::ket::Ket;

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
    in_qubits: usize,
    out_qubits: usize,
}

fn log2_exact(d: usize) -> Result<usize> {
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    Ok(d.trailing_zeros() as usize)
}

impl Operator {
    /// Wraps a matrix whose dimensions must both be powers of two.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        let out_qubits = log2_exact(mat.nrows())?;
        let in_qubits = log2_exact(mat.ncols())?;
        Ok(Operator {
            mat,
            in_qubits,
            out_qubits,
        })
    }

    /// Square operator from row-major scalars; dimension must be a power of two.
    pub fn from_rows(dim: usize, rows: &[C64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: rows.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn identity(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Operator {
            mat: DMatrix::identity(d, d),
            in_qubits: n_qubits,
            out_qubits: n_qubits,
        }
    }

    pub fn input_qubits(&self) -> usize {
        self.in_qubits
    }

    pub fn output_qubits(&self) -> usize {
        self.out_qubits
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    /// Kronecker product; arities add.
    pub fn tensor(&self, other: &Operator) -> Operator {
        Operator {
            mat: self.mat.kronecker(&other.mat),
            in_qubits: self.in_qubits + other.in_qubits,
            out_qubits: self.out_qubits + other.out_qubits,
        }
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.mat.ncols() != other.mat.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.mat.ncols(),
                actual: other.mat.nrows(),
            });
        }
        Ok(Operator {
            mat: &self.mat * &other.mat,
            in_qubits: other.in_qubits,
            out_qubits: self.out_qubits,
        })
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            mat: self.mat.adjoint(),
            in_qubits: self.out_qubits,
            out_qubits: self.in_qubits,
        }
    }

    /// `‖U†U − I‖_max < tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        if self.in_qubits != self.out_qubits {
            return false;
        }
        let d = self.mat.ncols();
        let gram = self.mat.adjoint() * &self.mat;
        let mut max = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let expect = if r == c {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                max = max.max((gram[(r, c)] - expect).norm());
            }
        }
        max < tol
    }

    /// True when every eigenvalue of `K†K` lies in `[0, 1 + tol]`, so the
    /// operator can only shrink squared norms.
    pub fn is_contraction(&self, tol: f64) -> bool {
        let gram = self.mat.adjoint() * &self.mat;
        let eig = gram.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .all(|&l| l >= -tol && l <= 1.0 + tol)
    }
}

/// Pauli X.
pub fn sigma_x() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator::from_rows(2, &[z, o, o, z]).expect("2x2")
}

/// Pauli Y.
pub fn sigma_y() -> Operator {
    let z = C64::new(0.0, 0.0);
    Operator::from_rows(2, &[z, C64::new(0.0, -1.0), C64::new(0.0, 1.0), z]).expect("2x2")
}

/// Pauli Z.
pub fn sigma_z() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator::from_rows(2, &[o, z, z, -o]).expect("2x2")
}

/// Jones matrix of a half-wave plate with fast axis at `theta`:
/// `cos(2θ) σz + sin(2θ) σx`.
pub fn half_wave_plate(theta: f64) -> Operator {
    let c2 = C64::new((2.0 * theta).cos(), 0.0);
    let s2 = C64::new((2.0 * theta).sin(), 0.0);
    Operator::from_rows(2, &[c2, s2, s2, -c2]).expect("2x2")
}

/// Jones matrix of a quarter-wave plate (retardance π/2) at `theta`.
/// At `theta = 0` this is `diag(1, i)`.
pub fn quarter_wave_plate(theta: f64) -> Operator {
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let cc = C64::new(theta.cos() * theta.cos(), 0.0);
    let ss = C64::new(theta.sin() * theta.sin(), 0.0);
    let sc = C64::new(theta.sin() * theta.cos(), 0.0);
    Operator::from_rows(2, &[cc + i * ss, (one - i) * sc, (one - i) * sc, ss + i * cc])
        .expect("2x2")
}

/// Rank-one projector `|ψ⟩⟨ψ|` on the state's register.
pub fn projector(state: &Ket) -> Operator {
    let d = state.amps().len();
    let mut mat = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for (r, a) in state.amps().iter().enumerate() {
        for (c, b) in state.amps().iter().enumerate() {
            mat[(r, c)] = a * b.conj();
        }
    }
    Operator::from_matrix(mat).expect("square power of two")
}

fn check_projector(proj: &Operator) -> Result<()> {
    if proj.in_qubits != proj.out_qubits {
        return Err(Error::InvalidProjector);
    }
    let d = proj.mat.ncols();
    let sq = &proj.mat * &proj.mat;
    for r in 0..d {
        for c in 0..d {
            if (proj.mat[(r, c)] - proj.mat[(c, r)].conj()).norm() > 1e-10
                || (sq[(r, c)] - proj.mat[(r, c)]).norm() > 1e-10
            {
                return Err(Error::InvalidProjector);
            }
        }
    }
    Ok(())
}

/// Raw Born weight `⟨ψ|P|ψ⟩` without normalization; for post-selected
/// branches this is the joint success-and-outcome probability.
pub fn born_probability_raw(state: &Ket, proj: &Operator) -> Result<f64> {
    check_projector(proj)?;
    if proj.in_qubits != state.n_qubits() {
        return Err(Error::ArityMismatch {
            expected: state.n_qubits(),
            actual: proj.in_qubits,
        });
    }
    let labels: Vec<&str> = state.labels().iter().map(|s| s.as_str()).collect();
    let projected = state.apply(proj, &labels)?;
    Ok(state.inner(&projected)?.re)
}

/// Born probability `⟨ψ|P|ψ⟩ / ⟨ψ|ψ⟩`; errors on a zero-norm state.
pub fn born_probability(state: &Ket, proj: &Operator) -> Result<f64> {
    let n2 = state.norm_sqr();
    if n2 < 1e-300 {
        return Err(Error::ZeroNorm);
    }
    Ok(born_probability_raw(state, proj)? / n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    fn assert_op_close(a: &Operator, b: &Operator, tol: f64) {
        assert_eq!(a.matrix().shape(), b.matrix().shape());
        for r in 0..a.matrix().nrows() {
            for c in 0..a.matrix().ncols() {
                assert!(
                    (a.entry(r, c) - b.entry(r, c)).norm() < tol,
                    "entry ({r},{c}): {} vs {}",
                    a.entry(r, c),
                    b.entry(r, c)
                );
            }
        }
    }

    #[test]
    fn hwp_at_zero_is_sigma_z() {
        assert_op_close(&half_wave_plate(0.0), &sigma_z(), 1e-15);
    }

    #[test]
    fn hwp_at_protocol_angle() {
        // cos(7π/8) σz + sin(7π/8) σx
        let u = half_wave_plate(7.0 * PI / 16.0);
        let c = (7.0 * PI / 8.0).cos();
        let s = (7.0 * PI / 8.0).sin();
        assert_abs_diff_eq!(u.entry(0, 0).re, c, epsilon = 1e-15);
        assert_abs_diff_eq!(u.entry(0, 1).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(u.entry(1, 0).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(u.entry(1, 1).re, -c, epsilon = 1e-15);
        assert!(u.is_unitary(1e-12));
    }

    #[test]
    fn hwp_at_pi_eighth_is_hadamard_like() {
        let u = half_wave_plate(FRAC_PI_8);
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(u.entry(0, 0).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(u.entry(0, 1).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(u.entry(1, 1).re, -s, epsilon = 1e-15);
    }

    #[test]
    fn qwp_at_zero_is_diag_one_i_up_to_phase() {
        let u = quarter_wave_plate(0.0);
        // Fix the global phase by the (0,0) entry, then compare.
        let phase = u.entry(0, 0) / u.entry(0, 0).norm();
        let m = u.matrix() / phase;
        assert_abs_diff_eq!(m[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 1)].im, 1.0, epsilon = 1e-15);
        assert!(m[(0, 1)].norm() < 1e-15 && m[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn composite_quarter_then_half_plate_behind_pbs() {
        // QWP at π/4 followed by HWP at π/8 must send
        // |h⟩ -> (|h⟩ + i|v⟩)/√2 and |v⟩ -> (|h⟩ - i|v⟩)/√2
        // up to a single shared global phase.
        let comp = half_wave_plate(FRAC_PI_8)
            .compose(&quarter_wave_plate(FRAC_PI_4))
            .unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expect = [
            [C64::new(s, 0.0), C64::new(s, 0.0)],
            [C64::new(0.0, s), C64::new(0.0, -s)],
        ];
        let phase = comp.entry(0, 0) / expect[0][0];
        assert_abs_diff_eq!(phase.norm(), 1.0, epsilon = 1e-12);
        for (r, row) in expect.iter().enumerate() {
            for (c, want) in row.iter().enumerate() {
                assert!(
                    (comp.entry(r, c) - phase * want).norm() < 1e-12,
                    "entry ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn wave_plates_are_unitary_for_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            assert!(half_wave_plate(theta).is_unitary(1e-12), "hwp at {theta}");
            assert!(quarter_wave_plate(theta).is_unitary(1e-12), "qwp at {theta}");
        }
    }

    #[test]
    fn born_probability_basics() {
        let h = Ket::basis(&["a"], "h").unwrap();
        let p = projector(&h);
        assert_abs_diff_eq!(born_probability(&h, &p).unwrap(), 1.0, epsilon = 1e-15);
        let v = Ket::basis(&["a"], "v").unwrap();
        assert_abs_diff_eq!(born_probability(&v, &p).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn born_probability_rejects_zero_norm() {
        let z = Ket::new(&["a"], vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let p = projector(&Ket::basis(&["a"], "h").unwrap());
        assert!(matches!(born_probability(&z, &p), Err(Error::ZeroNorm)));
    }

    #[test]
    fn born_probability_rejects_non_projector() {
        let h = Ket::basis(&["a"], "h").unwrap();
        let not_proj = half_wave_plate(0.3);
        assert!(matches!(
            born_probability(&h, &not_proj),
            Err(Error::InvalidProjector)
        ));
    }
}
