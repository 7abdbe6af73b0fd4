//! Pure states over a register of labelled polarization qubits.
//!
//! Amplitudes are stored densely in the `{h, v}^n` computational basis with
//! `h -> 0`, `v -> 1` and the leftmost label as the most significant bit.
//! The squared norm of a `Ket` is allowed to be below one: post-selected
//! branches carry their success probability in the norm.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::operator::Operator;

pub type C64 = Complex64;

/// Largest register size the dense representation accepts.
pub const MAX_QUBITS: usize = 8;

/// Slack allowed on `norm² <= 1` checks.
const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    labels: Vec<String>,
    amps: Vec<C64>,
}

impl Ket {
    /// Builds a state from mode labels and a dense amplitude vector.
    pub fn new<S: AsRef<str>>(labels: &[S], amps: Vec<C64>) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        Self::from_parts(labels, amps)
    }

    pub(crate) fn from_parts(labels: Vec<String>, amps: Vec<C64>) -> Result<Self> {
        let n = labels.len();
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        if amps.len() != 1 << n {
            return Err(Error::AmplitudeLength {
                qubits: n,
                actual: amps.len(),
            });
        }
        let ket = Ket { labels, amps };
        let n2 = ket.norm_sqr();
        if !(0.0..=1.0 + NORM_SLACK).contains(&n2) {
            return Err(Error::NormOutOfRange(n2));
        }
        Ok(ket)
    }

    /// Computational basis state, e.g. `Ket::basis(&["a", "b"], "hv")`.
    pub fn basis<S: AsRef<str>>(labels: &[S], pols: &str) -> Result<Self> {
        let n = labels.len();
        let mut idx = 0usize;
        let chars: Vec<char> = pols.chars().collect();
        if chars.len() != n {
            return Err(Error::AmplitudeLength {
                qubits: n,
                actual: chars.len(),
            });
        }
        for (k, c) in chars.iter().enumerate() {
            let bit = match c {
                'h' => 0usize,
                'v' => 1usize,
                other => return Err(Error::LabelMismatch(format!("polarization `{other}`"))),
            };
            idx |= bit << (n - 1 - k);
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[idx] = C64::new(1.0, 0.0);
        Self::new(labels, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Amplitude of the basis ket `pols` in the register's current label order.
    pub fn amplitude(&self, pols: &str) -> Result<C64> {
        let n = self.n_qubits();
        let mut idx = 0usize;
        let chars: Vec<char> = pols.chars().collect();
        if chars.len() != n {
            return Err(Error::AmplitudeLength {
                qubits: n,
                actual: chars.len(),
            });
        }
        for (k, c) in chars.iter().enumerate() {
            match c {
                'h' => {}
                'v' => idx |= 1 << (n - 1 - k),
                other => return Err(Error::LabelMismatch(format!("polarization `{other}`"))),
            }
        }
        Ok(self.amps[idx])
    }

    /// Kronecker product; the two registers must not share labels.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        for l in &other.labels {
            if self.labels.contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let m = other.amps.len();
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len() * m];
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in other.amps.iter().enumerate() {
                amps[(i << other.n_qubits()) | j] = a * b;
            }
        }
        Self::from_parts(labels, amps)
    }

    /// Applies `op` to the given target modes, identity elsewhere.
    ///
    /// The operator may change the register size: an operator taking `k`
    /// qubits to `m` qubits consumes all `k` targets and leaves the first
    /// `m` of them in place (the fusion gate keeps the system photon and
    /// absorbs the heralded one). The surviving labels are inserted at the
    /// position of the earliest target.
    pub fn apply(&self, op: &Operator, targets: &[&str]) -> Result<Ket> {
        let k = op.input_qubits();
        let m = op.output_qubits();
        if targets.len() != k {
            return Err(Error::ArityMismatch {
                expected: k,
                actual: targets.len(),
            });
        }
        let n = self.n_qubits();
        let mut pos = Vec::with_capacity(k);
        for t in targets {
            let p = self.position(t)?;
            if pos.contains(&p) {
                return Err(Error::DuplicateLabel((*t).to_string()));
            }
            pos.push(p);
        }
        let n_out = n - k + m;
        let first = *pos.iter().min().expect("at least one target");

        // Output layout: surviving op qubits at `first`, the rest in order.
        let mut out_labels: Vec<String> = Vec::with_capacity(n_out);
        let mut op_out_pos = vec![0usize; m];
        let mut rest: Vec<(usize, usize)> = Vec::new(); // (orig position, out position)
        let mut cursor = 0usize;
        for i in 0..n {
            if i == first {
                for (j, slot) in op_out_pos.iter_mut().enumerate() {
                    out_labels.push(targets[j].to_string());
                    *slot = cursor;
                    cursor += 1;
                }
            }
            if !pos.contains(&i) {
                out_labels.push(self.labels[i].clone());
                rest.push((i, cursor));
                cursor += 1;
            }
        }
        debug_assert_eq!(cursor, n_out);

        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_out];
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let mut in_bits = 0usize;
            for (j, &p) in pos.iter().enumerate() {
                let bit = (idx >> (n - 1 - p)) & 1;
                in_bits |= bit << (k - 1 - j);
            }
            let mut rest_bits = 0usize;
            for &(i, o) in &rest {
                let bit = (idx >> (n - 1 - i)) & 1;
                rest_bits |= bit << (n_out - 1 - o);
            }
            for out_bits in 0..(1usize << m) {
                let c = op.entry(out_bits, in_bits);
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let mut out_idx = rest_bits;
                for (j, &o) in op_out_pos.iter().enumerate() {
                    let bit = (out_bits >> (m - 1 - j)) & 1;
                    out_idx |= bit << (n_out - 1 - o);
                }
                amps[out_idx] += c * a;
            }
        }
        Self::from_parts(out_labels, amps)
    }

    /// Inner product `⟨self|other⟩`; the label sets must match (order may differ).
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        let order: Vec<&str> = self.labels.iter().map(|s| s.as_str()).collect();
        let other = other.reordered(&order)?;
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|`, the phase-insensitive overlap.
    pub fn overlap_abs(&self, other: &Ket) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Same state with the register permuted to the given label order.
    pub fn reordered<S: AsRef<str>>(&self, order: &[S]) -> Result<Ket> {
        let n = self.n_qubits();
        if order.len() != n {
            return Err(Error::LabelMismatch(format!(
                "expected {} labels, got {}",
                n,
                order.len()
            )));
        }
        let mut old_pos = Vec::with_capacity(n);
        for l in order {
            old_pos.push(self.position(l.as_ref())?);
        }
        {
            let mut seen = old_pos.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != n {
                return Err(Error::LabelMismatch("repeated label in order".into()));
            }
        }
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (new_idx, slot) in amps.iter_mut().enumerate() {
            let mut old_idx = 0usize;
            for (kq, &p) in old_pos.iter().enumerate() {
                let bit = (new_idx >> (n - 1 - kq)) & 1;
                old_idx |= bit << (n - 1 - p);
            }
            *slot = self.amps[old_idx];
        }
        let labels = order.iter().map(|s| s.as_ref().to_string()).collect();
        Self::from_parts(labels, amps)
    }

    /// Rescaled copy of the state.
    pub fn scaled(&self, c: C64) -> Result<Ket> {
        let amps = self.amps.iter().map(|a| a * c).collect();
        Self::from_parts(self.labels.clone(), amps)
    }

    /// Sum of two states over the same register (labels must match in order).
    pub fn add(&self, other: &Ket) -> Result<Ket> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch("addition needs identical registers".into()));
        }
        let amps = self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a + b)
            .collect();
        Self::from_parts(self.labels.clone(), amps)
    }

    /// Unit-norm copy; errors on (numerically) zero norm.
    pub fn normalized(&self) -> Result<Ket> {
        let n2 = self.norm_sqr();
        if n2 < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        self.scaled(C64::new(1.0 / n2.sqrt(), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::operator::{self, Operator};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn tensor_of_basis_states() {
        let h = Ket::basis(&["a"], "h").unwrap();
        let v = Ket::basis(&["b"], "v").unwrap();
        let hv = h.tensor(&v).unwrap();
        assert_eq!(hv.labels(), &["a".to_string(), "b".to_string()]);
        assert_eq!(hv.amplitude("hv").unwrap(), c(1.0, 0.0));
        assert_eq!(hv.amps()[0b01], c(1.0, 0.0));
        assert_abs_diff_eq!(hv.norm_sqr(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tensor_rejects_shared_labels() {
        let h = Ket::basis(&["a"], "h").unwrap();
        let v = Ket::basis(&["a"], "v").unwrap();
        assert!(matches!(h.tensor(&v), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn tensor_norm_is_multiplicative_for_bell_pairs() {
        let s = 1.0 / 2f64.sqrt();
        let psi_m = |a: &str, b: &str| {
            Ket::new(
                &[a, b],
                vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)],
            )
            .unwrap()
        };
        let joint = psi_m("a", "b").tensor(&psi_m("x", "y")).unwrap();
        assert_eq!(joint.n_qubits(), 4);
        assert_abs_diff_eq!(joint.norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pauli_tensor_maps_phi_plus_to_psi_minus() {
        // 4x4 oracle worked by hand: (σz ⊗ σx)(|hh⟩+|vv⟩)/√2 = (|hv⟩-|vh⟩)/√2.
        let s = 1.0 / 2f64.sqrt();
        let phi_plus = Ket::new(
            &["a", "b"],
            vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)],
        )
        .unwrap();
        let op = operator::sigma_z().tensor(&operator::sigma_x());
        let out = phi_plus.apply(&op, &["a", "b"]).unwrap();
        let psi_minus = Ket::new(
            &["a", "b"],
            vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert_abs_diff_eq!(out.overlap_abs(&psi_minus).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn apply_identity_is_noop() {
        let s = 1.0 / 2f64.sqrt();
        let psi = Ket::new(
            &["a", "b"],
            vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, s)],
        )
        .unwrap();
        let out = psi.apply(&Operator::identity(1), &["b"]).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn apply_on_six_qubits_matches_dense_oracle() {
        // Spot-check a single-qubit gate on a 6-qubit register against the
        // explicit 64x64 matrix built by Kronecker products.
        let n = 6usize;
        let labels: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        let mut amps = Vec::with_capacity(1 << n);
        for i in 0..(1 << n) {
            let x = (i as f64 + 1.0) / 100.0;
            amps.push(c(x.sin(), x.cos()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let amps: Vec<C64> = amps.into_iter().map(|a| a / norm.sqrt()).collect();
        let psi = Ket::new(&labels, amps.clone()).unwrap();

        let u = operator::half_wave_plate(0.3);
        let target = 2usize;
        let mut dense = Operator::identity(0);
        for i in 0..n {
            let factor = if i == target {
                u.clone()
            } else {
                Operator::identity(1)
            };
            dense = dense.tensor(&factor);
        }
        let fast = psi.apply(&u, &["q2"]).unwrap();
        let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let slow = psi.apply(&dense, &label_refs).unwrap();
        for i in 0..(1 << n) {
            assert_abs_diff_eq!(fast.amps()[i].re, slow.amps()[i].re, epsilon = 1e-13);
            assert_abs_diff_eq!(fast.amps()[i].im, slow.amps()[i].im, epsilon = 1e-13);
        }
    }

    #[test]
    fn apply_rejects_unknown_label_and_bad_arity() {
        let psi = Ket::basis(&["a", "b"], "hv").unwrap();
        let op = Operator::identity(1);
        assert!(matches!(
            psi.apply(&op, &["nope"]),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            psi.apply(&op, &["a", "b"]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn reorder_round_trip() {
        let psi = Ket::new(
            &["a", "b"],
            vec![c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0), c(0.4, 0.0)],
        )
        .unwrap();
        let swapped = psi.reordered(&["b", "a"]).unwrap();
        assert_eq!(swapped.amplitude("hv").unwrap(), psi.amplitude("vh").unwrap());
        let back = swapped.reordered(&["a", "b"]).unwrap();
        assert_eq!(back, psi);
    }

    #[test]
    fn rejects_norm_above_one() {
        let r = Ket::new(&["a"], vec![c(1.0, 0.0), c(0.5, 0.0)]);
        assert!(matches!(r, Err(Error::NormOutOfRange(_))));
    }

    #[test]
    fn rejects_duplicate_labels() {
        let r = Ket::new(
            &["a", "a"],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        assert!(matches!(r, Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn normalized_rejects_zero_state() {
        let z = Ket::new(&["a"], vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(z.normalized(), Err(Error::ZeroNorm)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_two_qubit_states_keep_norm_under_unitaries(
            re in proptest::collection::vec(-1.0f64..1.0, 4),
            im in proptest::collection::vec(-1.0f64..1.0, 4),
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let mut amps: Vec<C64> = re.iter().zip(im.iter()).map(|(&r, &i)| c(r, i)).collect();
            let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            prop_assume!(n2 > 1e-6);
            for a in &mut amps {
                *a /= C64::new(n2.sqrt(), 0.0);
            }
            let psi = Ket::new(&["a", "b"], amps).unwrap();
            let u = operator::half_wave_plate(theta);
            let out = psi.apply(&u, &["b"]).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
