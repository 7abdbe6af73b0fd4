//! The six-photon Bell-Wigner protocol: entangled sources, the resource-state
//! rotation, non-destructive friend measurements built from type-I fusion
//! gates, the post-selected four-photon state, and the measured observables.
//!
//! Mode naming follows the optical layout: the central pair lives in modes
//! `a` and `b`; each friend adds an ancilla pair whose heralded photon
//! (`α'`/`β'`) is consumed by the fusion gate while the other (`α`/`β`)
//! keeps the measurement record.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{C64, Ket, Operator};

/// Wave-plate angle that rotates the source pair into the state maximising
/// the Bell-Wigner violation.
pub const RESOURCE_PLATE_ANGLE: f64 = 7.0 * PI / 16.0;

/// Mode labels of the post-selected four-photon register.
pub const ALICE_MODES: [&str; 2] = ["a", "α"];
pub const BOB_MODES: [&str; 2] = ["b", "β"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Which of the three measured protocols a table belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Record-only observables on the friend's memory; Bell-state analysis
    /// for the joint setting.
    Main,
    /// Consistency-checking observables that also look at the system photon
    /// and assign eigenvalue 0 to mismatched records.
    AltObservables,
    /// The alternative-observable protocol measured through linear
    /// polarizers, normalised against the joint-setting totals.
    AltPolarizerProtocol,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Main => "main",
            Variant::AltObservables => "alt_observables",
            Variant::AltPolarizerProtocol => "alt_polarizer_protocol",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(Variant::Main),
            "alt_observables" => Ok(Variant::AltObservables),
            "alt_polarizer_protocol" => Ok(Variant::AltPolarizerProtocol),
            other => Err(Error::UnsupportedVariant(other.to_string())),
        }
    }
}

/// One choice of measurement settings `(x, y)` under a protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingPair {
    pub x: u8,
    pub y: u8,
    pub variant: Variant,
}

impl SettingPair {
    pub fn new(x: u8, y: u8, variant: Variant) -> Result<Self> {
        if x > 1 {
            return Err(Error::InvalidSetting(x));
        }
        if y > 1 {
            return Err(Error::InvalidSetting(y));
        }
        Ok(SettingPair { x, y, variant })
    }

    /// Canonical position in `[ (0,0), (0,1), (1,0), (1,1) ]` arrays.
    pub fn index(&self) -> usize {
        (2 * self.x + self.y) as usize
    }
}

/// All four setting pairs in canonical order.
pub fn all_settings(variant: Variant) -> [SettingPair; 4] {
    [
        SettingPair { x: 0, y: 0, variant },
        SettingPair { x: 0, y: 1, variant },
        SettingPair { x: 1, y: 0, variant },
        SettingPair { x: 1, y: 1, variant },
    ]
}

/// One eigenstate of a local observable together with its eigenvalue.
#[derive(Debug, Clone)]
pub struct ObservableEntry {
    pub name: String,
    pub eigenvalue: f64,
    eigenstate: Ket,
}

impl ObservableEntry {
    pub fn eigenstate(&self) -> &Ket {
        &self.eigenstate
    }
}

/// A local observable given as its complete eigenbasis. The projectors are
/// rank one, pairwise orthogonal and resolve the identity.
#[derive(Debug, Clone)]
pub struct Observable {
    acting: [String; 2],
    entries: Vec<ObservableEntry>,
}

impl Observable {
    pub fn acting(&self) -> &[String; 2] {
        &self.acting
    }

    pub fn entries(&self) -> &[ObservableEntry] {
        &self.entries
    }

    /// The spec-level view: projector matrices paired with eigenvalues.
    pub fn projectors(&self) -> Vec<(Operator, f64)> {
        self.entries
            .iter()
            .map(|e| (crate::quantum::projector(&e.eigenstate), e.eigenvalue))
            .collect()
    }

    /// Sum of all projectors; the identity when the eigenbasis is complete.
    pub fn projector_sum(&self) -> Operator {
        let d = 1usize << 2;
        let mut mat = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for (p, _) in self.projectors() {
            mat += p.matrix();
        }
        Operator::from_matrix(mat).expect("square power of two")
    }
}

/// Per-setting outcome probabilities, normalised within the setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub outcome_a: String,
    pub outcome_b: String,
    pub eigenvalue_a: f64,
    pub eigenvalue_b: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub setting: SettingPair,
    pub entries: Vec<OutcomeEntry>,
}

impl ProbabilityTable {
    /// Total probability carried by eigenvalue-0 outcomes.
    pub fn zero_eigenvalue_mass(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.eigenvalue_a == 0.0 || e.eigenvalue_b == 0.0)
            .map(|e| e.probability)
            .sum()
    }
}

/// The four maximally entangled two-qubit states.
pub fn bell_state(kind: BellKind, a: &str, b: &str) -> Ket {
    let s = FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let p = C64::new(s, 0.0);
    let m = C64::new(-s, 0.0);
    let amps = match kind {
        BellKind::PhiPlus => vec![p, z, z, p],
        BellKind::PhiMinus => vec![p, z, z, m],
        BellKind::PsiPlus => vec![z, p, p, z],
        BellKind::PsiMinus => vec![z, p, m, z],
    };
    Ket::new(&[a, b], amps).expect("valid Bell state")
}

/// Source pair after the rotation `1 ⊗ U` with a half-wave plate at `theta`
/// on mode `b`.
pub fn resource_state_with_angle(theta: f64) -> Ket {
    let pair = bell_state(BellKind::PsiMinus, "a", "b");
    pair.apply(&crate::quantum::half_wave_plate(theta), &["b"])
        .expect("unitary on mode b")
}

/// The protocol's resource state, rotated at the violation-maximising angle.
pub fn resource_state() -> Ket {
    resource_state_with_angle(RESOURCE_PLATE_ANGLE)
}

/// Type-I fusion gate as a 2-to-1 Kraus operator:
/// `(|h⟩⟨hh| − |v⟩⟨vv|)/√2`. The prefactor carries the 1/2 success
/// probability of the gate; odd-parity inputs are annihilated.
pub fn fusion_gate_kraus() -> Operator {
    let s = FRAC_1_SQRT_2;
    let mut mat = DMatrix::from_element(2, 4, C64::new(0.0, 0.0));
    mat[(0, 0b00)] = C64::new(s, 0.0);
    mat[(1, 0b11)] = C64::new(-s, 0.0);
    Operator::from_matrix(mat).expect("2x4")
}

/// Non-destructive friend measurement of `system` in the `{h, v}` basis.
///
/// A fresh singlet pair is attached on `(heralded, memory)`, then the fusion
/// gate acts on `(system, heralded)`. On the surviving branch the system
/// polarization is copied, flipped, onto the memory photon: the record
/// "photon is h" is the memory state `|v⟩` and vice versa. Each fusion
/// succeeds with probability 1/4, carried by the branch norm.
pub fn friend_measure(state: &Ket, system: &str, heralded: &str, memory: &str) -> Result<Ket> {
    let ancilla = bell_state(BellKind::PsiMinus, heralded, memory);
    let joint = state.tensor(&ancilla)?;
    joint.apply(&fusion_gate_kraus(), &[system, heralded])
}

/// The unnormalised four-photon branch held by Alice and Bob after both
/// fusion gates succeed, over modes `(a, α, b, β)`. Its squared norm is the
/// overall success probability 1/16.
pub fn four_photon_state() -> Ket {
    four_photon_state_with_angle(RESOURCE_PLATE_ANGLE)
}

/// Same pipeline with a configurable resource-rotation angle.
pub fn four_photon_state_with_angle(theta: f64) -> Ket {
    let state = resource_state_with_angle(theta);
    let state = friend_measure(&state, "a", "α'", "α").expect("fresh ancilla labels");
    let state = friend_measure(&state, "b", "β'", "β").expect("fresh ancilla labels");
    state
        .reordered(&["a", "α", "b", "β"])
        .expect("full register")
}

fn party_modes(who: Party) -> [&'static str; 2] {
    match who {
        Party::Alice => ALICE_MODES,
        Party::Bob => BOB_MODES,
    }
}

fn basis_entry(modes: &[&str; 2], pols: &str, eigenvalue: f64) -> ObservableEntry {
    ObservableEntry {
        name: pols.to_string(),
        eigenvalue,
        eigenstate: Ket::basis(modes, pols).expect("two-mode basis"),
    }
}

fn bell_entry(modes: &[&str; 2], kind: BellKind, name: &str, eigenvalue: f64) -> ObservableEntry {
    ObservableEntry {
        name: name.to_string(),
        eigenvalue,
        eigenstate: bell_state(kind, modes[0], modes[1]),
    }
}

/// Local observable for one party and one setting.
///
/// Setting 0 reads the friend's record: the identity on the system photon
/// tensored with `|v⟩⟨v| − |h⟩⟨h|` on the memory for the main variant, or
/// the record-consistency observable (`|hv⟩ → +1`, `|vh⟩ → −1`, rest 0) for
/// the alternative one. Setting 1 is the Bell-state analysis with `Ψ±` at
/// `±1` and `Φ±` at 0.
pub fn observable(setting: u8, who: Party, variant: Variant) -> Result<Observable> {
    if setting > 1 {
        return Err(Error::InvalidSetting(setting));
    }
    if variant == Variant::AltPolarizerProtocol {
        return Err(Error::UnsupportedVariant(variant.to_string()));
    }
    Ok(effective_observable(setting, who, variant))
}

/// Observable family actually measured under `variant`; the polarizer
/// protocol measures the alternative observables.
pub(crate) fn effective_observable(setting: u8, who: Party, variant: Variant) -> Observable {
    let modes = party_modes(who);
    let entries = match (setting, variant) {
        (1, _) => vec![
            bell_entry(&modes, BellKind::PsiPlus, "psi+", 1.0),
            bell_entry(&modes, BellKind::PsiMinus, "psi-", -1.0),
            bell_entry(&modes, BellKind::PhiPlus, "phi+", 0.0),
            bell_entry(&modes, BellKind::PhiMinus, "phi-", 0.0),
        ],
        (_, Variant::Main) => vec![
            basis_entry(&modes, "hv", 1.0),
            basis_entry(&modes, "vv", 1.0),
            basis_entry(&modes, "hh", -1.0),
            basis_entry(&modes, "vh", -1.0),
        ],
        _ => vec![
            basis_entry(&modes, "hv", 1.0),
            basis_entry(&modes, "vh", -1.0),
            basis_entry(&modes, "hh", 0.0),
            basis_entry(&modes, "vv", 0.0),
        ],
    };
    Observable {
        acting: [modes[0].to_string(), modes[1].to_string()],
        entries,
    }
}

/// Born probabilities for all 4 × 4 eigenstate pairs of the chosen setting,
/// normalised within the setting as the recorded coincidences are.
pub fn outcome_probabilities(state: &Ket, setting: SettingPair) -> Result<ProbabilityTable> {
    let mut expected: Vec<&str> = ALICE_MODES.iter().chain(BOB_MODES.iter()).copied().collect();
    expected.sort_unstable();
    let mut actual: Vec<&str> = state.labels().iter().map(|s| s.as_str()).collect();
    actual.sort_unstable();
    if expected != actual {
        return Err(Error::LabelMismatch(format!(
            "expected register {{a, α, b, β}}, got {:?}",
            state.labels()
        )));
    }

    let oa = effective_observable(setting.x, Party::Alice, setting.variant);
    let ob = effective_observable(setting.y, Party::Bob, setting.variant);

    let mut entries = Vec::with_capacity(16);
    let mut total = 0.0;
    for ea in oa.entries() {
        for eb in ob.entries() {
            let pair = ea.eigenstate.tensor(&eb.eigenstate)?;
            let amp = pair.inner(state)?;
            let p = amp.norm_sqr();
            total += p;
            entries.push(OutcomeEntry {
                outcome_a: ea.name.clone(),
                outcome_b: eb.name.clone(),
                eigenvalue_a: ea.eigenvalue,
                eigenvalue_b: eb.eigenvalue,
                probability: p,
            });
        }
    }
    if total < 1e-300 {
        return Err(Error::ZeroNorm);
    }
    for e in &mut entries {
        e.probability /= total;
    }
    Ok(ProbabilityTable { setting, entries })
}

/// Eigenvalue-weighted average of a probability table.
pub fn expectation(table: &ProbabilityTable) -> f64 {
    table
        .entries
        .iter()
        .map(|e| e.eigenvalue_a * e.eigenvalue_b * e.probability)
        .sum()
}

/// Ideal tables for all four settings of a variant.
pub fn ideal_tables(variant: Variant) -> Result<[ProbabilityTable; 4]> {
    let state = four_photon_state();
    let settings = all_settings(variant);
    Ok([
        outcome_probabilities(&state, settings[0])?,
        outcome_probabilities(&state, settings[1])?,
        outcome_probabilities(&state, settings[2])?,
        outcome_probabilities(&state, settings[3])?,
    ])
}
