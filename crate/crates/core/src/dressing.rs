//! Ground-manifold hyperfine + Zeeman structure of the ²S₁/₂ level.
//!
//! Basis ordering is `|m_I, m_J⟩ ∈ {|+½,+½⟩, |+½,−½⟩, |−½,+½⟩, |−½,−½⟩}`.
//! With `M = ω_hf` and `N = μ_B B` the Hamiltonian (nuclear Zeeman term
//! dropped) is
//!
//! ```text
//! diag(M/4 + N, −M/4 − N, −M/4 + N, M/4 − N),  H[1][2] = H[2][1] = M/2
//! ```
//!
//! Only the middle 2×2 block mixes; it is diagonalized in closed form. The
//! stretched states `|1,±1⟩` are product states at every field.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ion_params::{IonSpecies, MagneticField};

/// One of the four hyperfine sublevels of ²S₁/₂ (I = ½).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroundState {
    F0m0,
    F1m0,
    F1mPlus1,
    F1mMinus1,
}

impl GroundState {
    pub const ALL: [GroundState; 4] = [
        GroundState::F0m0,
        GroundState::F1m0,
        GroundState::F1mPlus1,
        GroundState::F1mMinus1,
    ];

    pub fn f(self) -> u8 {
        match self {
            GroundState::F0m0 => 0,
            _ => 1,
        }
    }

    pub fn m_f(self) -> i8 {
        match self {
            GroundState::F0m0 | GroundState::F1m0 => 0,
            GroundState::F1mPlus1 => 1,
            GroundState::F1mMinus1 => -1,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Zero-field eigenvector in the |m_I, m_J⟩ basis.
    pub fn bare_vector(self) -> Vector4<f64> {
        let h = FRAC_1_SQRT_2;
        match self {
            GroundState::F0m0 => Vector4::new(0.0, -h, h, 0.0),
            GroundState::F1m0 => Vector4::new(0.0, h, h, 0.0),
            GroundState::F1mPlus1 => Vector4::new(1.0, 0.0, 0.0, 0.0),
            GroundState::F1mMinus1 => Vector4::new(0.0, 0.0, 0.0, 1.0),
        }
    }
}

/// Mixing ratio R = μ_B B / ω_hf.
pub fn mixing_ratio(species: &IonSpecies, field: &MagneticField) -> f64 {
    field.zeeman_angular() / species.omega_hf
}

/// Ground-manifold Hamiltonian in rad/s.
pub fn build_hamiltonian(species: &IonSpecies, field: &MagneticField) -> Matrix4<f64> {
    let m = species.omega_hf;
    let n = field.zeeman_angular();
    let mut h = Matrix4::zeros();
    h[(0, 0)] = m / 4.0 + n;
    h[(1, 1)] = -m / 4.0 - n;
    h[(2, 2)] = -m / 4.0 + n;
    h[(3, 3)] = m / 4.0 - n;
    h[(1, 2)] = m / 2.0;
    h[(2, 1)] = m / 2.0;
    h
}

/// Eigen-decomposition of the ground manifold, indexed by adiabatic label.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedBasis {
    /// Energies in rad/s, ordered as [`GroundState::ALL`].
    pub eigenvalues: [f64; 4],
    /// Unit eigenvectors in the |m_I, m_J⟩ basis, ordered as [`GroundState::ALL`].
    pub eigenvectors: [Vector4<f64>; 4],
    pub mixing_ratio: f64,
}

impl DressedBasis {
    pub fn energy(&self, state: GroundState) -> f64 {
        self.eigenvalues[state.index()]
    }

    pub fn vector(&self, state: GroundState) -> &Vector4<f64> {
        &self.eigenvectors[state.index()]
    }
}

/// Exact dressed states. Each eigenvector is scaled so its ⟨−½,+½| component
/// is non-negative (the stretched states are the basis vectors themselves).
pub fn dress(species: &IonSpecies, field: &MagneticField) -> Result<DressedBasis> {
    let m = species.omega_hf;
    let n = field.zeeman_angular();
    let r = n / m;
    let root = (1.0 + 4.0 * r * r).sqrt();

    let lower = Vector4::new(0.0, -(2.0 * r + root), 1.0, 0.0).normalize();
    let upper = Vector4::new(0.0, root - 2.0 * r, 1.0, 0.0).normalize();

    let basis = DressedBasis {
        eigenvalues: [
            -m / 4.0 - 0.5 * m * root,
            -m / 4.0 + 0.5 * m * root,
            m / 4.0 + n,
            m / 4.0 - n,
        ],
        eigenvectors: [
            lower,
            upper,
            Vector4::new(1.0, 0.0, 0.0, 0.0),
            Vector4::new(0.0, 0.0, 0.0, 1.0),
        ],
        mixing_ratio: r,
    };

    let labels = assign_labels(&basis.eigenvectors)?;
    if labels != GroundState::ALL {
        return Err(Error::Domain(format!(
            "dressed-state labeling ambiguous at R = {r:e}: {labels:?}"
        )));
    }
    Ok(basis)
}

/// Label eigenvectors by maximal overlap with the zero-field states.
///
/// Fails when two vectors claim the same label or an overlap is tied.
pub fn assign_labels(vectors: &[Vector4<f64>]) -> Result<Vec<GroundState>> {
    let mut labels = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut overlaps: Vec<(GroundState, f64)> = GroundState::ALL
            .iter()
            .map(|s| (*s, s.bare_vector().dot(v).abs()))
            .collect();
        overlaps.sort_by(|a, b| b.1.total_cmp(&a.1));
        if (overlaps[0].1 - overlaps[1].1).abs() < 1e-9 {
            return Err(Error::Domain("degenerate overlap while labeling dressed states".into()));
        }
        if labels.contains(&overlaps[0].0) {
            return Err(Error::Domain(format!("label {:?} assigned twice", overlaps[0].0)));
        }
        labels.push(overlaps[0].0);
    }
    Ok(labels)
}

/// First-order perturbative dressed state, unnormalized:
/// |0,0⟩ − R|1,0⟩ and |1,0⟩ + R|0,0⟩.
pub fn first_order_state(state: GroundState, r: f64) -> Vector4<f64> {
    match state {
        GroundState::F0m0 => GroundState::F0m0.bare_vector() - GroundState::F1m0.bare_vector() * r,
        GroundState::F1m0 => GroundState::F1m0.bare_vector() + GroundState::F0m0.bare_vector() * r,
        s => s.bare_vector(),
    }
}

/// Excited hyperfine level reached from a clock state (m = ±1 sublevel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExcitedLevel {
    /// ²P₁/₂, F = 1
    P12F1,
    /// ²P₃/₂, F = 1
    P32F1,
    /// ²P₃/₂, F = 2
    P32F2,
}

impl ExcitedLevel {
    pub const ALL: [ExcitedLevel; 3] = [ExcitedLevel::P12F1, ExcitedLevel::P32F1, ExcitedLevel::P32F2];

    pub fn is_p_half(self) -> bool {
        matches!(self, ExcitedLevel::P12F1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Helicity {
    SigmaPlus,
    SigmaMinus,
}

impl Helicity {
    pub const ALL: [Helicity; 2] = [Helicity::SigmaPlus, Helicity::SigmaMinus];

    fn sign(self) -> f64 {
        match self {
            Helicity::SigmaPlus => 1.0,
            Helicity::SigmaMinus => -1.0,
        }
    }
}

/// Dipole matrix element from a dressed clock state, in units of the reduced
/// element d₁, to first order in R. σ₊ reaches the m = +1 excited sublevel,
/// σ₋ its mirror at m = −1.
///
/// | dressed | P½ F=1 | P³⁄₂ F=1 | P³⁄₂ F=2 |
/// |---|---|---|---|
/// | 0,0 | √(2/6)(1 ± R) | √(4/6)(1 ∓ R/2) | ∓√(3/6) R |
/// | 1,0 | −√(2/6)(1 ∓ R) | √(1/6)(1 ± 2R) | √(3/6) |
///
/// Upper signs for σ₊.
pub fn perturbed_dipole(ground: GroundState, excited: ExcitedLevel, pol: Helicity, r: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Domain(format!("mixing ratio must be >= 0, got {r}")));
    }
    let s = pol.sign();
    let value = match (ground, excited) {
        (GroundState::F0m0, ExcitedLevel::P12F1) => (2.0f64 / 6.0).sqrt() * (1.0 + s * r),
        (GroundState::F0m0, ExcitedLevel::P32F1) => (4.0f64 / 6.0).sqrt() * (1.0 - s * r / 2.0),
        (GroundState::F0m0, ExcitedLevel::P32F2) => -s * (3.0f64 / 6.0).sqrt() * r,
        (GroundState::F1m0, ExcitedLevel::P12F1) => -(2.0f64 / 6.0).sqrt() * (1.0 - s * r),
        (GroundState::F1m0, ExcitedLevel::P32F1) => (1.0f64 / 6.0).sqrt() * (1.0 + s * 2.0 * r),
        (GroundState::F1m0, ExcitedLevel::P32F2) => (3.0f64 / 6.0).sqrt(),
        (g, e) => {
            return Err(Error::Domain(format!(
                "no perturbed dipole entry for {g:?} -> {e:?}; only clock states are tabulated"
            )))
        }
    };
    Ok(value)
}

/// All tabulated dipole coefficients at one mixing ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleTable {
    pub mixing_ratio: f64,
    pub entries: BTreeMap<(GroundState, ExcitedLevel, Helicity), f64>,
}

impl DipoleTable {
    pub fn new(r: f64) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for ground in [GroundState::F0m0, GroundState::F1m0] {
            for excited in ExcitedLevel::ALL {
                for pol in Helicity::ALL {
                    entries.insert((ground, excited, pol), perturbed_dipole(ground, excited, pol, r)?);
                }
            }
        }
        Ok(DipoleTable { mixing_ratio: r, entries })
    }

    pub fn get(&self, ground: GroundState, excited: ExcitedLevel, pol: Helicity) -> Option<f64> {
        self.entries.get(&(ground, excited, pol)).copied()
    }
}
