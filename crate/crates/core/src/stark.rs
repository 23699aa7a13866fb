//! Second- and fourth-order light shifts of the ²S₁/₂ sublevels and the
//! differential shifts of the clock and Zeeman qubits.
//!
//! All public shift values are in Hz. With g² in Hz² per W/m² (see
//! [`crate::ion_params`]) and detunings converted to Hz, `g² I / Δ` is a shift
//! in Hz and no further 2π bookkeeping is needed.
//!
//! Level shifts for the clock states carry the dressed-state corrections to
//! first order in R = μ_B B/ω_hf; the stretched states use the bare
//! expressions. The clock differential is the difference of the two level
//! shifts; [`clock_second_order_differential`] gives the closed form that keeps
//! only the leading order in ω_hf/Δ, and the two agree to that order.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dressing::{mixing_ratio, GroundState};
use crate::error::{Error, Result};
use crate::ion_params::{
    angular_to_hz, IonSpecies, LaserField, MagneticField, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY,
};
use crate::polarization::PolarizationState;

/// Comb lines whose sech² weight drops below this are left out of the sum.
pub const COMB_WEIGHT_CUTOFF: f64 = 1e-14;

/// Largest π population still treated as zero.
const PI_POPULATION_TOLERANCE: f64 = 1e-12;

const MAX_COMB_TERMS: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QubitKind {
    /// |1,0⟩ ↔ |0,0⟩
    Clock,
    /// |1,+1⟩ ↔ |0,0⟩
    ZeemanPlus,
    /// |1,−1⟩ ↔ |0,0⟩
    ZeemanMinus,
}

impl QubitKind {
    pub const ALL: [QubitKind; 3] = [QubitKind::Clock, QubitKind::ZeemanPlus, QubitKind::ZeemanMinus];

    pub fn upper_state(self) -> GroundState {
        match self {
            QubitKind::Clock => GroundState::F1m0,
            QubitKind::ZeemanPlus => GroundState::F1mPlus1,
            QubitKind::ZeemanMinus => GroundState::F1mMinus1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitKind::Clock => "clock",
            QubitKind::ZeemanPlus => "zeeman+",
            QubitKind::ZeemanMinus => "zeeman-",
        }
    }
}

impl std::str::FromStr for QubitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clock" => Ok(QubitKind::Clock),
            "zeeman+" | "zeeman-plus" | "zeemanplus" => Ok(QubitKind::ZeemanPlus),
            "zeeman-" | "zeeman-minus" | "zeemanminus" => Ok(QubitKind::ZeemanMinus),
            other => Err(Error::validation("qubit", format!("unknown qubit `{other}`"))),
        }
    }
}

/// Differential shift of one qubit split by origin (all in Hz).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShiftBreakdown {
    /// Second order, proportional to |ε₊|² + |ε₋|².
    pub second_scalar: f64,
    /// Second order, proportional to |ε₊|² − |ε₋|².
    pub second_vector: f64,
    /// Comb-mediated fourth order.
    pub fourth: f64,
    pub total: f64,
}

impl ShiftBreakdown {
    pub fn new(second_scalar: f64, second_vector: f64, fourth: f64) -> Self {
        ShiftBreakdown {
            second_scalar,
            second_vector,
            fourth,
            total: second_scalar + second_vector + fourth,
        }
    }
}

/// Nearest comb tooth pair and the sech²-weighted comb factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombSpec {
    /// Index of the comb harmonic nearest the hyperfine splitting.
    pub n: i64,
    /// ω_hf − 2π n ν_rep (rad/s).
    pub delta_omega_min: f64,
    pub comb_factor: f64,
    /// Number of comb lines kept in the sum.
    pub terms: u64,
}

impl CombSpec {
    pub fn delta_min_hz(&self) -> f64 {
        angular_to_hz(self.delta_omega_min)
    }
}

/// Compute the comb factor
/// `Σ_k sech²((n+k) π ν_rep τ_p) / (1 − 2π k ν_rep / Δω_min)`.
///
/// Lines with sech² below [`COMB_WEIGHT_CUTOFF`] are dropped. The weights decay
/// like `4 e^{−2|x|}` while the denominators grow only linearly in k, so the
/// neglected tail is bounded by a geometric series.
pub fn comb_spec(species: &IonSpecies, laser: &LaserField) -> Result<CombSpec> {
    let spacing = 2.0 * std::f64::consts::PI * laser.rep_rate;
    let n = (species.omega_hf / spacing).round() as i64;
    let delta_min = species.omega_hf - n as f64 * spacing;
    if delta_min == 0.0 {
        return Err(Error::CombSingularity { k: 0 });
    }

    let step = std::f64::consts::PI * laser.rep_rate * laser.pulse_duration;
    let max_arg = (1.0 / COMB_WEIGHT_CUTOFF.sqrt()).acosh();
    let half_width = (max_arg / step).floor();
    if !half_width.is_finite() || half_width > MAX_COMB_TERMS as f64 {
        return Err(Error::Domain(format!(
            "comb sum needs {half_width:e} lines per side; pulse too short for this repetition rate"
        )));
    }
    let half_width = half_width as i64;

    let ratio = spacing / delta_min;
    let mut sum = NeumaierSum::default();
    for j in -half_width..=half_width {
        let k = j - n;
        let denom = 1.0 - k as f64 * ratio;
        if denom == 0.0 {
            return Err(Error::CombSingularity { k });
        }
        let weight = sech_sq(j as f64 * step);
        sum.add(weight / denom);
    }

    Ok(CombSpec {
        n,
        delta_omega_min: delta_min,
        comb_factor: sum.value(),
        terms: (2 * half_width + 1) as u64,
    })
}

#[inline]
fn sech_sq(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Per-unit-intensity shift of one sublevel: `(plus·|ε₊|² + minus·|ε₋|²)·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCoefficients {
    /// Hz per W/m² under pure σ₊.
    pub plus: f64,
    /// Hz per W/m² under pure σ₋.
    pub minus: f64,
}

impl LevelCoefficients {
    pub fn scalar(&self) -> f64 {
        0.5 * (self.plus + self.minus)
    }

    pub fn vector(&self) -> f64 {
        0.5 * (self.plus - self.minus)
    }

    pub fn shift(&self, pol: &PolarizationState, intensity: f64) -> f64 {
        (self.plus * pol.plus_sq() + self.minus * pol.minus_sq()) * intensity
    }
}

/// Polarization-resolved differential-shift coefficients of one qubit.
///
/// `shift(I) = (scalar + vector)·I + fourth·I²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftCoefficients {
    /// Hz per W/m².
    pub scalar: f64,
    /// Hz per W/m².
    pub vector: f64,
    /// Hz per (W/m²)².
    pub fourth: f64,
}

impl ShiftCoefficients {
    pub fn breakdown(&self, intensity: f64) -> ShiftBreakdown {
        ShiftBreakdown::new(
            self.scalar * intensity,
            self.vector * intensity,
            self.fourth * intensity * intensity,
        )
    }

    pub fn total(&self, intensity: f64) -> f64 {
        (self.scalar + self.vector) * intensity + self.fourth * intensity * intensity
    }

    /// d(shift)/dI in Hz per W/m².
    pub fn slope(&self, intensity: f64) -> f64 {
        self.scalar + self.vector + 2.0 * self.fourth * intensity
    }
}

/// Clock differential shift at fixed intensity written as a polynomial in the
/// helicity imbalance x = |ε₊|² − |ε₋|² (transverse polarization):
/// `constant + linear·x + quadratic·x²`, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockQuadratic {
    pub constant: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl ClockQuadratic {
    pub fn eval(&self, x: f64) -> f64 {
        self.constant + self.linear * x + self.quadratic * x * x
    }
}

/// Light-shift engine for one (species, laser, field) configuration.
///
/// The comb factor is computed on first use and shared between threads.
#[derive(Debug)]
pub struct ShiftModel {
    species: IonSpecies,
    laser: LaserField,
    field: MagneticField,
    mixing_ratio: f64,
    comb: OnceLock<Result<CombSpec>>,
}

impl Clone for ShiftModel {
    fn clone(&self) -> Self {
        let comb = OnceLock::new();
        if let Some(c) = self.comb.get() {
            let _ = comb.set(c.clone());
        }
        ShiftModel {
            species: self.species.clone(),
            laser: self.laser,
            field: self.field,
            mixing_ratio: self.mixing_ratio,
            comb,
        }
    }
}

impl ShiftModel {
    pub fn new(species: &IonSpecies, laser: &LaserField, field: &MagneticField) -> Result<Self> {
        species.validate()?;
        Ok(ShiftModel {
            species: species.clone(),
            laser: *laser,
            field: *field,
            mixing_ratio: mixing_ratio(species, field),
            comb: OnceLock::new(),
        })
    }

    pub fn species(&self) -> &IonSpecies {
        &self.species
    }

    pub fn laser(&self) -> &LaserField {
        &self.laser
    }

    pub fn field(&self) -> &MagneticField {
        &self.field
    }

    pub fn mixing_ratio(&self) -> f64 {
        self.mixing_ratio
    }

    pub fn intensity(&self) -> f64 {
        self.laser.intensity
    }

    pub fn comb(&self) -> Result<&CombSpec> {
        self.comb
            .get_or_init(|| comb_spec(&self.species, &self.laser))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn detunings_hz(&self) -> (f64, f64, f64) {
        (
            self.species.delta_half_hz(),
            self.species.delta_three_half_hz(),
            self.species.omega_hf_hz(),
        )
    }

    /// g²/Δ for both fine-structure levels, as seen from F = 0 (`upper =
    /// false`) or from F = 1 where the detuning is reduced by ω_hf.
    fn couplings(&self, upper: bool) -> (f64, f64) {
        let (d_half, d_three_half, hf) = self.detunings_hz();
        let offset = if upper { hf } else { 0.0 };
        (
            self.species.g2_half / (d_half - offset),
            self.species.g2_three_half / (d_three_half - offset),
        )
    }

    /// g²₁/₂/Δ₁/₂ − g²₃/₂/Δ₃/₂ in Hz per W/m².
    pub fn vector_coupling(&self) -> f64 {
        let (half, three_half) = self.couplings(false);
        half - three_half
    }

    /// Second-order shift coefficients of one sublevel.
    pub fn level_coefficients(&self, state: GroundState) -> LevelCoefficients {
        let r = self.mixing_ratio;
        match state {
            GroundState::F0m0 => {
                let (half, three_half) = self.couplings(false);
                let scalar = (half + 2.0 * three_half) / 12.0;
                let vector = 2.0 * r / 12.0 * (half - three_half);
                LevelCoefficients {
                    plus: scalar + vector,
                    minus: scalar - vector,
                }
            }
            GroundState::F1m0 => {
                let (half, three_half) = self.couplings(true);
                let scalar = (half + 2.0 * three_half) / 12.0;
                let vector = -2.0 * r / 12.0 * (half - three_half);
                LevelCoefficients {
                    plus: scalar + vector,
                    minus: scalar - vector,
                }
            }
            GroundState::F1mPlus1 => {
                let (half, three_half) = self.couplings(true);
                LevelCoefficients {
                    plus: 3.0 * three_half / 12.0,
                    minus: (2.0 * half + three_half) / 12.0,
                }
            }
            GroundState::F1mMinus1 => {
                let (half, three_half) = self.couplings(true);
                LevelCoefficients {
                    plus: (2.0 * half + three_half) / 12.0,
                    minus: 3.0 * three_half / 12.0,
                }
            }
        }
    }

    pub fn level_shift(&self, state: GroundState, pol: &PolarizationState) -> Result<f64> {
        check_transverse(pol)?;
        Ok(self.level_coefficients(state).shift(pol, self.intensity()))
    }

    /// Fourth-order coefficient 𝒞/(72 Δ_min)·(g²₁/₂/Δ₁/₂ − g²₃/₂/Δ₃/₂)² in Hz
    /// per (W/m²)², before the (|ε₊|² − |ε₋|²)² factor.
    pub fn fourth_order_coefficient(&self) -> Result<f64> {
        let comb = self.comb()?;
        let v = self.vector_coupling();
        Ok(comb.comb_factor / (72.0 * comb.delta_min_hz()) * v * v)
    }

    pub fn coefficients(&self, qubit: QubitKind, pol: &PolarizationState) -> Result<ShiftCoefficients> {
        check_transverse(pol)?;
        let s = pol.circular_weight();
        let x = pol.helicity_imbalance();
        match qubit {
            QubitKind::Clock => {
                let upper = self.level_coefficients(GroundState::F1m0);
                let lower = self.level_coefficients(GroundState::F0m0);
                Ok(ShiftCoefficients {
                    scalar: s * (upper.scalar() - lower.scalar()),
                    vector: x * (upper.vector() - lower.vector()),
                    fourth: x * x * self.fourth_order_coefficient()?,
                })
            }
            QubitKind::ZeemanPlus | QubitKind::ZeemanMinus => {
                let sign = if qubit == QubitKind::ZeemanPlus { 1.0 } else { -1.0 };
                Ok(ShiftCoefficients {
                    scalar: 0.0,
                    vector: sign * (-x) * self.vector_coupling() / 12.0,
                    fourth: 0.0,
                })
            }
        }
    }

    pub fn differential_shift(&self, qubit: QubitKind, pol: &PolarizationState) -> Result<ShiftBreakdown> {
        Ok(self.coefficients(qubit, pol)?.breakdown(self.intensity()))
    }

    /// Closed-form clock second-order differential, leading order in ω_hf/Δ:
    /// scalar `(|ε₊|²+|ε₋|²)(ω_hf/12)(g²₁/₂/Δ²₁/₂ + 2g²₃/₂/Δ²₃/₂) I` and vector
    /// `−(|ε₊|²−|ε₋|²)(4R/12)(g²₁/₂/Δ₁/₂ − g²₃/₂/Δ₃/₂) I`.
    pub fn clock_closed_form(&self, pol: &PolarizationState) -> Result<(f64, f64)> {
        check_transverse(pol)?;
        let (d_half, d_three_half, hf) = self.detunings_hz();
        let g_half = self.species.g2_half;
        let g_three_half = self.species.g2_three_half;
        let i = self.intensity();
        let scalar = pol.circular_weight() * hf / 12.0
            * (g_half / (d_half * d_half) + 2.0 * g_three_half / (d_three_half * d_three_half))
            * i;
        let vector = -pol.helicity_imbalance() * 4.0 * self.mixing_ratio / 12.0 * self.vector_coupling() * i;
        Ok((scalar, vector))
    }

    /// Clock shift as a quadratic in x at the model's intensity.
    pub fn clock_quadratic(&self) -> Result<ClockQuadratic> {
        let upper = self.level_coefficients(GroundState::F1m0);
        let lower = self.level_coefficients(GroundState::F0m0);
        let i = self.intensity();
        Ok(ClockQuadratic {
            constant: (upper.scalar() - lower.scalar()) * i,
            linear: (upper.vector() - lower.vector()) * i,
            quadratic: self.fourth_order_coefficient()? * i * i,
        })
    }
}

fn check_transverse(pol: &PolarizationState) -> Result<()> {
    let pi_sq = pol.pi_sq();
    if pi_sq > PI_POPULATION_TOLERANCE {
        return Err(Error::UnsupportedGeometry { eps_pi_sq: pi_sq });
    }
    Ok(())
}

/// Second-order shift of one ground sublevel in Hz.
pub fn second_order_level_shift(
    state: GroundState,
    pol: &PolarizationState,
    species: &IonSpecies,
    laser: &LaserField,
    field: &MagneticField,
) -> Result<f64> {
    ShiftModel::new(species, laser, field)?.level_shift(state, pol)
}

/// Closed-form clock second-order differential `(scalar, vector)` in Hz.
pub fn clock_second_order_differential(
    pol: &PolarizationState,
    species: &IonSpecies,
    laser: &LaserField,
    field: &MagneticField,
) -> Result<(f64, f64)> {
    ShiftModel::new(species, laser, field)?.clock_closed_form(pol)
}

/// Fourth-order clock shift in Hz.
pub fn fourth_order_shift(pol: &PolarizationState, species: &IonSpecies, laser: &LaserField) -> Result<f64> {
    check_transverse(pol)?;
    let model = ShiftModel::new(species, laser, &MagneticField::zero())?;
    let x = pol.helicity_imbalance();
    let i = laser.intensity;
    Ok(x * x * model.fourth_order_coefficient()? * i * i)
}

pub fn differential_shift(
    qubit: QubitKind,
    pol: &PolarizationState,
    species: &IonSpecies,
    laser: &LaserField,
    field: &MagneticField,
) -> Result<ShiftBreakdown> {
    ShiftModel::new(species, laser, field)?.differential_shift(qubit, pol)
}

/// Vector polarizability of the F = 1 stretched states relative to |0,0⟩, in
/// Hz per (V/m)², defined so that `¼|E|² α^v` reproduces `(1/12)(g²₁/₂/Δ₁/₂ −
/// g²₃/₂/Δ₃/₂) I` with `I = ½ c ε₀ |E|²`.
pub fn vector_polarizability(species: &IonSpecies) -> f64 {
    let v = species.g2_half / species.delta_half_hz() - species.g2_three_half / species.delta_three_half_hz();
    v / 6.0 * SPEED_OF_LIGHT * VACUUM_PERMITTIVITY
}

/// Zeeman-qubit shift from the spherical-tensor form
/// `¼|E|² (|ε₋|² − |ε₊|²) α^v m_F/F`. Scalar polarizability cancels in the
/// differential and the tensor part vanishes for J = ½.
pub fn vector_polarizability_shift(
    qubit: QubitKind,
    pol: &PolarizationState,
    species: &IonSpecies,
    laser: &LaserField,
) -> Result<f64> {
    check_transverse(pol)?;
    let m_f = match qubit {
        QubitKind::Clock => {
            return Err(Error::Domain(
                "vector polarizability shift is defined for the Zeeman qubits only".into(),
            ))
        }
        QubitKind::ZeemanPlus => 1.0,
        QubitKind::ZeemanMinus => -1.0,
    };
    let f = 1.0;
    let field_sq = 2.0 * laser.intensity / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY);
    Ok(0.25 * field_sq * (pol.minus_sq() - pol.plus_sq()) * vector_polarizability(species) * m_f / f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressing::{DipoleTable, ExcitedLevel, Helicity};
    use crate::ion_params::builtin_yb171;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gauss(b: f64) -> MagneticField {
        MagneticField::from_gauss(b).unwrap()
    }

    fn unit_laser() -> LaserField {
        // I = 1 W/m²
        LaserField::new(std::f64::consts::PI * 1e-10, 1e-5, 12.883e-12, 118.993e6).unwrap()
    }

    fn experiment_model(b: f64) -> ShiftModel {
        ShiftModel::new(&builtin_yb171(), &LaserField::yb171_experiment(), &gauss(b)).unwrap()
    }

    /// Independent brute-force comb sum over a fixed wide window.
    fn brute_force_comb(species: &IonSpecies, laser: &LaserField, half_width: i64) -> f64 {
        let two_pi_nu = 2.0 * std::f64::consts::PI * laser.rep_rate;
        let n = (species.omega_hf / two_pi_nu).round() as i64;
        let dmin = species.omega_hf - n as f64 * two_pi_nu;
        let mut terms: Vec<f64> = (-half_width..=half_width)
            .map(|j| {
                let k = j - n;
                let x = j as f64 * std::f64::consts::PI * laser.rep_rate * laser.pulse_duration;
                (1.0 / x.cosh()).powi(2) / (1.0 - 2.0 * std::f64::consts::PI * k as f64 * laser.rep_rate / dmin)
            })
            .collect();
        terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        terms.iter().sum()
    }

    #[test]
    fn comb_spec_for_yb_defaults() {
        let spec = comb_spec(&builtin_yb171(), &LaserField::yb171_experiment()).unwrap();
        assert_eq!(spec.n, 106);
        // 12642.812 − 106 × 118.993 = 29.554 MHz
        assert_relative_eq!(spec.delta_min_hz(), 29.554e6, max_relative = 1e-9);
        assert!((spec.comb_factor - 0.971).abs() < 0.002);
        // 1/(π ν τ) · acosh(1e7) ≈ 3500 lines per side
        assert!(spec.terms > 6000 && spec.terms < 8000, "{}", spec.terms);
    }

    #[test]
    fn comb_factor_matches_wider_brute_force() {
        let yb = builtin_yb171();
        for pulse_ps in [12.883, 5.0, 30.0] {
            let laser = LaserField::yb171_experiment().with_pulse_duration(pulse_ps * 1e-12).unwrap();
            let spec = comb_spec(&yb, &laser).unwrap();
            let wide = brute_force_comb(&yb, &laser, 10 * (spec.terms as i64 / 2));
            assert_relative_eq!(spec.comb_factor, wide, max_relative = 1e-6);
        }
    }

    #[test]
    fn comb_factor_collapses_for_long_pulses() {
        let yb = builtin_yb171();
        let base = LaserField::yb171_experiment();
        let mut previous = f64::INFINITY;
        for step in 0..=18 {
            let factor = 1.0 + 0.5 * step as f64;
            let laser = base.with_pulse_duration(base.pulse_duration * factor).unwrap();
            let c = comb_spec(&yb, &laser).unwrap().comb_factor;
            assert!(c < previous, "not monotone at {factor}");
            previous = c;
        }
        assert!(previous < 0.11);
    }

    #[test]
    fn comb_exactly_on_resonance_is_singular() {
        let mut yb = builtin_yb171();
        let laser = LaserField::yb171_experiment();
        yb.omega_hf = 106.0 * 2.0 * std::f64::consts::PI * laser.rep_rate;
        assert!(matches!(comb_spec(&yb, &laser), Err(Error::CombSingularity { .. })));
    }

    #[test]
    fn zero_field_linear_f0_level_shift() {
        let yb = builtin_yb171();
        let laser = LaserField::yb171_experiment();
        let got = second_order_level_shift(GroundState::F0m0, &PolarizationState::linear(), &yb, &laser, &gauss(0.0))
            .unwrap();
        let expected = (yb.g2_half / yb.delta_half_hz() + 2.0 * yb.g2_three_half / yb.delta_three_half_hz()) / 12.0
            * laser.intensity;
        assert_relative_eq!(got, expected, max_relative = 1e-14);
    }

    /// Clock and Zeeman coefficients regenerated from the species constants.
    /// Reference values from an independent evaluation of the same formulas.
    #[test]
    fn unit_intensity_coefficients() {
        let yb = builtin_yb171();
        let laser = unit_laser();
        assert_relative_eq!(laser.intensity, 1.0, max_relative = 1e-12);
        let m = ShiftModel::new(&yb, &laser, &gauss(11.343)).unwrap();

        let (scalar, vector) = m.clock_closed_form(&PolarizationState::sigma_plus()).unwrap();
        assert_relative_eq!(scalar, 5.335532e-7, max_relative = 1e-6);
        assert_relative_eq!(vector, -7.028147e-6, max_relative = 1e-6);
        assert_relative_eq!(m.fourth_order_coefficient().unwrap(), 1.286452e-13, max_relative = 1e-5);

        let z = m.differential_shift(QubitKind::ZeemanPlus, &PolarizationState::sigma_minus()).unwrap();
        assert_relative_eq!(z.total, 1.3992168e-3, max_relative = 1e-6);
        assert_relative_eq!(z.total, 1.40e-3, max_relative = 5e-3);

        // level-difference route agrees with the closed form to O(ω_hf/Δ)
        let exact = m.differential_shift(QubitKind::Clock, &PolarizationState::sigma_plus()).unwrap();
        assert_relative_eq!(exact.second_scalar, scalar, max_relative = 1e-3);
        assert_relative_eq!(exact.second_vector, vector, max_relative = 1e-3);
    }

    #[test]
    fn clock_vector_part_sign_and_linearity_in_b() {
        let yb = builtin_yb171();
        let laser = unit_laser();
        let one = clock_second_order_differential(&PolarizationState::sigma_minus(), &yb, &laser, &gauss(11.343))
            .unwrap();
        assert!(one.1 > 0.0);
        assert_relative_eq!(one.1, 7.028147e-6, max_relative = 1e-6);
        let two = clock_second_order_differential(&PolarizationState::sigma_minus(), &yb, &laser, &gauss(22.686))
            .unwrap();
        assert_relative_eq!(two.1, 2.0 * one.1, max_relative = 1e-14);
        let lin = clock_second_order_differential(&PolarizationState::linear(), &yb, &laser, &gauss(11.343)).unwrap();
        assert!(lin.1.abs() < 1e-20);
    }

    #[test]
    fn experimental_point_clock_total() {
        // 180.6 + 2379 + 14736 Hz at I = 3.3845e8 W/m², pure σ₋
        let s = experiment_model(11.343)
            .differential_shift(QubitKind::Clock, &PolarizationState::sigma_minus())
            .unwrap();
        assert!(s.second_scalar > 0.0 && s.second_vector > 0.0 && s.fourth > 0.0);
        assert_relative_eq!(s.second_scalar, 180.6, max_relative = 2e-3);
        assert_relative_eq!(s.second_vector, 2378.6, max_relative = 2e-3);
        assert_relative_eq!(s.fourth, 14736.0, max_relative = 2e-3);
        assert_relative_eq!(s.total, 1.78e4, max_relative = 0.05);
    }

    #[test]
    fn fourth_order_examples() {
        let yb = builtin_yb171();
        let laser = LaserField::yb171_experiment();
        assert_eq!(fourth_order_shift(&PolarizationState::linear(), &yb, &laser).unwrap(), 0.0);
        let one = fourth_order_shift(&PolarizationState::sigma_plus(), &yb, &laser).unwrap();
        let doubled = laser.with_power(2.0 * laser.power).unwrap();
        let four = fourth_order_shift(&PolarizationState::sigma_plus(), &yb, &doubled).unwrap();
        assert_relative_eq!(four, 4.0 * one, max_relative = 1e-12);
    }

    #[test]
    fn zeeman_sign_mirror() {
        let m = experiment_model(11.343);
        let plus = m.differential_shift(QubitKind::ZeemanPlus, &PolarizationState::sigma_minus()).unwrap();
        let minus = m.differential_shift(QubitKind::ZeemanMinus, &PolarizationState::sigma_minus()).unwrap();
        assert!(plus.total > 0.0);
        assert_eq!(plus.total, -minus.total);
        assert_eq!(plus.fourth, 0.0);
        // 1.3992e-3 Hz/(W/m²) × 3.3845e8 W/m²
        assert_relative_eq!(plus.total, 4.7357e5, max_relative = 1e-3);
    }

    #[test]
    fn zero_power_gives_zero_shift() {
        let yb = builtin_yb171();
        let laser = LaserField::yb171_experiment().with_power(0.0).unwrap();
        for q in QubitKind::ALL {
            let s = differential_shift(q, &PolarizationState::sigma_minus(), &yb, &laser, &gauss(11.343)).unwrap();
            assert_eq!(s.total, 0.0);
        }
    }

    #[test]
    fn pi_component_rejected() {
        let mut pol = PolarizationState::linear();
        pol.eps_plus *= 0.5f64.sqrt();
        pol.eps_minus *= 0.5f64.sqrt();
        pol.eps_pi = num_complex::Complex64::new(0.5f64.sqrt(), 0.0);
        let m = experiment_model(11.343);
        assert!(matches!(
            m.differential_shift(QubitKind::Clock, &pol),
            Err(Error::UnsupportedGeometry { .. })
        ));
        assert!(m.level_shift(GroundState::F0m0, &pol).is_err());
    }

    #[test]
    fn vector_polarizability_requires_zeeman() {
        let r = vector_polarizability_shift(
            QubitKind::Clock,
            &PolarizationState::sigma_plus(),
            &builtin_yb171(),
            &LaserField::yb171_experiment(),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    /// Clock level shifts rebuilt from the squared dressed dipole elements,
    /// `Σ_e |d_e|²/4 · g²_J/(Δ_J − E_g)`, keep all orders in R. They match
    /// the linear-in-R engine up to O(R²).
    #[test]
    fn dipole_table_route_matches_engine_to_r_squared() {
        let yb = builtin_yb171();
        let laser = unit_laser();
        for b in [0.0, 11.343, 50.0] {
            let m = ShiftModel::new(&yb, &laser, &gauss(b)).unwrap();
            let r = m.mixing_ratio();
            let table = DipoleTable::new(r).unwrap();
            for ground in [GroundState::F0m0, GroundState::F1m0] {
                let offset = if ground == GroundState::F1m0 { yb.omega_hf_hz() } else { 0.0 };
                let coupling = |e: ExcitedLevel| {
                    if e.is_p_half() {
                        yb.g2_half / (yb.delta_half_hz() - offset)
                    } else {
                        yb.g2_three_half / (yb.delta_three_half_hz() - offset)
                    }
                };
                let per_pol = |pol: Helicity| -> f64 {
                    ExcitedLevel::ALL
                        .iter()
                        .map(|&e| {
                            let d = table.get(ground, e, pol).unwrap();
                            d * d / 4.0 * coupling(e)
                        })
                        .sum()
                };
                // h and t have opposite signs, so bound by the absolute sum
                let scale: f64 = ExcitedLevel::ALL.iter().map(|&e| coupling(e).abs()).sum();
                let engine = m.level_coefficients(ground);
                assert!((per_pol(Helicity::SigmaPlus) - engine.plus).abs() <= (r * r + 1e-12) * scale);
                assert!((per_pol(Helicity::SigmaMinus) - engine.minus).abs() <= (r * r + 1e-12) * scale);
            }
        }
    }

    /// The Zeeman differential from the full level shifts differs from the
    /// truncated vector form only by terms of order R and ω_hf/Δ.
    #[test]
    fn zeeman_truncation_error_is_small() {
        let m = experiment_model(11.343);
        let peak = m
            .differential_shift(QubitKind::ZeemanPlus, &PolarizationState::sigma_minus())
            .unwrap()
            .total
            .abs();
        for k in 0..=20 {
            let pol = PolarizationState::from_sigma_plus_fraction(k as f64 / 20.0);
            for q in [QubitKind::ZeemanPlus, QubitKind::ZeemanMinus] {
                let full = m.level_shift(q.upper_state(), &pol).unwrap() - m.level_shift(GroundState::F0m0, &pol).unwrap();
                let truncated = m.differential_shift(q, &pol).unwrap().total;
                assert!((full - truncated).abs() < 5e-3 * peak, "{q:?} at {k}: {full} vs {truncated}");
            }
        }
    }

    fn pol_strategy() -> impl Strategy<Value = PolarizationState> {
        (0.0f64..=1.0).prop_map(PolarizationState::from_sigma_plus_fraction)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn clock_components_equal_level_difference(
            pol in pol_strategy(), b in 0.0f64..50.0, i in 0.0f64..1e9,
        ) {
            let laser = LaserField::new(i * std::f64::consts::PI * 1e-10, 1e-5, 12.883e-12, 118.993e6).unwrap();
            let m = ShiftModel::new(&builtin_yb171(), &laser, &gauss(b)).unwrap();
            let s = m.differential_shift(QubitKind::Clock, &pol).unwrap();
            let upper = m.level_coefficients(GroundState::F1m0);
            let lower = m.level_coefficients(GroundState::F0m0);
            let it = laser.intensity;
            let scalar = pol.circular_weight() * (upper.scalar() - lower.scalar()) * it;
            let vector = pol.helicity_imbalance() * (upper.vector() - lower.vector()) * it;
            let second = m.level_shift(GroundState::F1m0, &pol).unwrap() - m.level_shift(GroundState::F0m0, &pol).unwrap();
            prop_assert!((s.second_scalar - scalar).abs() <= 1e-9 * scalar.abs() + 1e-300);
            prop_assert!((s.second_vector - vector).abs() <= 1e-9 * vector.abs() + 1e-300);
            let sum = s.second_scalar + s.second_vector;
            prop_assert!((sum - second).abs() <= 1e-9 * (s.second_scalar.abs() + s.second_vector.abs()) + 1e-300);
            prop_assert!((s.total - (s.second_scalar + s.second_vector + s.fourth)).abs() <= 1e-9 * s.total.abs());
        }

        #[test]
        fn vector_polarizability_route_matches(pol in pol_strategy(), i in 0.0f64..1e9) {
            let laser = LaserField::new(i * std::f64::consts::PI * 1e-10, 1e-5, 12.883e-12, 118.993e6).unwrap();
            let yb = builtin_yb171();
            for q in [QubitKind::ZeemanPlus, QubitKind::ZeemanMinus] {
                let direct = differential_shift(q, &pol, &yb, &laser, &gauss(11.343)).unwrap().total;
                let tensor = vector_polarizability_shift(q, &pol, &yb, &laser).unwrap();
                prop_assert!((direct - tensor).abs() <= 1e-9 * direct.abs().max(1e-300));
            }
        }

        #[test]
        fn vanishing_components(b in 0.0f64..50.0) {
            let m = experiment_model(b);
            let lin = m.differential_shift(QubitKind::Clock, &PolarizationState::linear()).unwrap();
            prop_assert_eq!(lin.fourth, 0.0);
            prop_assert_eq!(lin.second_vector, 0.0);
            let zero_b = experiment_model(0.0)
                .differential_shift(QubitKind::Clock, &PolarizationState::sigma_minus()).unwrap();
            prop_assert_eq!(zero_b.second_vector, 0.0);
        }
    }
}
