//! Physical constants for the ion, the drive laser and the bias field.
//!
//! Internal units are SI with angular frequencies (rad/s). Linear frequencies,
//! gauss and milliwatts appear only at the boundaries (config files, CLI flags,
//! reported shifts in Hz).
//!
//! The squared coupling strengths `g2_*` are kept in the conventional units of
//! the literature tables, `g² = γ²/(2 Ī)` with the linewidth γ taken as a
//! linear frequency. That puts g² in Hz² per W/m² (equivalently s/kg), so that
//! `g² I / Δ` with Δ in Hz is directly a light shift in Hz.
//!
//! The ¹⁷¹Yb⁺ hyperfine splitting is taken as 12.642812 GHz. Some tabulations
//! print 12.624812 GHz (digit transposition); the 18 MHz difference moves the
//! nearest comb detuning from 29.55 MHz to 11.55 MHz, so it is not cosmetic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Bohr magneton over Planck's constant, in Hz per gauss.
pub const BOHR_MAGNETON_HZ_PER_GAUSS: f64 = 1.399_624_604e6;

pub const TESLA_PER_GAUSS: f64 = 1e-4;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

#[inline]
pub fn hz_to_angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Squared coupling strength g² = γ²/(2Ī) for a linewidth given in rad/s.
pub fn coupling_strength_sq(gamma: f64, isat: f64) -> f64 {
    let gamma_hz = angular_to_hz(gamma);
    gamma_hz * gamma_hz / (2.0 * isat)
}

/// Atomic constants consumed by the light-shift formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub name: String,
    /// Ground-state hyperfine splitting (rad/s).
    pub omega_hf: f64,
    /// ²P₁/₂ spontaneous emission rate (rad/s).
    pub gamma_half: f64,
    /// ²P₃/₂ spontaneous emission rate (rad/s).
    pub gamma_three_half: f64,
    /// Saturation intensities (W/m²).
    pub isat_half: f64,
    pub isat_three_half: f64,
    /// Laser detuning from ²P₁/₂ (rad/s, signed).
    pub delta_half: f64,
    /// Laser detuning from ²P₃/₂ (rad/s, signed).
    pub delta_three_half: f64,
    /// g² for ²P₁/₂ in Hz²·m²/W.
    pub g2_half: f64,
    /// g² for ²P₃/₂ in Hz²·m²/W.
    pub g2_three_half: f64,
}

impl IonSpecies {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_hf", self.omega_hf),
            ("gamma_half", self.gamma_half),
            ("gamma_three_half", self.gamma_three_half),
            ("isat_half", self.isat_half),
            ("isat_three_half", self.isat_three_half),
            ("g2_half", self.g2_half),
            ("g2_three_half", self.g2_three_half),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(field, format!("must be finite and > 0, got {value}")));
            }
        }
        for (field, value) in [
            ("delta_half", self.delta_half),
            ("delta_three_half", self.delta_three_half),
        ] {
            if !value.is_finite() || value == 0.0 {
                return Err(Error::validation(field, format!("must be finite and nonzero, got {value}")));
            }
        }
        Ok(())
    }

    pub fn omega_hf_hz(&self) -> f64 {
        angular_to_hz(self.omega_hf)
    }

    pub fn delta_half_hz(&self) -> f64 {
        angular_to_hz(self.delta_half)
    }

    pub fn delta_three_half_hz(&self) -> f64 {
        angular_to_hz(self.delta_three_half)
    }

    /// Serialize into the flat linear-frequency config schema.
    pub fn to_config(&self) -> SpeciesConfig {
        SpeciesConfig {
            name: self.name.clone(),
            omega_hf_ghz: self.omega_hf_hz() * 1e-9,
            gamma_half_mhz: angular_to_hz(self.gamma_half) * 1e-6,
            gamma_three_half_mhz: angular_to_hz(self.gamma_three_half) * 1e-6,
            isat_half_w_m2: self.isat_half,
            isat_three_half_w_m2: self.isat_three_half,
            delta_half_thz: self.delta_half_hz() * 1e-12,
            delta_three_half_thz: self.delta_three_half_hz() * 1e-12,
            g2_half: Some(self.g2_half),
            g2_three_half: Some(self.g2_three_half),
        }
    }
}

/// The built-in ¹⁷¹Yb⁺ constant set for a 355 nm drive.
pub fn builtin_yb171() -> IonSpecies {
    let gamma_half = hz_to_angular(19.703e6);
    let gamma_three_half = hz_to_angular(25.895e6);
    let isat_half = 510.3;
    let isat_three_half = 950.6;
    IonSpecies {
        name: "171Yb+".to_string(),
        omega_hf: hz_to_angular(12.642_812e9),
        gamma_half,
        gamma_three_half,
        isat_half,
        isat_three_half,
        delta_half: hz_to_angular(33e12),
        delta_three_half: hz_to_angular(-67e12),
        g2_half: coupling_strength_sq(gamma_half, isat_half),
        g2_three_half: coupling_strength_sq(gamma_three_half, isat_three_half),
    }
}

/// On-disk species description. All frequencies are linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesConfig {
    pub name: String,
    #[serde(rename = "omega_hf_GHz")]
    pub omega_hf_ghz: f64,
    #[serde(rename = "gamma_half_MHz")]
    pub gamma_half_mhz: f64,
    #[serde(rename = "gamma_three_half_MHz")]
    pub gamma_three_half_mhz: f64,
    #[serde(rename = "isat_half_W_m2")]
    pub isat_half_w_m2: f64,
    #[serde(rename = "isat_three_half_W_m2")]
    pub isat_three_half_w_m2: f64,
    #[serde(rename = "delta_half_THz")]
    pub delta_half_thz: f64,
    #[serde(rename = "delta_three_half_THz")]
    pub delta_three_half_thz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_half: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_three_half: Option<f64>,
}

impl SpeciesConfig {
    pub fn into_species(self) -> Result<IonSpecies> {
        let gamma_half = hz_to_angular(self.gamma_half_mhz * 1e6);
        let gamma_three_half = hz_to_angular(self.gamma_three_half_mhz * 1e6);
        let species = IonSpecies {
            name: self.name,
            omega_hf: hz_to_angular(self.omega_hf_ghz * 1e9),
            gamma_half,
            gamma_three_half,
            isat_half: self.isat_half_w_m2,
            isat_three_half: self.isat_three_half_w_m2,
            delta_half: hz_to_angular(self.delta_half_thz * 1e12),
            delta_three_half: hz_to_angular(self.delta_three_half_thz * 1e12),
            g2_half: self
                .g2_half
                .unwrap_or_else(|| coupling_strength_sq(gamma_half, self.isat_half_w_m2)),
            g2_three_half: self
                .g2_three_half
                .unwrap_or_else(|| coupling_strength_sq(gamma_three_half, self.isat_three_half_w_m2)),
        };
        species.validate()?;
        Ok(species)
    }
}

const REQUIRED_NUMERIC_KEYS: [&str; 7] = [
    "omega_hf_GHz",
    "gamma_half_MHz",
    "gamma_three_half_MHz",
    "isat_half_W_m2",
    "isat_three_half_W_m2",
    "delta_half_THz",
    "delta_three_half_THz",
];

const OPTIONAL_NUMERIC_KEYS: [&str; 2] = ["g2_half", "g2_three_half"];

/// Parse a JSON species description.
///
/// Derived g² values are recomputed from γ and Ī unless given explicitly.
pub fn load_species(config_text: &str) -> Result<IonSpecies> {
    let value: Value = serde_json::from_str(config_text)
        .map_err(|e| Error::schema("<document>", format!("not valid JSON: {e}")))?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::schema("<document>", "expected a JSON object"))?;

    for key in map.keys() {
        let known = key == "name"
            || REQUIRED_NUMERIC_KEYS.contains(&key.as_str())
            || OPTIONAL_NUMERIC_KEYS.contains(&key.as_str());
        if !known {
            return Err(Error::schema(key, "unknown key"));
        }
    }

    let name = match map.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::schema("name", "expected a string")),
        None => return Err(Error::schema("name", "missing required key")),
    };
    let num = |key: &str| -> Result<f64> {
        match map.get(key) {
            Some(v) => number(key, v),
            None => Err(Error::schema(key, "missing required key")),
        }
    };
    let opt = |key: &str| -> Result<Option<f64>> {
        map.get(key).map(|v| number(key, v)).transpose()
    };

    SpeciesConfig {
        name,
        omega_hf_ghz: num("omega_hf_GHz")?,
        gamma_half_mhz: num("gamma_half_MHz")?,
        gamma_three_half_mhz: num("gamma_three_half_MHz")?,
        isat_half_w_m2: num("isat_half_W_m2")?,
        isat_three_half_w_m2: num("isat_three_half_W_m2")?,
        delta_half_thz: num("delta_half_THz")?,
        delta_three_half_thz: num("delta_three_half_THz")?,
        g2_half: opt("g2_half")?,
        g2_three_half: opt("g2_three_half")?,
    }
    .into_species()
}

fn number(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::schema(key, format!("expected a number, got {v}")))
}

/// Pulsed drive laser at the ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserField {
    /// Optical power (W).
    pub power: f64,
    /// 1/e² intensity radius (m).
    pub waist: f64,
    /// Pulse duration (s).
    pub pulse_duration: f64,
    /// Repetition rate (Hz).
    pub rep_rate: f64,
    /// Peak intensity P/(π w₀²) (W/m²).
    pub intensity: f64,
}

impl LaserField {
    pub fn new(power: f64, waist: f64, pulse_duration: f64, rep_rate: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::validation("power", format!("must be finite and >= 0, got {power}")));
        }
        for (field, value) in [
            ("waist", waist),
            ("pulse_duration", pulse_duration),
            ("rep_rate", rep_rate),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(field, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(LaserField {
            power,
            waist,
            pulse_duration,
            rep_rate,
            intensity: power / (PI * waist * waist),
        })
    }

    /// Convenience constructor in lab units: mW, µm, ps, MHz.
    pub fn from_lab_units(power_mw: f64, waist_um: f64, pulse_ps: f64, rep_rate_mhz: f64) -> Result<Self> {
        Self::new(power_mw * 1e-3, waist_um * 1e-6, pulse_ps * 1e-12, rep_rate_mhz * 1e6)
    }

    /// 52.1 mW focused to 7 µm, 12.883 ps pulses at 118.993 MHz.
    pub fn yb171_experiment() -> Self {
        Self::from_lab_units(52.1, 7.0, 12.883, 118.993).expect("valid defaults")
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(power, self.waist, self.pulse_duration, self.rep_rate)
    }

    pub fn with_pulse_duration(&self, pulse_duration: f64) -> Result<Self> {
        Self::new(self.power, self.waist, pulse_duration, self.rep_rate)
    }
}

/// Static bias field, always parallel to the laser propagation axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    /// Magnitude in tesla.
    pub magnitude: f64,
}

impl MagneticField {
    pub fn from_tesla(magnitude: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::validation("magnitude", format!("must be finite and >= 0, got {magnitude}")));
        }
        Ok(MagneticField { magnitude })
    }

    pub fn from_gauss(gauss: f64) -> Result<Self> {
        Self::from_tesla(gauss * TESLA_PER_GAUSS)
    }

    pub fn zero() -> Self {
        MagneticField { magnitude: 0.0 }
    }

    pub fn gauss(&self) -> f64 {
        self.magnitude / TESLA_PER_GAUSS
    }

    /// Electron Zeeman energy μ_B·B as an angular frequency.
    pub fn zeeman_angular(&self) -> f64 {
        hz_to_angular(BOHR_MAGNETON_HZ_PER_GAUSS * self.gauss())
    }
}
