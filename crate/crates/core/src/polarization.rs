//! Jones-calculus model of the half-wave-plate / quarter-wave-plate chain.
//!
//! Circular basis convention: `E_σ+ = (1, −i)/√2` and `E_σ− = (1, +i)/√2` in
//! the lab (x, y) basis, so that the spherical amplitudes are
//! `ε± = (ex ± i·ey)/√2`. With the QWP fast axis horizontal and a horizontal
//! input, a HWP at θ = 22.5° gives pure σ₋ and θ = 67.5° gives pure σ₊. Other
//! texts use the opposite handedness; swapping it mirrors every θ-profile
//! about 45°.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type JonesMatrix = Matrix2<Complex64>;

/// Field amplitudes in the lab linear basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub ex: Complex64,
    pub ey: Complex64,
}

impl JonesVector {
    pub fn new(ex: Complex64, ey: Complex64) -> Self {
        JonesVector { ex, ey }
    }

    pub fn horizontal() -> Self {
        JonesVector::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn vertical() -> Self {
        JonesVector::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    pub fn apply(&self, m: &JonesMatrix) -> Self {
        let v = m * Vector2::new(self.ex, self.ey);
        JonesVector::new(v[0], v[1])
    }

    /// Remove the global phase: the first nonzero component becomes real-positive.
    pub fn phase_normalized(&self) -> Self {
        let pivot = if self.ex.norm() > 1e-15 { self.ex } else { self.ey };
        if pivot.norm() == 0.0 {
            return *self;
        }
        let phase = pivot.conj() / pivot.norm();
        JonesVector::new(self.ex * phase, self.ey * phase)
    }

    pub fn approx_eq_up_to_phase(&self, other: &JonesVector, tol: f64) -> bool {
        let a = self.phase_normalized();
        let b = other.phase_normalized();
        (a.ex - b.ex).norm() <= tol && (a.ey - b.ey).norm() <= tol
    }
}

/// An ideal linear retarder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlate {
    /// Phase delay between fast and slow axes (rad).
    pub retardance: f64,
    /// Fast-axis angle from horizontal (rad).
    pub fast_axis_angle: f64,
}

impl WavePlate {
    pub fn half_wave(fast_axis_angle: f64) -> Self {
        WavePlate {
            retardance: PI,
            fast_axis_angle,
        }
    }

    pub fn quarter_wave(fast_axis_angle: f64) -> Self {
        WavePlate {
            retardance: FRAC_PI_2,
            fast_axis_angle,
        }
    }
}

/// Jones matrix of a retarder with its fast axis at θ:
///
/// ```text
/// [ cos²θ + sin²θ e^{iδ}     sinθ cosθ (1 − e^{iδ}) ]
/// [ sinθ cosθ (1 − e^{iδ})   sin²θ + cos²θ e^{iδ}   ]
/// ```
pub fn jones_matrix(plate: WavePlate) -> JonesMatrix {
    let (s, c) = plate.fast_axis_angle.sin_cos();
    let phase = Complex64::from_polar(1.0, plate.retardance);
    let one = Complex64::new(1.0, 0.0);
    let off = (one - phase) * (s * c);
    Matrix2::new(
        one * (c * c) + phase * (s * s),
        off,
        off,
        one * (s * s) + phase * (c * c),
    )
}

/// Propagate `input` through the HWP and then the QWP.
pub fn chain_hwp_qwp(theta_hwp: f64, theta_qwp: f64, input: JonesVector) -> JonesVector {
    let hwp = jones_matrix(WavePlate::half_wave(theta_hwp));
    let qwp = jones_matrix(WavePlate::quarter_wave(theta_qwp));
    input.apply(&(qwp * hwp))
}

/// Drive polarization in the σ₊ / σ₋ / π basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    #[serde(with = "complex_pair")]
    pub eps_plus: Complex64,
    #[serde(with = "complex_pair")]
    pub eps_minus: Complex64,
    #[serde(with = "complex_pair")]
    pub eps_pi: Complex64,
}

impl PolarizationState {
    /// Purely transverse state with the given σ₊ population.
    pub fn from_sigma_plus_fraction(plus_fraction: f64) -> Self {
        let p = plus_fraction.clamp(0.0, 1.0);
        PolarizationState {
            eps_plus: Complex64::new(p.sqrt(), 0.0),
            eps_minus: Complex64::new((1.0 - p).sqrt(), 0.0),
            eps_pi: Complex64::new(0.0, 0.0),
        }
    }

    pub fn sigma_plus() -> Self {
        Self::from_sigma_plus_fraction(1.0)
    }

    pub fn sigma_minus() -> Self {
        Self::from_sigma_plus_fraction(0.0)
    }

    pub fn linear() -> Self {
        Self::from_sigma_plus_fraction(0.5)
    }

    /// State produced by a horizontal input through HWP(θ) then QWP(θ_qwp).
    pub fn from_wave_plates(theta_hwp: f64, theta_qwp: f64) -> Self {
        to_spherical(&chain_hwp_qwp(theta_hwp, theta_qwp, JonesVector::horizontal()))
    }

    /// HWP at `theta_deg` relative to a QWP held at 0°.
    pub fn from_relative_angle_deg(theta_deg: f64) -> Self {
        Self::from_wave_plates(theta_deg.to_radians(), 0.0)
    }

    pub fn plus_sq(&self) -> f64 {
        self.eps_plus.norm_sqr()
    }

    pub fn minus_sq(&self) -> f64 {
        self.eps_minus.norm_sqr()
    }

    pub fn pi_sq(&self) -> f64 {
        self.eps_pi.norm_sqr()
    }

    /// |ε₊|² + |ε₋|².
    pub fn circular_weight(&self) -> f64 {
        self.plus_sq() + self.minus_sq()
    }

    /// |ε₊|² − |ε₋|², the helicity imbalance.
    pub fn helicity_imbalance(&self) -> f64 {
        self.plus_sq() - self.minus_sq()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.plus_sq() + self.minus_sq() + self.pi_sq()
    }

    /// Exchange the σ₊ and σ₋ amplitudes.
    pub fn mirrored(&self) -> Self {
        PolarizationState {
            eps_plus: self.eps_minus,
            eps_minus: self.eps_plus,
            eps_pi: self.eps_pi,
        }
    }
}

/// Project a transverse Jones vector on the circular basis.
///
/// The beam is taken to propagate along B, so the π amplitude is zero.
pub fn to_spherical(v: &JonesVector) -> PolarizationState {
    let i = Complex64::i();
    PolarizationState {
        eps_plus: (v.ex + i * v.ey) * FRAC_1_SQRT_2,
        eps_minus: (v.ex - i * v.ey) * FRAC_1_SQRT_2,
        eps_pi: Complex64::new(0.0, 0.0),
    }
}

/// Helicity imbalance x = |ε₊|² − |ε₋|² for a HWP at θ behind a QWP at 0°,
/// in closed form: x = −sin 4θ.
pub fn helicity_imbalance_closed_form(theta: f64) -> f64 {
    -(4.0 * theta).sin()
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
