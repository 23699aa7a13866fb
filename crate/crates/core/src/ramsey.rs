//! Ramsey fringes and contrast decay under quasi-static intensity noise.
//!
//! Each shot draws one intensity I' = max(0, I(1 + σ z)) with z ~ N(0, 1) and
//! accumulates the phase 2π δE(I') τ. Pulses are instantaneous and ideal. The
//! contrast at each τ comes from an eight-phase analysis scan of the
//! shot-averaged fringe, evaluated on expectation values (no projection
//! noise).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::PolarizationState;
use crate::stark::{QubitKind, ShiftCoefficients, ShiftModel};

use std::f64::consts::{E, PI, TAU};

pub const MIN_SHOTS: usize = 100;

const ANALYSIS_PHASES: usize = 8;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Free-evolution times of a Ramsey scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseySequence {
    /// Strictly increasing, positive (s).
    pub free_evolution_times: Vec<f64>,
    /// Deliberate microwave detuning added to the light shift (Hz).
    pub detuning_offset: f64,
    /// Only instantaneous ideal π/2 pulses are modelled.
    pub ideal_pulses: bool,
}

impl RamseySequence {
    pub fn new(free_evolution_times: Vec<f64>) -> Result<Self> {
        if free_evolution_times.is_empty() {
            return Err(Error::validation("free_evolution_times", "at least one τ is required"));
        }
        if free_evolution_times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::validation("free_evolution_times", "all τ must be finite and > 0"));
        }
        if free_evolution_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("free_evolution_times", "τ must be strictly increasing"));
        }
        Ok(RamseySequence {
            free_evolution_times,
            detuning_offset: 0.0,
            ideal_pulses: true,
        })
    }

    pub fn with_detuning(mut self, detuning_hz: f64) -> Self {
        self.detuning_offset = detuning_hz;
        self
    }

    /// `count` evenly spaced times ending at `tau_max`.
    pub fn linear(tau_max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::validation("count", "need at least one point"));
        }
        Self::new((1..=count).map(|k| tau_max * k as f64 / count as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Fractional RMS of the per-shot intensity.
    pub relative_intensity_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(relative_intensity_sigma: f64, seed: u64) -> Result<Self> {
        if !(relative_intensity_sigma.is_finite() && relative_intensity_sigma >= 0.0) {
            return Err(Error::validation(
                "relative_intensity_sigma",
                format!("must be finite and >= 0, got {relative_intensity_sigma}"),
            ));
        }
        Ok(NoiseModel { relative_intensity_sigma, seed })
    }
}

/// Laser-independent decay multiplying the simulated envelope,
/// `exp(−(τ/t2)^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineDecay {
    pub t2: f64,
    pub exponent: f64,
}

impl BaselineDecay {
    pub fn new(t2: f64, exponent: f64) -> Result<Self> {
        if !(t2.is_finite() && t2 > 0.0) {
            return Err(Error::validation("baseline_t2", format!("must be finite and > 0, got {t2}")));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::validation("baseline_exponent", format!("must be > 0, got {exponent}")));
        }
        Ok(BaselineDecay { t2, exponent })
    }

    pub fn envelope(&self, tau: f64) -> f64 {
        (-(tau / self.t2).powf(self.exponent)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastPoint {
    pub tau_s: f64,
    pub contrast: f64,
    pub contrast_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub points: Vec<ContrastPoint>,
    pub shots: usize,
    pub seed: u64,
}

/// ½(1 + cos(2π δ τ + φ)).
pub fn fringe(shift_hz: f64, tau: f64, phase: f64) -> f64 {
    0.5 * (1.0 + (TAU * shift_hz * tau + phase).cos())
}

/// Noiseless Ramsey probability with the light shift as the only detuning.
pub fn fringe_probability(
    model: &ShiftModel,
    qubit: QubitKind,
    pol: &PolarizationState,
    tau: f64,
    phase: f64,
) -> Result<f64> {
    Ok(fringe(model.differential_shift(qubit, pol)?.total, tau, phase))
}

/// Fringe frequency (Hz) of `P(τ)` sampled on a uniform grid.
///
/// A periodogram locates the peak to within a bin, golden-section search on
/// the same periodogram refines it.
pub fn fringe_frequency(taus: &[f64], probabilities: &[f64]) -> Result<f64> {
    if taus.len() != probabilities.len() || taus.len() < 8 {
        return Err(Error::Domain("need at least 8 matching (τ, P) samples".into()));
    }
    let span = taus[taus.len() - 1] - taus[0];
    let step = span / (taus.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Domain("τ samples must be increasing".into()));
    }
    let power = |f: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &p) in taus.iter().zip(probabilities) {
            let (s, c) = (TAU * f * t).sin_cos();
            re += (2.0 * p - 1.0) * c;
            im += (2.0 * p - 1.0) * s;
        }
        re * re + im * im
    };
    let nyquist = 0.5 / step;
    let df = 0.25 / span;
    let bins = (nyquist / df).ceil() as usize;
    let (best_bin, _) = (0..=bins)
        .map(|k| (k, power(k as f64 * df)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let lo = ((best_bin as f64 - 1.0) * df).max(0.0);
    let hi = (best_bin as f64 + 1.0) * df;
    Ok(golden_min(|f| -power(f), lo, hi, 1e-12 * hi.max(1.0)).0)
}

/// Contrast versus τ from a Monte Carlo average over shots.
///
/// Every τ index owns an independent ChaCha8 stream derived from the seed, so
/// the table does not depend on thread scheduling.
pub fn simulate_decay(
    model: &ShiftModel,
    qubit: QubitKind,
    pol: &PolarizationState,
    noise: &NoiseModel,
    shots: usize,
    sequence: &RamseySequence,
    baseline: Option<&BaselineDecay>,
) -> Result<DecayTable> {
    if shots == 0 {
        return Err(Error::Domain("shot count must be positive".into()));
    }
    if shots < MIN_SHOTS {
        return Err(Error::validation("shots", format!("need at least {MIN_SHOTS}, got {shots}")));
    }
    let noise = NoiseModel::new(noise.relative_intensity_sigma, noise.seed)?;
    let coefficients = model.coefficients(qubit, pol)?;
    let intensity = model.intensity();

    let points = sequence
        .free_evolution_times
        .par_iter()
        .enumerate()
        .map(|(index, &tau)| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(index as u64);
            let phases: Vec<f64> = (0..shots)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let shot_intensity = (intensity * (1.0 + noise.relative_intensity_sigma * z)).max(0.0);
                    let detuning = coefficients.total(shot_intensity) + sequence.detuning_offset;
                    TAU * detuning * tau
                })
                .collect();
            let (contrast, err) = phase_scan_contrast(&phases);
            let floor = baseline.map_or(1.0, |b| b.envelope(tau));
            ContrastPoint {
                tau_s: tau,
                contrast: contrast * floor,
                contrast_err: err * floor,
            }
        })
        .collect();

    Ok(DecayTable { points, shots, seed: noise.seed })
}

/// Contrast of the shot-averaged fringe from an eight-phase analysis scan,
/// and its standard error across shots.
fn phase_scan_contrast(phases: &[f64]) -> (f64, f64) {
    let n = phases.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..ANALYSIS_PHASES {
        let analysis = TAU * k as f64 / ANALYSIS_PHASES as f64;
        let mean_p: f64 = phases.iter().map(|&p| 0.5 * (1.0 + (p + analysis).cos())).sum::<f64>() / n;
        let (s, c) = analysis.sin_cos();
        re += (2.0 * mean_p - 1.0) * c;
        im += (2.0 * mean_p - 1.0) * s;
    }
    let scale = 2.0 / ANALYSIS_PHASES as f64;
    let (re, im) = (re * scale, im * scale);
    let contrast = re.hypot(im);

    // per-shot projections on the mean fringe phase
    let mean_phase = im.atan2(re);
    let projections: Vec<f64> = phases.iter().map(|&p| (p + mean_phase).cos()).collect();
    let mean = projections.iter().sum::<f64>() / n;
    let var = projections.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (contrast, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeModel {
    Exponential,
    Gaussian,
}

impl EnvelopeModel {
    pub fn exponent(self) -> f64 {
        match self {
            EnvelopeModel::Exponential => 1.0,
            EnvelopeModel::Gaussian => 2.0,
        }
    }

    pub fn eval(self, tau: f64, t2: f64) -> f64 {
        (-(tau / t2).powf(self.exponent())).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceFit {
    /// 1/e time of the fitted envelope (s).
    pub t2: f64,
    pub model: EnvelopeModel,
    /// Variance of T2 from the linearized least-squares problem (s²).
    pub covariance: f64,
    pub t2_err: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of `exp(−(τ/T2)^p)`, p ∈ {1, 2}, keeping the smaller
/// residual.
pub fn fit_coherence(points: &[ContrastPoint]) -> Result<CoherenceFit> {
    if points.len() < 5 {
        return Err(Error::FitNotConverged(format!(
            "need at least 5 τ points, got {}",
            points.len()
        )));
    }
    let min_contrast = points.iter().map(|p| p.contrast).fold(f64::INFINITY, f64::min);
    if !(min_contrast <= 1.0 / E) {
        let tau_max = points.iter().map(|p| p.tau_s).fold(0.0, f64::max);
        return Err(Error::FitNotConverged(format!(
            "contrast only decays to {min_contrast:.3} by τ = {tau_max:e} s; extend the τ grid past the 1/e point"
        )));
    }

    let tau_min = points.iter().map(|p| p.tau_s).fold(f64::INFINITY, f64::min);
    let tau_max = points.iter().map(|p| p.tau_s).fold(0.0, f64::max);

    let mut best: Option<CoherenceFit> = None;
    for model in [EnvelopeModel::Exponential, EnvelopeModel::Gaussian] {
        let rss = |log_t2: f64| -> f64 {
            let t2 = log_t2.exp();
            points.iter().map(|p| (p.contrast - model.eval(p.tau_s, t2)).powi(2)).sum()
        };
        let (lo, hi) = ((tau_min / 100.0).ln(), (tau_max * 100.0).ln());
        let steps = 400;
        let (k_best, _) = (0..=steps)
            .map(|k| (k, rss(lo + (hi - lo) * k as f64 / steps as f64)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let h = (hi - lo) / steps as f64;
        let centre = lo + h * k_best as f64;
        let (log_t2, sse) = golden_min(rss, centre - h, centre + h, 1e-12);
        let t2 = log_t2.exp();

        // dC/dT2 = C · p (τ/T2)^p / T2
        let p = model.exponent();
        let jtj: f64 = points
            .iter()
            .map(|pt| {
                let c = model.eval(pt.tau_s, t2);
                let d = c * p * (pt.tau_s / t2).powf(p) / t2;
                d * d
            })
            .sum();
        let dof = (points.len() - 1) as f64;
        let covariance = if jtj > 0.0 { sse / dof / jtj } else { f64::INFINITY };
        let fit = CoherenceFit {
            t2,
            model,
            covariance,
            t2_err: covariance.sqrt(),
            residual_rms: (sse / points.len() as f64).sqrt(),
        };
        if !t2.is_finite() {
            continue;
        }
        if best.is_none_or(|b| fit.residual_rms < b.residual_rms) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::FitNotConverged("no envelope model produced a finite T2".into()))
}

/// RMS frequency jitter (Hz) from a fractional intensity noise σ_I, to first
/// order: |d(δE)/dI| σ_I I.
pub fn frequency_jitter(coefficients: &ShiftCoefficients, intensity: f64, sigma: f64) -> f64 {
    coefficients.slope(intensity).abs() * sigma * intensity
}

/// 1/e time of `exp(−½(2π σ_f τ)²) · baseline(τ)`.
pub fn predicted_t2(jitter_hz: f64, baseline: Option<&BaselineDecay>) -> f64 {
    let g = |tau: f64| 0.5 * (TAU * jitter_hz * tau).powi(2) + baseline.map_or(0.0, |b| (tau / b.t2).powf(b.exponent));
    if jitter_hz == 0.0 {
        return baseline.map_or(f64::INFINITY, |b| b.t2);
    }
    let mut hi = 2f64.sqrt() / (TAU * jitter_hz);
    let mut lo = 0.0;
    while g(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fractional intensity noise that makes the laser-induced Gaussian envelope,
/// combined with the baseline, fall to 1/e at `target_t2` for this operating
/// point.
pub fn calibrate_intensity_sigma(
    model: &ShiftModel,
    qubit: QubitKind,
    pol: &PolarizationState,
    target_t2: f64,
    baseline: Option<&BaselineDecay>,
) -> Result<f64> {
    if !(target_t2.is_finite() && target_t2 > 0.0) {
        return Err(Error::validation("target_t2", format!("must be > 0, got {target_t2}")));
    }
    let remaining = 1.0 - baseline.map_or(0.0, |b| (target_t2 / b.t2).powf(b.exponent));
    if remaining <= 0.0 {
        return Err(Error::Domain(format!(
            "target T2 {target_t2:e} s is not shorter than the baseline decay"
        )));
    }
    let c = model.coefficients(qubit, pol)?;
    let sensitivity = c.slope(model.intensity()).abs() * model.intensity();
    if sensitivity == 0.0 {
        return Err(Error::Domain("operating point is insensitive to intensity".into()));
    }
    let jitter = (2.0 * remaining).sqrt() / (TAU * target_t2);
    Ok(jitter / sensitivity)
}

/// Evenly spaced τ grid reaching `span` times the expected T2.
pub fn suggest_tau_grid(expected_t2: f64, count: usize, span: f64) -> Result<RamseySequence> {
    if !(expected_t2.is_finite() && expected_t2 > 0.0) {
        return Err(Error::Domain(format!("cannot build a τ grid for T2 = {expected_t2}")));
    }
    RamseySequence::linear(span * expected_t2, count)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Gaussian dephasing envelope `exp(−½(2π σ_f τ)²)`.
pub fn gaussian_dephasing(jitter_hz: f64, tau: f64) -> f64 {
    (-0.5 * (2.0 * PI * jitter_hz * tau).powi(2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ion_params::{builtin_yb171, LaserField, MagneticField};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> ShiftModel {
        ShiftModel::new(
            &builtin_yb171(),
            &LaserField::yb171_experiment(),
            &MagneticField::from_gauss(11.343).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn fringe_examples() {
        for tau in [0.0, 1e-3, 0.7] {
            assert_eq!(fringe(0.0, tau, 0.0), 1.0);
        }
        assert!(fringe(1234.5, 1.0 / (2.0 * 1234.5), 0.0) < 1e-15);
    }

    #[test]
    fn noiseless_fringe_frequency_matches_shift() {
        let m = model();
        let pol = PolarizationState::sigma_minus();
        let shift = m.differential_shift(QubitKind::Clock, &pol).unwrap().total;
        assert_relative_eq!(shift, 1.78e4, max_relative = 0.05);
        let taus: Vec<f64> = (0..400).map(|k| k as f64 * 2e-6).collect();
        let probs: Vec<f64> = taus
            .iter()
            .map(|&t| fringe_probability(&m, QubitKind::Clock, &pol, t, 0.0).unwrap())
            .collect();
        let f = fringe_frequency(&taus, &probs).unwrap();
        assert_relative_eq!(f, shift, max_relative = 1e-3);
    }

    #[test]
    fn sequence_validation() {
        assert!(RamseySequence::new(vec![]).is_err());
        assert!(RamseySequence::new(vec![0.0, 1.0]).is_err());
        assert!(RamseySequence::new(vec![2.0, 1.0]).is_err());
        assert!(RamseySequence::new(vec![1.0, 1.0]).is_err());
        assert!(RamseySequence::new(vec![1e-3, 2e-3]).is_ok());
        assert!(NoiseModel::new(-0.1, 0).is_err());
    }

    #[test]
    fn shot_count_checked() {
        let m = model();
        let seq = RamseySequence::linear(1e-3, 5).unwrap();
        let noise = NoiseModel::new(0.01, 1).unwrap();
        let pol = PolarizationState::linear();
        assert!(matches!(
            simulate_decay(&m, QubitKind::Clock, &pol, &noise, 0, &seq, None),
            Err(Error::Domain(_))
        ));
        assert!(simulate_decay(&m, QubitKind::Clock, &pol, &noise, 10, &seq, None).is_err());
    }

    #[test]
    fn noiseless_contrast_is_one() {
        let m = model();
        let seq = RamseySequence::linear(1e-3, 10).unwrap();
        let noise = NoiseModel::new(0.0, 3).unwrap();
        let table = simulate_decay(&m, QubitKind::Clock, &PolarizationState::sigma_minus(), &noise, 200, &seq, None)
            .unwrap();
        for p in table.points {
            assert!((p.contrast - 1.0).abs() < 1e-12);
            assert!(p.contrast_err < 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic_and_seed_dependent() {
        let m = model();
        let seq = RamseySequence::linear(2e-3, 12).unwrap();
        let pol = PolarizationState::sigma_minus();
        let run = |seed| {
            simulate_decay(&m, QubitKind::Clock, &pol, &NoiseModel::new(0.02, seed).unwrap(), 500, &seq, None).unwrap()
        };
        let a = run(7);
        let b = run(7);
        assert_eq!(a, b);
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.contrast.to_bits(), y.contrast.to_bits());
        }
        assert_ne!(a, run(8));
    }

    fn synthetic(t2: f64, p: f64, n: usize) -> Vec<ContrastPoint> {
        (1..=n)
            .map(|k| {
                let tau = 3.0 * t2 * k as f64 / n as f64;
                ContrastPoint {
                    tau_s: tau,
                    contrast: (-(tau / t2).powf(p)).exp(),
                    contrast_err: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_synthetic_envelopes() {
        let g = fit_coherence(&synthetic(10e-3, 2.0, 30)).unwrap();
        assert_eq!(g.model, EnvelopeModel::Gaussian);
        assert_relative_eq!(g.t2, 10e-3, max_relative = 1e-6);
        let e = fit_coherence(&synthetic(0.3, 1.0, 30)).unwrap();
        assert_eq!(e.model, EnvelopeModel::Exponential);
        assert_relative_eq!(e.t2, 0.3, max_relative = 1e-6);
        assert!(e.residual_rms < 1e-9);
    }

    #[test]
    fn fit_rejects_short_or_undecayed_data() {
        assert!(matches!(fit_coherence(&synthetic(1.0, 2.0, 4)), Err(Error::FitNotConverged(_))));
        let flat: Vec<ContrastPoint> = synthetic(1.0, 2.0, 20).into_iter().map(|p| ContrastPoint { tau_s: p.tau_s * 0.1, contrast: 0.99, ..p }).collect();
        assert!(matches!(fit_coherence(&flat), Err(Error::FitNotConverged(_))));
    }

    #[test]
    fn calibration_round_trip() {
        let m = model();
        let pol = PolarizationState::from_relative_angle_deg(22.5);
        let floor = BaselineDecay::new(0.331, 1.0).unwrap();
        let sigma = calibrate_intensity_sigma(&m, QubitKind::Clock, &pol, 0.478e-3, Some(&floor)).unwrap();
        assert!(sigma > 0.01 && sigma < 0.02, "{sigma}");
        let c = m.coefficients(QubitKind::Clock, &pol).unwrap();
        let t2 = predicted_t2(frequency_jitter(&c, m.intensity(), sigma), Some(&floor));
        assert_relative_eq!(t2, 0.478e-3, max_relative = 1e-9);
        assert!(calibrate_intensity_sigma(&m, QubitKind::Clock, &pol, 0.5, Some(&floor)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fit_is_scale_covariant(t2 in 1e-5f64..1.0, gaussian in any::<bool>()) {
            let p = if gaussian { 2.0 } else { 1.0 };
            let fit = fit_coherence(&synthetic(t2, p, 25)).unwrap();
            prop_assert!((fit.t2 / t2 - 1.0).abs() < 1e-6);
            prop_assert_eq!(fit.model.exponent(), p);
        }

        #[test]
        fn contrast_bounded(sigma in 0.0f64..0.1, seed in any::<u64>()) {
            let m = model();
            let seq = RamseySequence::linear(1e-3, 6).unwrap();
            let table = simulate_decay(
                &m, QubitKind::ZeemanPlus, &PolarizationState::from_relative_angle_deg(30.0),
                &NoiseModel::new(sigma, seed).unwrap(), 100, &seq, None,
            ).unwrap();
            for pt in table.points {
                prop_assert!(pt.contrast >= 0.0 && pt.contrast <= 1.0 + 1e-12);
            }
        }
    }
}
