//! Minimum-shift wave-plate angles and the threshold field above which the
//! clock shift can be cancelled exactly.
//!
//! Angles are the HWP setting relative to a QWP at 0°, in degrees. The
//! helicity imbalance x = −sin 4θ has period 90°, so everything is searched on
//! [0°, 90°) and treated as cyclic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ion_params::{IonSpecies, LaserField, MagneticField};
use crate::polarization::PolarizationState;
use crate::stark::{ClockQuadratic, QubitKind, ShiftBreakdown, ShiftModel};

pub const THETA_PERIOD_DEG: f64 = 90.0;

/// Coarse grid used to seed the minimizer (degrees).
pub const SEARCH_GRID_DEG: f64 = 0.1;

/// Final angular resolution of the minimizer (degrees).
pub const THETA_TOLERANCE_DEG: f64 = 1e-7;

/// Bracket width at which the threshold root is considered located (gauss).
pub const THRESHOLD_BRACKET_GAUSS: f64 = 1e-3;

/// Candidates whose |shift| differ by less than this fraction of the largest
/// |shift| in the scan are treated as equally good.
const TIE_FRACTION: f64 = 1e-9;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub theta_deg: f64,
    pub eps_plus_sq: f64,
    pub eps_minus_sq: f64,
    pub shift: ShiftBreakdown,
}

/// Differential shift at each θ on a uniform grid over [0°, 90°).
pub fn scan_theta(model: &ShiftModel, qubit: QubitKind, resolution_deg: f64) -> Result<Vec<ScanRow>> {
    let grid = theta_grid(resolution_deg)?;
    grid.par_iter()
        .map(|&theta| {
            let pol = PolarizationState::from_relative_angle_deg(theta);
            Ok(ScanRow {
                theta_deg: theta,
                eps_plus_sq: pol.plus_sq(),
                eps_minus_sq: pol.minus_sq(),
                shift: model.differential_shift(qubit, &pol)?,
            })
        })
        .collect()
}

/// Uniform grid `0, r, 2r, …` strictly below 90°.
pub fn theta_grid(resolution_deg: f64) -> Result<Vec<f64>> {
    if !(resolution_deg.is_finite() && resolution_deg > 0.0) {
        return Err(Error::validation(
            "resolution_deg",
            format!("must be finite and > 0, got {resolution_deg}"),
        ));
    }
    let count = (THETA_PERIOD_DEG / resolution_deg - 1e-9).ceil().max(1.0) as usize;
    Ok((0..count).map(|i| i as f64 * resolution_deg).collect())
}

/// Outcome of a minimum-|shift| search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagicSearchResult {
    pub qubit: QubitKind,
    pub theta_min_deg: f64,
    /// Signed total shift at `theta_min_deg` (Hz).
    pub shift_at_min: f64,
    pub breakdown_at_min: ShiftBreakdown,
    /// Other angles reaching the same minimum |shift|.
    pub equivalent_thetas_deg: Vec<f64>,
    /// Angles where the total shift changes sign, sorted.
    pub zero_crossings_deg: Vec<f64>,
    /// Final sign-change bracket of each zero crossing.
    pub crossing_brackets_deg: Vec<[f64; 2]>,
    /// Whether each crossing was certified by a sign change.
    pub bracketed: Vec<bool>,
}

struct Candidate {
    theta: f64,
    value: f64,
}

/// Minimize |total shift| over θ.
///
/// A 0.1° scan seeds the search. Sign changes between neighbours are bisected
/// to a root; every other local minimum of |shift| is refined by golden-section
/// search on the signed shift, which also exposes zero crossings that fall
/// between two grid points. Ties go to the angle nearest 45°.
pub fn find_min_shift(model: &ShiftModel, qubit: QubitKind) -> Result<MagicSearchResult> {
    model.coefficients(qubit, &PolarizationState::linear())?;
    let f = |theta: f64| -> f64 {
        let pol = PolarizationState::from_relative_angle_deg(theta);
        model
            .coefficients(qubit, &pol)
            .map(|c| c.total(model.intensity()))
            .unwrap_or(f64::NAN)
    };

    let grid = theta_grid(SEARCH_GRID_DEG)?;
    let values: Vec<f64> = grid.par_iter().map(|&t| f(t)).collect();
    let n = values.len();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    if scale == 0.0 {
        let breakdown = model.differential_shift(qubit, &PolarizationState::from_relative_angle_deg(45.0))?;
        return Ok(MagicSearchResult {
            qubit,
            theta_min_deg: 45.0,
            shift_at_min: breakdown.total,
            breakdown_at_min: breakdown,
            equivalent_thetas_deg: Vec::new(),
            zero_crossings_deg: Vec::new(),
            crossing_brackets_deg: Vec::new(),
            bracketed: Vec::new(),
        });
    }

    let mut roots: Vec<(f64, [f64; 2])> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();

    for i in 0..n {
        let a = grid[i];
        let b = a + SEARCH_GRID_DEG;
        let fa = values[i];
        let fb = values[(i + 1) % n];
        if fa == 0.0 {
            roots.push((a, [a, a]));
        } else if fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
            let (root, bracket) = bisect(&f, a, b, fa);
            roots.push((root, bracket));
        }
    }

    for i in 0..n {
        let prev = values[(i + n - 1) % n].abs();
        let next = values[(i + 1) % n].abs();
        let here = values[i].abs();
        if !(here <= prev && here <= next) || values[i] == 0.0 {
            continue;
        }
        let lo = grid[i] - SEARCH_GRID_DEG;
        let hi = grid[i] + SEARCH_GRID_DEG;
        let sign = values[i].signum();
        let (t_ext, f_ext) = golden_min(|t| sign * f(t), lo, hi);
        let f_ext = sign * f_ext;
        if (f_ext < 0.0) != (values[i] < 0.0) && f_ext != 0.0 {
            // the extremum crosses zero between grid points
            for (a, b) in [(lo, t_ext), (t_ext, hi)] {
                let fa = f(a);
                if (fa < 0.0) != (f(b) < 0.0) {
                    roots.push(bisect(&f, a, b, fa));
                }
            }
        } else {
            candidates.push(Candidate { theta: t_ext, value: f_ext });
        }
    }

    let mut roots: Vec<(f64, [f64; 2])> = roots
        .into_iter()
        .map(|(t, [a, b])| (wrap_theta(t), [a, b]))
        .collect();
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    roots.dedup_by(|x, y| cyclic_distance(x.0, y.0) < 1e-6);

    for (t, _) in &roots {
        candidates.push(Candidate { theta: *t, value: f(*t) });
    }

    let best = candidates
        .iter()
        .map(|c| c.value.abs())
        .fold(f64::INFINITY, f64::min);
    let tie = TIE_FRACTION * scale;
    let mut ties: Vec<f64> = candidates
        .iter()
        .filter(|c| c.value.abs() <= best + tie)
        .map(|c| wrap_theta(c.theta))
        .collect();
    ties.sort_by(|a, b| (a - 45.0).abs().total_cmp(&(b - 45.0).abs()).then(a.total_cmp(b)));
    ties.dedup_by(|x, y| cyclic_distance(*x, *y) < 1e-6);

    let theta_min = ties[0];
    let breakdown = model.differential_shift(qubit, &PolarizationState::from_relative_angle_deg(theta_min))?;
    let mut equivalent: Vec<f64> = ties[1..].to_vec();
    equivalent.sort_by(f64::total_cmp);

    let bracketed = roots
        .iter()
        .map(|(_, [a, b])| {
            if a == b {
                f(*a) == 0.0
            } else {
                let (fa, fb) = (f(*a), f(*b));
                (fa <= 0.0 && fb >= 0.0) || (fa >= 0.0 && fb <= 0.0)
            }
        })
        .collect();

    Ok(MagicSearchResult {
        qubit,
        theta_min_deg: theta_min,
        shift_at_min: breakdown.total,
        breakdown_at_min: breakdown,
        equivalent_thetas_deg: equivalent,
        zero_crossings_deg: roots.iter().map(|r| r.0).collect(),
        crossing_brackets_deg: roots.iter().map(|r| r.1).collect(),
        bracketed,
    })
}

fn wrap_theta(theta: f64) -> f64 {
    let w = theta.rem_euclid(THETA_PERIOD_DEG);
    if w >= THETA_PERIOD_DEG {
        0.0
    } else {
        w
    }
}

fn cyclic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(THETA_PERIOD_DEG);
    d.min(THETA_PERIOD_DEG - d)
}

/// Bisect a sign change of `f` on [a, b] given f(a). Returns the root and the
/// final bracket.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> (f64, [f64; 2]) {
    while b - a > THETA_TOLERANCE_DEG * 1e-3 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return (m, [m, m]);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b), [a, b])
}

/// Golden-section minimization on [a, b]; returns (argmin, min).
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > THETA_TOLERANCE_DEG {
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
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

/// Both preimages in [0°, 90°) of x = −sin 4θ, sorted.
pub fn theta_from_helicity_imbalance(x: f64) -> Result<[f64; 2]> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("helicity imbalance must lie in [-1, 1], got {x}")));
    }
    let a = x.asin();
    let mut t = [
        wrap_theta((std::f64::consts::PI + a).to_degrees() / 4.0),
        wrap_theta((2.0 * std::f64::consts::PI - a).to_degrees() / 4.0),
    ];
    t.sort_by(f64::total_cmp);
    Ok(t)
}

/// Closed-form clock minimum of |S + L x + Q x²| over x ∈ [−1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMinimum {
    pub x_min: f64,
    pub theta_min_deg: f64,
    pub shift_at_min: f64,
    /// Preimages of every x reaching the minimum, sorted.
    pub thetas_deg: Vec<f64>,
}

pub fn clock_analytic_minimum(q: &ClockQuadratic) -> Result<AnalyticMinimum> {
    let mut xs = vec![-1.0, 1.0];
    if q.quadratic != 0.0 {
        xs.push((-q.linear / (2.0 * q.quadratic)).clamp(-1.0, 1.0));
        let disc = q.linear * q.linear - 4.0 * q.quadratic * q.constant;
        if disc >= 0.0 {
            // numerically stable pair of roots
            let t = -0.5 * (q.linear + q.linear.signum() * disc.sqrt());
            if t != 0.0 {
                xs.push(q.constant / t);
            }
            xs.push(t / q.quadratic);
        }
    } else if q.linear != 0.0 {
        xs.push(-q.constant / q.linear);
    } else {
        xs.push(0.0);
    }
    xs.retain(|x| (-1.0..=1.0).contains(x));

    let best = xs.iter().map(|&x| q.eval(x).abs()).fold(f64::INFINITY, f64::min);
    let tie = TIE_FRACTION * (q.constant.abs() + q.linear.abs() + q.quadratic.abs());
    let mut thetas = Vec::new();
    let mut chosen: Option<(f64, f64)> = None;
    for &x in xs.iter().filter(|&&x| q.eval(x).abs() <= best + tie) {
        for t in theta_from_helicity_imbalance(x)? {
            thetas.push(t);
            let better = match chosen {
                None => true,
                Some((_, ct)) => (t - 45.0).abs() < (ct - 45.0).abs(),
            };
            if better {
                chosen = Some((x, t));
            }
        }
    }
    thetas.sort_by(f64::total_cmp);
    thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let (x_min, theta_min) = chosen.ok_or_else(|| Error::Domain("no admissible minimum".into()))?;
    Ok(AnalyticMinimum {
        x_min,
        theta_min_deg: theta_min,
        shift_at_min: q.eval(x_min),
        thetas_deg: thetas,
    })
}

/// Smallest clock-qubit field (gauss) at which some transverse polarization
/// makes the total shift vanish.
///
/// With S and Q independent of B and L = L₁·B, the minimum of S + L x + Q x²
/// over x ∈ [−1, 1] first touches zero at |L| = 2√(SQ) when the vertex lies
/// inside the interval (S ≤ Q), and at |L| = S + Q otherwise. The analytic
/// value is then certified by the presence and absence of zero crossings just
/// above and below it.
pub fn threshold_field(species: &IonSpecies, laser: &LaserField, range_gauss: (f64, f64)) -> Result<f64> {
    let (lo, hi) = range_gauss;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(Error::Domain(format!("empty or invalid field search range [{lo}, {hi}] G")));
    }
    if laser.power == 0.0 {
        return Ok(0.0);
    }
    let at_zero = ShiftModel::new(species, laser, &MagneticField::zero())?.clock_quadratic()?;
    let at_one = ShiftModel::new(species, laser, &MagneticField::from_gauss(1.0)?)?.clock_quadratic()?;
    let s = at_zero.constant;
    let q = at_zero.quadratic;
    let l1 = (at_one.linear - at_zero.linear).abs();
    if !(s > 0.0) || !(q > 0.0) {
        return Err(Error::Domain(format!(
            "threshold undefined for scalar {s:e} Hz and fourth-order {q:e} Hz"
        )));
    }
    if l1 == 0.0 {
        return Err(Error::Domain("vector shift does not grow with field".into()));
    }
    let b_star = if s <= q { 2.0 * (s * q).sqrt() / l1 } else { (s + q) / l1 };
    if !(lo..=hi).contains(&b_star) {
        return Err(Error::Domain(format!(
            "threshold {b_star:.4} G lies outside the search range [{lo}, {hi}] G"
        )));
    }

    let half = 0.5 * THRESHOLD_BRACKET_GAUSS;
    let crossings_at = |b: f64| -> Result<usize> {
        let model = ShiftModel::new(species, laser, &MagneticField::from_gauss(b)?)?;
        Ok(find_min_shift(&model, QubitKind::Clock)?.zero_crossings_deg.len())
    };
    let below = (b_star - half).max(0.0);
    if crossings_at(b_star + half)? == 0 || (below > 0.0 && crossings_at(below)? != 0) {
        return Err(Error::Domain(format!(
            "threshold {b_star:.4} G could not be certified by a zero-crossing scan"
        )));
    }
    Ok(b_star)
}
