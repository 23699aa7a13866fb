use std::fmt::Write as _;
use std::path::Path;

use ionshift::dressing::{dress, GroundState};
use ionshift::ion_params::angular_to_hz;
use ionshift::magic;
use ionshift::polarization::PolarizationState;
use ionshift::ramsey::{
    calibrate_intensity_sigma, fit_coherence, frequency_jitter, predicted_t2, simulate_decay, suggest_tau_grid,
    BaselineDecay, NoiseModel, RamseySequence,
};
use ionshift::stark::{QubitKind, ShiftModel};
use serde_json::{json, Value};

use crate::{emit, CliError, CliResult, Format, RamseyArgs, RunConfig};

const CLOCK_BASELINE_T2_MS: f64 = 331.0;
const ZEEMAN_BASELINE_T2_MS: f64 = 0.853;

/// Six significant digits, as printed in CSV.
fn sig6(x: f64) -> f64 {
    nz(format!("{x:.5e}").parse().expect("formatted float parses"))
}

/// Map −0.0 to 0.0 so that output bytes do not depend on the sign of zero.
fn nz(x: f64) -> f64 {
    x + 0.0
}

fn deg3(x: f64) -> f64 {
    let v: f64 = format!("{x:.3}").parse().expect("formatted float parses");
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn to_json(cfg: &RunConfig, mut body: Value) -> String {
    body["config"] = serde_json::to_value(cfg).expect("config serializes");
    let mut s = serde_json::to_string_pretty(&body).expect("json serializes");
    s.push('\n');
    s
}

fn model(cfg: &RunConfig) -> CliResult<ShiftModel> {
    Ok(ShiftModel::new(&cfg.species()?, &cfg.laser()?, &cfg.field()?)?)
}

pub fn scan_theta(cfg: &RunConfig, qubit: QubitKind, resolution_deg: f64, out: Option<&Path>) -> CliResult<()> {
    let rows = magic::scan_theta(&model(cfg)?, qubit, resolution_deg)?;
    let text = match cfg.format {
        Format::Csv => scan_csv(cfg, &rows),
        Format::Json => to_json(
            cfg,
            json!({
                "qubit": qubit.label(),
                "rows": rows.iter().map(|r| json!({
                    "theta_deg": deg3(r.theta_deg),
                    "eps_plus_sq": sig6(r.eps_plus_sq),
                    "eps_minus_sq": sig6(r.eps_minus_sq),
                    "second_scalar_hz": sig6(r.shift.second_scalar),
                    "second_vector_hz": sig6(r.shift.second_vector),
                    "fourth_hz": sig6(r.shift.fourth),
                    "total_hz": sig6(r.shift.total),
                })).collect::<Vec<_>>(),
            }),
        ),
    };
    emit(out, &text)
}

fn scan_csv(cfg: &RunConfig, rows: &[magic::ScanRow]) -> String {
    let mut s = cfg.header_line();
    s.push_str("theta_deg,eps_plus_sq,eps_minus_sq,second_scalar_hz,second_vector_hz,fourth_hz,total_hz\n");
    for r in rows {
        writeln!(
            s,
            "{:.3},{:.6},{:.6},{:.5e},{:.5e},{:.5e},{:.5e}",
            nz(r.theta_deg),
            nz(r.eps_plus_sq),
            nz(r.eps_minus_sq),
            nz(r.shift.second_scalar),
            nz(r.shift.second_vector),
            nz(r.shift.fourth),
            nz(r.shift.total)
        )
        .unwrap();
    }
    s
}

pub fn scan_intensity(
    cfg: &RunConfig,
    qubit: QubitKind,
    theta_deg: Option<f64>,
    powers_mw: &[f64],
    out: Option<&Path>,
) -> CliResult<()> {
    if powers_mw.is_empty() {
        return Err(CliError::Config("--powers-mw needs at least one value".into()));
    }
    if let Some(p) = powers_mw.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(CliError::Config(format!("powers must be finite and >= 0, got {p}")));
    }
    let pol = match theta_deg {
        Some(t) if t.is_finite() => PolarizationState::from_relative_angle_deg(t),
        Some(t) => return Err(CliError::Config(format!("--theta-deg must be finite, got {t}"))),
        None => cfg.polarization(),
    };
    let species = cfg.species()?;
    let field = cfg.field()?;
    let base = cfg.laser()?;

    let mut rows = Vec::with_capacity(powers_mw.len());
    for &p in powers_mw {
        let laser = base.with_power(p * 1e-3)?;
        let m = ShiftModel::new(&species, &laser, &field)?;
        let total = m.differential_shift(qubit, &pol)?.total;
        let d_sigma = if qubit == QubitKind::Clock {
            Some(
                m.differential_shift(qubit, &PolarizationState::sigma_minus())?.total
                    - m.differential_shift(qubit, &PolarizationState::sigma_plus())?.total,
            )
        } else {
            None
        };
        rows.push((p, laser.intensity, total, d_sigma));
    }

    let text = match cfg.format {
        Format::Csv => {
            let mut s = cfg.header_line();
            s.push_str("power_mW,intensity_W_m2,total_hz");
            s.push_str(if qubit == QubitKind::Clock { ",d_sigma_hz\n" } else { "\n" });
            for (p, i, total, d) in &rows {
                write!(s, "{:.6},{:.5e},{:.5e}", nz(*p), nz(*i), nz(*total)).unwrap();
                if let Some(d) = d {
                    write!(s, ",{:.5e}", nz(*d)).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => to_json(
            cfg,
            json!({
                "qubit": qubit.label(),
                "hwp_deg": theta_deg.map(deg3).unwrap_or(deg3(cfg.hwp_deg)),
                "rows": rows.iter().map(|(p, i, total, d)| {
                    let mut row = json!({
                        "power_mW": p,
                        "intensity_W_m2": sig6(*i),
                        "total_hz": sig6(*total),
                    });
                    if let Some(d) = d {
                        row["d_sigma_hz"] = json!(sig6(*d));
                    }
                    row
                }).collect::<Vec<_>>(),
            }),
        ),
    };
    emit(out, &text)
}

pub fn find_magic(cfg: &RunConfig, qubit: QubitKind, scan_out: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let m = model(cfg)?;
    let result = magic::find_min_shift(&m, qubit)?;
    if let Some(path) = scan_out {
        let rows = magic::scan_theta(&m, qubit, magic::SEARCH_GRID_DEG)?;
        emit(Some(path), &scan_csv(cfg, &rows))?;
    }
    let text = to_json(
        cfg,
        json!({
            "qubit": qubit.label(),
            "theta_min_deg": deg3(result.theta_min_deg),
            "shift_at_min_hz": sig6(result.shift_at_min),
            "breakdown_at_min": {
                "second_scalar_hz": sig6(result.breakdown_at_min.second_scalar),
                "second_vector_hz": sig6(result.breakdown_at_min.second_vector),
                "fourth_hz": sig6(result.breakdown_at_min.fourth),
            },
            "equivalent_thetas_deg": result.equivalent_thetas_deg.iter().map(|t| deg3(*t)).collect::<Vec<_>>(),
            "zero_crossings_deg": result.zero_crossings_deg.iter().map(|t| deg3(*t)).collect::<Vec<_>>(),
            "bracketed": result.bracketed,
        }),
    );
    emit(out, &text)
}

pub fn threshold_field(cfg: &RunConfig, range: (f64, f64), out: Option<&Path>) -> CliResult<()> {
    let b = magic::threshold_field(&cfg.species()?, &cfg.laser()?, range)?;
    let text = match cfg.format {
        Format::Csv => format!("{}threshold_gauss\n{b:.5e}\n", cfg.header_line()),
        Format::Json => to_json(
            cfg,
            json!({
                "threshold_gauss": sig6(b),
                "search_range_gauss": [range.0, range.1],
            }),
        ),
    };
    emit(out, &text)
}

fn state_label(s: GroundState) -> &'static str {
    match s {
        GroundState::F0m0 => "|0,0>",
        GroundState::F1m0 => "|1,0>",
        GroundState::F1mPlus1 => "|1,+1>",
        GroundState::F1mMinus1 => "|1,-1>",
    }
}

pub fn dressed_states(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let basis = dress(&cfg.species()?, &cfg.field()?)?;
    let gap = angular_to_hz(basis.energy(GroundState::F1m0) - basis.energy(GroundState::F0m0));
    let text = match cfg.format {
        Format::Csv => {
            let mut s = cfg.header_line();
            s.push_str("label,f,m_f,energy_hz,c0,c1,c2,c3\n");
            for state in GroundState::ALL {
                let v = basis.vector(state);
                writeln!(
                    s,
                    "{},{},{},{:.9e},{:.6},{:.6},{:.6},{:.6}",
                    state_label(state),
                    state.f(),
                    state.m_f(),
                    angular_to_hz(basis.energy(state)),
                    nz(v[0]),
                    nz(v[1]),
                    nz(v[2]),
                    nz(v[3])
                )
                .unwrap();
            }
            s
        }
        Format::Json => to_json(
            cfg,
            json!({
                "b_gauss": cfg.b_gauss,
                "mixing_ratio": basis.mixing_ratio,
                "clock_gap_hz": gap,
                "states": GroundState::ALL.iter().map(|&state| json!({
                    "label": state_label(state),
                    "f": state.f(),
                    "m_f": state.m_f(),
                    "energy_hz": angular_to_hz(basis.energy(state)),
                    "vector": basis.vector(state).iter().copied().collect::<Vec<f64>>(),
                })).collect::<Vec<_>>(),
            }),
        ),
    };
    emit(out, &text)
}

fn baseline_for(args: &RamseyArgs, qubit: QubitKind) -> CliResult<Option<BaselineDecay>> {
    if args.no_baseline {
        return Ok(None);
    }
    let t2_ms = args.baseline_t2_ms.unwrap_or(match qubit {
        QubitKind::Clock => CLOCK_BASELINE_T2_MS,
        _ => ZEEMAN_BASELINE_T2_MS,
    });
    Ok(Some(BaselineDecay::new(t2_ms * 1e-3, args.baseline_exponent)?))
}

pub fn ramsey(cfg: &RunConfig, args: &RamseyArgs, out: Option<&Path>) -> CliResult<()> {
    let qubit: QubitKind = args.qubit.into();
    let m = model(cfg)?;
    let pol = match args.theta_deg {
        Some(t) => PolarizationState::from_relative_angle_deg(t),
        None => cfg.polarization(),
    };
    let baseline = baseline_for(args, qubit)?;

    let (sigma, calibrated) = match args.sigma_i {
        Some(s) => (s, false),
        None => {
            let floor = if args.no_baseline {
                None
            } else {
                Some(BaselineDecay::new(CLOCK_BASELINE_T2_MS * 1e-3, args.baseline_exponent)?)
            };
            let s = calibrate_intensity_sigma(
                &m,
                QubitKind::Clock,
                &PolarizationState::from_relative_angle_deg(args.calibrate_theta_deg),
                args.calibrate_t2_ms * 1e-3,
                floor.as_ref(),
            )?;
            (s, true)
        }
    };
    let noise = NoiseModel::new(sigma, cfg.seed)?;

    let coefficients = m.coefficients(qubit, &pol)?;
    let expected = predicted_t2(frequency_jitter(&coefficients, m.intensity(), sigma), baseline.as_ref());
    let sequence = match args.tau_max_ms {
        Some(t) => RamseySequence::linear(t * 1e-3, args.points)?,
        None => {
            if !expected.is_finite() {
                return Err(CliError::Config(
                    "no decay expected at this operating point; pass --tau-max-ms".into(),
                ));
            }
            suggest_tau_grid(expected, args.points, 3.0)?
        }
    };
    let table = simulate_decay(&m, qubit, &pol, &noise, args.shots, &sequence, baseline.as_ref())?;
    let fit = fit_coherence(&table.points);

    let mut summary = json!({
        "qubit": qubit.label(),
        "shift_hz": sig6(m.differential_shift(qubit, &pol)?.total),
        "sigma_i": sigma,
        "sigma_calibrated": calibrated,
        "shots": args.shots,
        "seed": cfg.seed,
        "baseline": baseline.map(|b| json!({"t2_s": b.t2, "exponent": b.exponent})),
        "predicted_t2_s": if expected.is_finite() { json!(sig6(expected)) } else { Value::Null },
    });
    match &fit {
        Ok(f) => {
            summary["t2_s"] = json!(sig6(f.t2));
            summary["t2_err_s"] = json!(sig6(f.t2_err));
            summary["model"] = json!(f.model);
            summary["residual_rms"] = json!(sig6(f.residual_rms));
        }
        Err(e) => summary["fit_error"] = json!(e.to_string()),
    }
    summary["config"] = serde_json::to_value(cfg).expect("config serializes");
    let summary_text = format!("{}\n", serde_json::to_string_pretty(&summary).expect("json serializes"));

    let text = match cfg.format {
        Format::Csv => {
            let mut s = cfg.header_line();
            s.push_str("tau_s,contrast,contrast_err\n");
            for p in &table.points {
                writeln!(s, "{:.6e},{:.6},{:.6}", p.tau_s, p.contrast, p.contrast_err).unwrap();
            }
            s
        }
        Format::Json => to_json(
            cfg,
            json!({
                "points": table.points.iter().map(|p| json!({
                    "tau_s": sig6(p.tau_s),
                    "contrast": p.contrast,
                    "contrast_err": p.contrast_err,
                })).collect::<Vec<_>>(),
                "summary": summary,
            }),
        ),
    };
    emit(out, &text)?;

    match (&args.summary_out, cfg.format) {
        (Some(path), _) => emit(Some(path), &summary_text)?,
        (None, Format::Csv) => eprint!("{summary_text}"),
        (None, Format::Json) => {}
    }
    fit.map(|_| ()).map_err(CliError::from)
}
