use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use spincm_core::blp::{blp_measure, BlpConfig};
use spincm_core::collision::{run_trajectory, RecordSpec, TrajectoryRecord};
use spincm_core::lindblad::{
    build_lindblad_sequential, build_lindblad_thermal, build_lindblad_vacuum, dynamical_symmetry_check,
    integrate_me, liouvillian_matrix, liouvillian_spectrum, oscillation_basis, uniform_grid, EigenClass,
    IntegratorSettings, MasterEquationSpec, SymmetryReport, DEFAULT_DEGENERACY_TOL,
};
use spincm_core::model::{collective_ladder, Ladder};
use spincm_core::observables::{dominant_frequency, phase_difference};
use spincm_core::rng::derive_seed;
use spincm_core::thermo::{ledger_from_trajectory, ThermoLedger};
use spincm_core::ModelParams;

use crate::config::{zero_based, Generator, RunConfig, TimeGrid};
use crate::error::CliError;
use crate::output::{num, Csv, Outputs};

fn trajectory_csv(rec: &TrajectoryRecord, ledger: Option<&ThermoLedger>) -> String {
    let n = rec.n_sys;
    let mut header = vec!["n".to_string(), "t".to_string()];
    for axis in ["sx", "sy", "sz"] {
        header.extend((1..=n).map(|m| format!("{axis}{m}")));
    }
    header.extend(rec.sync_pairs.iter().map(|(j, k)| format!("abs_q{}{}", j + 1, k + 1)));
    header.push("c_l1".into());
    let extras = ledger.is_some();
    if extras {
        header.extend(
            [
                "sxsx12",
                "mutual_info12",
                "entropy_change",
                "entropy_flux",
                "entropy_production",
                "cum_entropy_production",
                "cum_energy_change",
                "cum_heat",
                "cum_work",
            ]
            .map(String::from),
        );
    }
    let mut csv = Csv::new(&header);
    for r in 0..rec.len() {
        let mut row = vec![rec.steps[r].to_string(), num(rec.times[r])];
        for axis in [&rec.sx, &rec.sy, &rec.sz] {
            row.extend(axis.iter().map(|site| num(site[r])));
        }
        row.extend(rec.sync.iter().map(|pair| num(pair[r].value.norm())));
        row.push(num(rec.coherence.as_ref().map_or(f64::NAN, |c| c[r])));
        if let Some(l) = ledger {
            row.push(num(rec.sxsx12.as_ref().map_or(f64::NAN, |v| v[r])));
            row.push(num(rec.mutual_info.as_ref().map_or(f64::NAN, |v| v[r])));
            for v in [
                l.entropy_change[r],
                l.flux[r],
                l.production[r],
                l.cum_production[r],
                l.cum_energy_change[r],
                l.cum_heat[r],
                l.cum_work[r],
            ] {
                row.push(num(v));
            }
        }
        csv.row(&row);
    }
    csv.into_string()
}

#[derive(Serialize)]
struct PhaseEntry {
    sites: (usize, usize),
    shift: i64,
    phase: f64,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    rows: usize,
    dominant_frequency: Option<f64>,
    frequency_resolution: Option<f64>,
    /// Why no frequency or phases were extracted.
    spectral_note: Option<String>,
    phase_differences: Vec<PhaseEntry>,
    /// Keyed by site pair, e.g. `"12"`.
    final_abs_q: BTreeMap<String, f64>,
    final_sx: Vec<f64>,
    final_c_l1: Option<f64>,
    final_cum_entropy_production: Option<f64>,
}

fn summarize(command: &'static str, rec: &TrajectoryRecord, burn_in: f64, ledger: Option<&ThermoLedger>) -> Summary {
    let last = rec.len() - 1;
    let mut summary = Summary {
        command,
        rows: rec.len(),
        dominant_frequency: None,
        frequency_resolution: None,
        spectral_note: None,
        phase_differences: Vec::new(),
        final_abs_q: rec
            .sync_pairs
            .iter()
            .zip(&rec.sync)
            .map(|(&(j, k), q)| (format!("{}{}", j + 1, k + 1), q[last].value.norm()))
            .collect(),
        final_sx: rec.sx.iter().map(|s| s[last]).collect(),
        final_c_l1: rec.coherence.as_ref().map(|c| c[last]),
        final_cum_entropy_production: ledger.and_then(|l| l.cum_production.last().copied()),
    };
    let spectral = rec
        .sx_series(0)
        .and_then(|s| dominant_frequency(&s, burn_in))
        .and_then(|peak| {
            let tail = |m: usize| rec.sx_series(m).and_then(|s| s.tail(burn_in));
            let reference = tail(0)?;
            let phases = (1..rec.n_sys)
                .map(|m| {
                    let ps = phase_difference(&reference, &tail(m)?, peak.frequency)?;
                    Ok(PhaseEntry {
                        sites: (1, m + 1),
                        shift: ps.shift,
                        phase: ps.phase,
                    })
                })
                .collect::<spincm_core::Result<Vec<_>>>()?;
            Ok((peak, phases))
        });
    match spectral {
        Ok((peak, phases)) => {
            summary.dominant_frequency = Some(peak.frequency);
            summary.frequency_resolution = Some(peak.resolution);
            summary.phase_differences = phases;
        }
        Err(e) => summary.spectral_note = Some(e.to_string()),
    }
    summary
}

fn observable_record(thermo: bool) -> RecordSpec {
    RecordSpec {
        sync: true,
        coherence: true,
        sxsx12: thermo,
        mutual_info: thermo,
        thermo,
        snapshot_stride: 0,
    }
}

pub fn evolve_cm(cfg: &RunConfig, seed: u64) -> Result<Outputs, CliError> {
    let thermo = cfg.record.thermo;
    if thermo && !cfg.model.beta.is_finite() {
        return Err(CliError::Config("thermodynamic columns need a finite beta".into()));
    }
    let run_cfg = cfg.collision_config(cfg.model, seed, observable_record(thermo))?;
    let rec = run_trajectory(&run_cfg)?;
    let ledger = if thermo { Some(ledger_from_trajectory(&rec, &cfg.model)?) } else { None };
    let mut out = Outputs::default();
    out.add("trajectory.csv", trajectory_csv(&rec, ledger.as_ref()));
    out.add_json("summary.json", &summarize("evolve-cm", &rec, cfg.burn_in, ledger.as_ref()));
    Ok(out)
}

fn generator_spec(p: &ModelParams, generator: Generator, order: Option<&[usize]>) -> Result<MasterEquationSpec, CliError> {
    if generator != Generator::Sequential && order.is_some() {
        return Err(CliError::Config("an order is only meaningful for the sequential generator".into()));
    }
    let spec = match generator {
        Generator::Thermal => build_lindblad_thermal(p),
        Generator::Vacuum => build_lindblad_vacuum(p),
        Generator::Sequential => {
            let order = order.ok_or_else(|| CliError::Config("the sequential generator needs an order".into()))?;
            build_lindblad_sequential(p, &zero_based(order, p.n_sys)?)
        }
    };
    spec.map_err(CliError::config)
}

pub fn evolve_me(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let me = cfg
        .master_equation
        .as_ref()
        .ok_or_else(|| CliError::Config("evolve-me needs a master_equation section".into()))?;
    if cfg.record.thermo {
        return Err(CliError::Config("thermodynamic columns are only produced by evolve-cm".into()));
    }
    let spec = generator_spec(&cfg.model, me.generator, me.order.as_deref())?;
    let grid = match &me.t_grid {
        TimeGrid::Uniform { t_max, dt } => uniform_grid(*t_max, *dt).map_err(CliError::config)?,
        TimeGrid::Explicit(v) => v.clone(),
    };
    if grid.is_empty() || grid[0] != 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config("t_grid must be non-empty, start at 0 and increase strictly".into()));
    }
    let mut settings = IntegratorSettings::for_params(&cfg.model);
    if let Some(h) = me.max_step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Config(format!("max_step must be positive, got {h}")));
        }
        settings.max_step = h;
    }
    settings.record = observable_record(false);
    let rec = integrate_me(&spec, &cfg.initial_state()?, &grid, &settings)?;
    let mut out = Outputs::default();
    out.add("trajectory.csv", trajectory_csv(&rec, None));
    out.add_json("summary.json", &summarize("evolve-me", &rec, cfg.burn_in, None));
    Ok(out)
}

#[derive(Serialize)]
struct EigenEntry {
    re: f64,
    im: f64,
    class: EigenClass,
}

#[derive(Serialize)]
struct SymmetryEntry {
    label: String,
    frequency: f64,
    report: SymmetryReport,
}

#[derive(Serialize)]
struct SpectrumOutput {
    dimension: usize,
    tol_zero: f64,
    eigenvalues: Vec<EigenEntry>,
    steady_count: usize,
    oscillatory_count: usize,
    decaying_count: usize,
    growing_count: usize,
    oscillation_frequencies: Vec<f64>,
    slowest_decay_rate: Option<f64>,
    conjugation_defect: f64,
    dark_energy: Option<f64>,
    down_energy: Option<f64>,
    symmetry_diagnostic: Option<String>,
    dynamical_symmetries: Vec<SymmetryEntry>,
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let sec = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("spectrum needs a spectrum section".into()))?;
    if !(sec.tol_zero > 0.0) {
        return Err(CliError::Config(format!("tol_zero must be positive, got {}", sec.tol_zero)));
    }
    let spec = generator_spec(&cfg.model, sec.generator, sec.order.as_deref())?;
    let l = liouvillian_matrix(&spec)?;
    let report = liouvillian_spectrum(&l, sec.tol_zero)?;

    let mut freqs: Vec<f64> = report
        .of_class(EigenClass::Oscillatory)
        .map(|e| e.value.im.abs() / (2.0 * PI))
        .collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);

    let h = &spec.hamiltonian;
    let a_minus = collective_ladder(Ladder::Lower, cfg.model.n_sys);
    let basis = oscillation_basis(h, &a_minus, DEFAULT_DEGENERACY_TOL)?;
    let dynamical_symmetries = basis
        .operators
        .iter()
        .filter(|op| op.frequency.abs() > 1e-12)
        .map(|op| {
            Ok(SymmetryEntry {
                label: op.label.clone(),
                frequency: op.frequency,
                report: dynamical_symmetry_check(&op.operator, h, &a_minus)?,
            })
        })
        .collect::<spincm_core::Result<Vec<_>>>()?;

    let doc = SpectrumOutput {
        dimension: l.nrows(),
        tol_zero: sec.tol_zero,
        eigenvalues: report
            .eigen
            .iter()
            .map(|e| EigenEntry {
                re: e.value.re,
                im: e.value.im,
                class: e.class,
            })
            .collect(),
        steady_count: report.count(EigenClass::Steady),
        oscillatory_count: report.count(EigenClass::Oscillatory),
        decaying_count: report.count(EigenClass::Decaying),
        growing_count: report.count(EigenClass::Growing),
        oscillation_frequencies: freqs,
        slowest_decay_rate: report.slowest_decay_rate(),
        conjugation_defect: report.conjugation_defect(),
        dark_energy: basis.dark_energy,
        down_energy: basis.down_energy,
        symmetry_diagnostic: basis.diagnostic,
        dynamical_symmetries,
    };
    let mut out = Outputs::default();
    out.add_json("spectrum.json", &doc);
    Ok(out)
}

pub fn sync_scan(cfg: &RunConfig, seed: u64) -> Result<Outputs, CliError> {
    let sec = cfg
        .sync_scan
        .as_ref()
        .ok_or_else(|| CliError::Config("sync-scan needs a sync_scan section".into()))?;
    if sec.betas.is_empty() || sec.j_x.is_empty() {
        return Err(CliError::Config("sync_scan grids must be non-empty".into()));
    }
    let cells: Vec<(f64, f64)> = sec
        .betas
        .iter()
        .flat_map(|&b| sec.j_x.iter().map(move |&j| (b, j)))
        .collect();
    let mut base = cfg.clone();
    base.collision.n_steps = sec.n_steps;
    let configs = cells
        .iter()
        .enumerate()
        .map(|(idx, &(beta, j_x))| {
            let params = ModelParams { beta, j_x, ..cfg.model };
            params.validate().map_err(CliError::config)?;
            let record = RecordSpec {
                sync: true,
                coherence: true,
                ..RecordSpec::default()
            };
            base.collision_config(params, derive_seed(seed, idx as u64), record)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<(f64, f64)> = configs
        .par_iter()
        .map(|c| {
            let rec = run_trajectory(c)?;
            let q12 = rec.sync_abs(0, 1).and_then(|q| q.last().copied()).unwrap_or(f64::NAN);
            let cl1 = rec.coherence.as_ref().and_then(|v| v.last().copied()).unwrap_or(f64::NAN);
            Ok((q12, cl1))
        })
        .collect::<spincm_core::Result<_>>()?;
    let mut csv = Csv::new(&["beta", "j_x", "abs_q12", "c_l1"]);
    for (&(beta, j_x), &(q, c)) in cells.iter().zip(&results) {
        csv.row(&[num(beta), num(j_x), num(q), num(c)]);
    }
    let mut out = Outputs::default();
    out.add("sync_scan.csv", csv.into_string());
    Ok(out)
}

pub fn blp_scan(cfg: &RunConfig, seed: u64) -> Result<Outputs, CliError> {
    let sec = cfg
        .blp_scan
        .as_ref()
        .ok_or_else(|| CliError::Config("blp-scan needs a blp_scan section".into()))?;
    if sec.theta_over_pi.is_empty() || sec.k_samples == 0 || sec.n_steps == 0 {
        return Err(CliError::Config("blp_scan needs angles, k_samples >= 1 and n_steps >= 1".into()));
    }
    let mut base = cfg.clone();
    base.collision.n_steps = 1;
    let jobs = sec
        .theta_over_pi
        .iter()
        .enumerate()
        .map(|(idx, &t)| {
            let params = ModelParams { theta: t * PI, ..cfg.model };
            params.validate().map_err(CliError::config)?;
            let cell_seed = derive_seed(seed, idx as u64);
            Ok(BlpConfig {
                base: base.collision_config(params, cell_seed, RecordSpec::default())?,
                n_steps: sec.n_steps,
                k_samples: sec.k_samples,
                seed: cell_seed,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut csv = Csv::new(&["theta_over_pi", "n_blp"]);
    for (job, &t) in jobs.iter().zip(&sec.theta_over_pi) {
        let r = blp_measure(job)?;
        csv.row(&[num(t), num(r.measure + 0.0)]);
    }
    let mut out = Outputs::default();
    out.add("blp_scan.csv", csv.into_string());
    Ok(out)
}
