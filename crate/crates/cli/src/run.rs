use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use fdsim_core::dynamics::{
    density_grid_csv, evolve, schmidt_entropy, DoublonObservables, TrajectoryRecord,
};
use fdsim_core::fmt::num;
use fdsim_core::lattice::Boundary;
use fdsim_core::singleparticle::{
    band_windows, chern_number_on, cylinder_spectrum, edge_weight, spectrum_csv,
};
use fdsim_core::stability::{linspace, sweep_pdec, tune_interactions, SearchBox};
use fdsim_core::twoparticle::{
    decoupling_csv, effective_parameters_signed, InteractionSign, TwoParticleBasis,
    TwoParticleState,
};
use fdsim_core::validate::{run_validation, ValidationFixture};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Smallest spectral gap (units of Omega) that separates two bands.
const MIN_BAND_GAP: f64 = 0.02;

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Records the effective configuration next to the results.
fn prepare(cfg: &RunConfig, command: &str) -> Result<std::path::PathBuf, CliError> {
    let dir = cfg.output_dir(command);
    let mut resolved = cfg.clone();
    resolved.output = None;
    write(&dir, "resolved.toml", &resolved.to_toml())?;
    Ok(dir)
}

pub fn spectrum(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.require_boundary(Boundary::CylinderY, "spectrum")?;
    if cfg.k_points == 0 {
        return Err(CliError::Config { field: "k_points".into(), message: "must be at least 1".into() });
    }
    let schedule = cfg.schedule()?;
    let spec = schedule.lattice;
    let sp = cylinder_spectrum(&schedule, cfg.theta(), cfg.k_points)?;
    let dir = prepare(cfg, "spectrum")?;
    write(&dir, "spectrum.csv", &spectrum_csv(&sp, &spec))?;
    let edge = sp.entries.iter().filter(|e| edge_weight(&e.vector, &spec).is_edge()).count();
    writeln!(out, 
        "{} states over {} momenta, {} with edge weight >= 0.5 -> {}",
        sp.entries.len(),
        cfg.k_points,
        edge,
        dir.join("spectrum.csv").display()
    )?;
    Ok(())
}

pub fn chern(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.require_boundary(Boundary::Torus, "chern")?;
    if cfg.chern_grid < 2 {
        return Err(CliError::Config { field: "chern_grid".into(), message: "must be at least 2".into() });
    }
    let schedule = cfg.schedule()?;
    let windows = band_windows(&schedule, cfg.theta(), cfg.chern_grid, MIN_BAND_GAP)?;
    let mut csv = String::from("band,lower_over_omega,upper_over_omega,chern,raw,raw_refined,grid\n");
    for (band, w) in windows.iter().enumerate() {
        let r = chern_number_on(&schedule, cfg.theta(), *w, cfg.chern_grid)?;
        csv.push_str(&format!(
            "{band},{},{},{},{},{},{}\n",
            num(w.lower),
            num(w.upper),
            r.chern,
            num(r.raw),
            num(r.raw_refined),
            r.grid
        ));
        writeln!(out, 
            "band {band}: ({:+.4}, {:+.4}]  C = {:+}  ({}x{} and {}x{} grids agree)",
            w.lower,
            w.upper,
            r.chern,
            r.grid,
            r.grid,
            2 * r.grid,
            2 * r.grid
        )?;
    }
    let dir = prepare(cfg, "chern")?;
    write(&dir, "chern.csv", &csv)
}

pub struct DecoupleRequest {
    pub theta_over_pi: f64,
    pub k: u32,
    pub phi: f64,
    pub sign: InteractionSign,
    pub json: bool,
    pub csv: bool,
}

pub fn decouple(req: &DecoupleRequest, out: &mut dyn Write) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&req.theta_over_pi) {
        return Err(CliError::Config {
            field: "theta_over_pi".into(),
            message: format!("must lie in [0, 1], got {}", req.theta_over_pi),
        });
    }
    let sol = effective_parameters_signed(req.theta_over_pi * PI, req.k, req.phi, req.sign)?;
    if req.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&sol).expect("solution serializes"))?;
    } else if req.csv {
        write!(out, "{}", decoupling_csv(&[sol]))?;
    } else {
        writeln!(out, "U/J = {:.6}", req.sign.factor() * sol.u_over_j)?;
        writeln!(out, "theta'/pi = {:.6}", sol.theta_prime / PI)?;
        writeln!(out, "phi' = {:.6}", sol.phi_prime)?;
        writeln!(out, "branch = {}", sol.branch)?;
    }
    Ok(())
}

pub fn run_evolve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.require_boundary(Boundary::Open, "evolve")?;
    let schedule = cfg.schedule()?;
    let spec = schedule.lattice;
    let (x, y) = cfg.initial_site;
    if x >= spec.lx || y >= spec.ly {
        return Err(CliError::Config {
            field: "initial_site".into(),
            message: format!("({x}, {y}) lies outside the {}x{} lattice", spec.lx, spec.ly),
        });
    }
    let u = cfg.interaction()?;
    let theta = cfg.theta();
    let basis = TwoParticleBasis::new(spec.site_count());
    let init = TwoParticleState::doublon(&basis, spec.index(x, y));
    let traj = evolve(&init, &schedule, theta, u * theta, cfg.periods, cfg.stride)?;
    let dir = prepare(cfg, "evolve")?;

    let record = TrajectoryRecord::new(&traj, &schedule, theta, u, cfg.amplitudes);
    write(&dir, "trajectory.json", &record.to_json())?;
    let width = cfg.periods.to_string().len().max(4);
    let mut summary = String::from("t,overlap,schmidt_entropy\n");
    for snap in &traj.snapshots {
        let obs = DoublonObservables::of(&basis, &snap.state);
        let s = schmidt_entropy(&basis, &snap.state);
        let t = snap.time as usize;
        summary.push_str(&format!("{t},{},{}\n", num(obs.overlap), num(s)));
        write(&dir, &format!("density/t{t:0width$}.csv"), &density_grid_csv(&obs.density, &spec))?;
        writeln!(out, "t = {t:>width$}  O_d = {:.6}  S = {:.6}", obs.overlap, s)?;
    }
    write(&dir, "overlap.csv", &summary)
}

#[derive(Serialize)]
struct TuneRecord {
    k: u32,
    theta_prime_over_pi: f64,
    theta_over_pi: f64,
    u3_over_j: f64,
    u4_over_j: f64,
    p_dec: f64,
    grid_best: GridBest,
    search_box: SearchBox,
}

#[derive(Serialize)]
struct GridBest {
    u3_over_j: f64,
    u4_over_j: f64,
    p_dec: f64,
}

pub fn stability(cfg: &RunConfig, tune: bool, out: &mut dyn Write) -> Result<(), CliError> {
    for (name, v) in [("u3_over_j", cfg.u3_over_j), ("u4_over_j", cfg.u4_over_j)] {
        if !v.is_finite() {
            return Err(CliError::Config { field: name.into(), message: "must be finite".into() });
        }
    }
    let st = cfg.stability_or_default();
    st.validate()?;
    let grid: Vec<f64> = linspace(st.theta_prime_min_over_pi, st.theta_prime_max_over_pi, st.theta_prime_points)
        .into_iter()
        .map(|x| x * PI)
        .collect();
    let table = sweep_pdec(&st.k_list, &grid, cfg.u3_over_j, cfg.u4_over_j)?;
    let dir = prepare(cfg, "stability")?;
    write(&dir, "pdec.csv", &table.to_csv())?;
    for &k in &st.k_list {
        let best = table.curve(k).min_by(|a, b| a.p_dec.total_cmp(&b.p_dec));
        let worst = table.curve(k).map(|r| r.p_dec).fold(f64::NAN, f64::max);
        match best {
            Some(b) => writeln!(out, 
                "k = {k}: {} points, min P_dec = {:.3e} at theta'/pi = {:.4}, max {:.4}",
                table.curve(k).count(),
                b.p_dec,
                b.theta_prime / PI,
                worst
            )?,
            None => writeln!(out, "k = {k}: no reachable points")?,
        }
    }
    if !table.skipped.is_empty() {
        writeln!(out, "{} grid points out of range (listed in pdec.csv)", table.skipped.len())?;
    }

    if tune || st.tune.is_some() {
        let t = st.tune.clone().unwrap_or_default();
        let search_box = SearchBox::new(t.u3_range, t.u4_range)?;
        let r = tune_interactions(t.theta_prime_over_pi * PI, t.k, search_box)?;
        let record = TuneRecord {
            k: r.k,
            theta_prime_over_pi: r.theta_prime / PI,
            theta_over_pi: r.theta / PI,
            u3_over_j: r.u3,
            u4_over_j: r.u4,
            p_dec: r.p_dec,
            grid_best: GridBest { u3_over_j: r.grid_best.0, u4_over_j: r.grid_best.1, p_dec: r.grid_best.2 },
            search_box,
        };
        write(&dir, "tune.json", &(serde_json::to_string_pretty(&record).expect("record serializes") + "\n"))?;
        writeln!(out, 
            "tuned at theta'/pi = {:.4}, k = {}: U'/J = {:.6}, U''/J = {:.6}, P_dec = {:.3e}",
            record.theta_prime_over_pi, r.k, r.u3, r.u4, r.p_dec
        )?;
    }
    Ok(())
}

pub fn validate(out: &mut dyn Write) -> Result<(), CliError> {
    let outcomes = run_validation(&ValidationFixture::default());
    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag}  {:<42} {:<48} {:>8.3} s", o.name, o.detail, o.seconds)?;
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}
