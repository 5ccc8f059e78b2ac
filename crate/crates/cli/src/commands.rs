//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use thinflow::cell::{build_cell_inputs, solve_cell_at, CellSolution, DiskMesh};
use thinflow::problem::{classify, validate_problem, ProblemSpec, Regime};
use thinflow::reconstruct::{reconstruct, CellCache};
use thinflow::reduced1d::{mass_balance, solve_limit, Grid1D};
use thinflow::reference::{mass_balance_report, solve_reference, AxisymMesh, VelocityField};
use thinflow::verify::{norms_for, predicted_rate, reduced_solution, sweep, Verdict};

use crate::config::{parse_config, RunConfig};
use crate::output::{float, write_plot_script, CsvFile, Header};

/// Why a command did not succeed; each kind has its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Unreadable or invalid configuration, or a problem that fails
    /// validation.
    #[error("{0}")]
    Validation(String),
    /// A solver or an output file failed.
    #[error("{0}")]
    Solver(String),
    /// A sweep finished but at least one rate verdict failed.
    #[error("{0}")]
    Verdict(String),
}

impl Failure {
    /// Process exit status.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Verdict(_) => 3,
        }
    }
}

impl From<thinflow::Error> for Failure {
    fn from(e: thinflow::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Solver(format!("output: {e}"))
    }
}

/// Result of a command.
pub type Outcome = Result<(), Failure>;

/// Reads and parses a configuration file.
pub fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

/// Loads a configuration and checks the problem it describes.
fn load_valid(path: &Path) -> Result<(RunConfig, ProblemSpec), Failure> {
    let cfg = load(path)?;
    let spec = cfg.problem_spec();
    let report = validate_problem(&spec);
    if !report.is_ok() {
        let items: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("  {}: {}", v.assumption, v.detail))
            .collect();
        return Err(Failure::Validation(format!(
            "problem validation failed:\n{}",
            items.join("\n")
        )));
    }
    Ok((cfg, spec))
}

fn out_dir(dir: &Path) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

fn describe(regime: &Regime) -> String {
    let (a, b) = regime.exponents();
    format!("alpha = {a}, beta = {b}: {regime}")
}

/// `classify`: prints the regime and the predicted rate of every norm.
pub fn classify_cmd(config: Option<&Path>, alpha: Option<f64>, beta: Option<f64>) -> Outcome {
    let (a, b) = match (config, alpha, beta) {
        (_, Some(a), Some(b)) => (a, b),
        (Some(path), a, b) => {
            let cfg = load(path)?;
            (a.unwrap_or(cfg.regime.alpha), b.unwrap_or(cfg.regime.beta))
        }
        _ => {
            return Err(Failure::Validation(
                "classify needs a config file or both --alpha and --beta".into(),
            ))
        }
    };
    let regime = classify(a, b);
    println!("{}", describe(&regime));
    for id in norms_for(&regime) {
        if let Some(p) = predicted_rate(&regime, id) {
            println!("  {:<16} predicted rate {p}", id.to_string());
        }
    }
    Ok(())
}

/// `validate`: prints `ok` or the itemized violations.
pub fn validate_cmd(config: &Path) -> Outcome {
    let (_, spec) = load_valid(config)?;
    println!("ok: {}", describe(&spec.regime()));
    Ok(())
}

/// `solve-cell`: cell problem at the configured cross-section and time,
/// with `s₀` taken from the limit solution at the nearest grid node and
/// time level.
pub fn solve_cell_cmd(config: &Path, dir: &Path) -> Outcome {
    let (cfg, spec) = load_valid(config)?;
    let disc = &cfg.discretization;
    let grid = Grid1D::for_spec(&spec, disc.n_x, disc.n_t)?;
    let limit = solve_limit(&spec, grid)?;
    let x = disc.cell_x.unwrap_or(0.5 * grid.length);
    let t = disc.cell_t.unwrap_or(grid.horizon);
    if !(0.0..=grid.length).contains(&x) || !(0.0..=grid.horizon).contains(&t) {
        return Err(Failure::Validation(format!(
            "cell_x = {x} and cell_t = {t} must lie in [0, {}] and [0, {}]",
            grid.length, grid.horizon
        )));
    }
    let j = (x / grid.dx()).round() as usize;
    let n = (t / grid.dt()).round() as usize;
    let (xj, tn) = (grid.x(j), grid.t(n));
    let d = spec.derived()?;
    let inputs = build_cell_inputs(&spec, &d, limit.s0[n][j], xj, tn)?;
    let mesh = DiskMesh::new(disc.cell_n_r, disc.cell_n_theta)?;
    let sol = if inputs.is_zero() {
        CellSolution::zero(&mesh, xj, tn)
    } else {
        solve_cell_at(
            &mesh,
            |a, b| spec.cell_tensor(xj, a, b),
            |_, _| inputs.source,
            |th| inputs.flux(th),
            xj,
            tn,
        )?
    };
    let header = Header::new("solve-cell", &cfg.to_toml());
    let mut csv = CsvFile::create(
        &out_dir(dir)?,
        "cell.csv",
        &header,
        &["r", "theta", "u", "du_dxi2", "du_dxi3"],
    )?;
    for i in 0..mesh.n_r {
        for k in 0..mesh.n_theta {
            let idx = mesh.index(i, k);
            let g = sol.gradient[idx];
            csv.floats(&[mesh.radius(i), mesh.angle(k), sol.values[idx], g[0], g[1]])?;
        }
    }
    let path = csv.finish()?;
    println!(
        "cell problem at x = {xj}, t = {tn}: source {}, {} iterations, mean {:e}",
        inputs.source,
        sol.iterations,
        sol.mean()
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// `solve-limit`: limit solution (and corrector in Case 2) on all levels.
pub fn solve_limit_cmd(config: &Path, dir: &Path) -> Outcome {
    let (cfg, spec) = load_valid(config)?;
    let disc = &cfg.discretization;
    let grid = Grid1D::for_spec(&spec, disc.n_x, disc.n_t)?;
    let sol = reduced_solution(&spec, grid)?;
    let header = Header::new("solve-limit", &cfg.to_toml());
    let mut columns = vec!["t", "x1", "p0", "s0"];
    if sol.corrector.is_some() {
        columns.extend(["p_corr", "s_corr"]);
    }
    let mut csv = CsvFile::create(&out_dir(dir)?, "limit.csv", &header, &columns)?;
    for n in 0..=grid.n_t {
        for j in 0..=grid.n_x {
            let mut row = vec![sol.times[n], grid.x(j), sol.p0[n][j], sol.s0[n][j]];
            if let Some(c) = &sol.corrector {
                row.extend([c.p[n][j], c.s[n][j]]);
            }
            csv.floats(&row)?;
        }
    }
    let path = csv.finish()?;
    let balance = mass_balance(&spec, &sol)?;
    println!(
        "limit solve ({}): {} steps, max mass-balance residual {:e}",
        spec.regime(),
        grid.n_t,
        balance.iter().cloned().fold(0.0, f64::max)
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn output_levels(cfg: &RunConfig) -> Vec<usize> {
    let n_t = cfg.discretization.n_t;
    let stride = cfg.discretization.output_stride.unwrap_or(1).max(1);
    let mut levels: Vec<usize> = (0..=n_t).step_by(stride).collect();
    if levels.last() != Some(&n_t) {
        levels.push(n_t);
    }
    levels
}

/// `solve-reference`: axisymmetric reference solution at the output levels.
pub fn solve_reference_cmd(config: &Path, dir: &Path) -> Outcome {
    let (cfg, spec) = load_valid(config)?;
    let disc = &cfg.discretization;
    let grid = Grid1D::for_spec(&spec, disc.n_x, disc.n_t)?;
    let mesh = AxisymMesh::new(
        disc.n_x,
        disc.n_r,
        spec.geometry.length,
        spec.geometry.epsilon,
    )?;
    let sol = solve_reference(&spec, mesh, grid)?;
    let header = Header::new("solve-reference", &cfg.to_toml());
    let mut csv = CsvFile::create(
        &out_dir(dir)?,
        "reference.csv",
        &header,
        &["t", "x1", "r", "P", "S"],
    )?;
    for n in output_levels(&cfg) {
        for j in 0..=mesh.n_x {
            for k in 0..mesh.n_r {
                let i = mesh.index(j, k);
                csv.floats(&[
                    sol.times[n],
                    mesh.x(j),
                    mesh.epsilon * mesh.rho(k),
                    sol.p[n][i],
                    sol.s[n][i],
                ])?;
            }
        }
    }
    let path = csv.finish()?;
    let balance = mass_balance_report(&spec, &sol)?;
    println!(
        "reference solve (epsilon = {}): {} steps, max water-balance residual {:e}",
        spec.geometry.epsilon,
        grid.n_t,
        balance.residual.iter().cloned().fold(0.0, f64::max)
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// Face velocities at the output levels after the initial one. Longitudinal
/// faces lie midway between nodes on the ring centres; radial faces lie on
/// the nodes between adjacent rings.
fn write_velocities(
    dir: &Path,
    header: &Header,
    cfg: &RunConfig,
    mesh: &AxisymMesh,
    times: &[f64],
    velocity: &[VelocityField],
) -> Result<PathBuf, Failure> {
    let mut csv = CsvFile::create(
        dir,
        "velocity.csv",
        header,
        &["t", "face", "x1", "r", "V", "Vw", "Vo"],
    )?;
    let eps = mesh.epsilon;
    for n in output_levels(cfg).into_iter().filter(|&n| n > 0) {
        let v = &velocity[n - 1];
        let t = float(times[n]);
        for f in 0..mesh.n_x {
            let x = 0.5 * (mesh.x(f) + mesh.x(f + 1));
            for k in 0..mesh.n_r {
                let i = f * mesh.n_r + k;
                let (xv, rv) = (float(x), float(eps * mesh.rho(k)));
                let vals = [v.x_total[i], v.x_water[i], v.x_oil[i]].map(float);
                csv.row([t.as_str(), "x", &xv, &rv, &vals[0], &vals[1], &vals[2]])?;
            }
        }
        for j in 0..=mesh.n_x {
            for k in 0..mesh.n_r - 1 {
                let i = j * (mesh.n_r - 1) + k;
                let (xv, rv) = (float(mesh.x(j)), float(eps * mesh.rho_face(k)));
                let vals = [v.r_total[i], v.r_water[i], v.r_oil[i]].map(float);
                csv.row([t.as_str(), "r", &xv, &rv, &vals[0], &vals[1], &vals[2]])?;
            }
        }
    }
    Ok(csv.finish()?)
}

/// `reconstruct`: asymptotic approximation on the reference mesh.
pub fn reconstruct_cmd(config: &Path, dir: &Path) -> Outcome {
    let (cfg, spec) = load_valid(config)?;
    let disc = &cfg.discretization;
    let grid = Grid1D::for_spec(&spec, disc.n_x, disc.n_t)?;
    let reduced = reduced_solution(&spec, grid)?;
    let mesh = AxisymMesh::new(
        disc.n_x,
        disc.n_r,
        spec.geometry.length,
        spec.geometry.epsilon,
    )?;
    let cache = CellCache::build(&spec, &mesh)?;
    let approx = reconstruct(&spec, &reduced, &cache, &mesh)?;
    let header = Header::new("reconstruct", &cfg.to_toml());
    let dir = out_dir(dir)?;
    let mut csv = CsvFile::create(
        &dir,
        "approximation.csv",
        &header,
        &["t", "x1", "r", "P", "S", "Pw", "Po"],
    )?;
    for n in output_levels(&cfg) {
        for j in 0..=mesh.n_x {
            for k in 0..mesh.n_r {
                let i = mesh.index(j, k);
                csv.floats(&[
                    reduced.times[n],
                    mesh.x(j),
                    mesh.epsilon * mesh.rho(k),
                    approx.p[n][i],
                    approx.s[n][i],
                    approx.pw[n][i],
                    approx.po[n][i],
                ])?;
            }
        }
    }
    let path = csv.finish()?;
    let velocity = write_velocities(&dir, &header, &cfg, &mesh, &reduced.times, &approx.velocity)?;
    println!(
        "approximation ({}) at epsilon = {}",
        spec.regime(),
        spec.geometry.epsilon
    );
    println!("wrote {}", path.display());
    println!("wrote {}", velocity.display());
    Ok(())
}

/// `sweep`: ε-sweep with error and rate tables and a plot script.
pub fn sweep_cmd(config: &Path, dir: &Path) -> Outcome {
    let (cfg, spec) = load_valid(config)?;
    let report = sweep(&spec, &cfg.sweep_config())?;
    let dir = out_dir(dir)?;
    let header = Header::new("sweep", &cfg.to_toml());
    let mut errors = CsvFile::create(&dir, "errors.csv", &header, &["eps", "norm_id", "value"])?;
    for r in &report.records {
        errors.row([float(r.epsilon), r.norm.to_string(), float(r.value)])?;
    }
    let errors = errors.finish()?;
    let mut rates = CsvFile::create(
        &dir,
        "rates.csv",
        &header,
        &["norm_id", "fitted", "predicted", "verdict"],
    )?;
    println!(
        "{:<16} {:>8} {:>10}  verdict",
        "norm", "fitted", "predicted"
    );
    for row in &report.rates {
        let predicted = row.predicted.map(float).unwrap_or_default();
        rates.row([
            row.norm.to_string(),
            float(row.fit.slope),
            predicted,
            row.verdict.to_string(),
        ])?;
        println!(
            "{:<16} {:>8.3} {:>10}  {}",
            row.norm.to_string(),
            row.fit.slope,
            row.predicted
                .map(|p| format!("{p:.3}"))
                .unwrap_or_else(|| "-".into()),
            row.verdict
        );
    }
    let rates = rates.finish()?;
    let plot = write_plot_script(&dir, &header)?;
    for p in [errors, rates, plot] {
        println!("wrote {}", p.display());
    }
    let failed: Vec<String> = report
        .rates
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .map(|r| r.norm.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!(
            "rate verdict failed for {}",
            failed.join(", ")
        )))
    }
}
