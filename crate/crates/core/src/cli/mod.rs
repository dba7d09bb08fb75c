//! Command-line front end. Every subcommand validates its inputs, writes CSV
//! output plus a JSON run record, and maps failures to exit codes
//! 2 (invalid input) and 3 (numerical failure).

mod args;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde_json::{json, Value};

pub use args::*;

use crate::analytic::{heating_at, InitialStateMoments, ObservableSeries};
use crate::border::{
    classify, contour_grid, critical_r_high_t, default_horizon, sign_profiles, write_border_csv,
    write_profiles_csv, Regime,
};
use crate::coefficients::{build_grid, log_grid, uniform_grid, CoefficientGrid, GridOptions, ReservoirSpec};
use crate::nmwf::{run_ensemble, InitialCondition, TrajectoryConfig};
use crate::{io, Error};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QBMLAB_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "invalid input: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Self::Validation(e.to_string())
        } else {
            Self::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Validation(format!("output: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Coeffs(a) => cmd_coeffs(&a),
        Command::Observables(a) => cmd_observables(&a),
        Command::Mc(a) => cmd_mc(&a),
        Command::Border(b) => cmd_border(&b),
        Command::Wigner(a) => cmd_wigner(&a),
    }
}

/// Resolved reservoir and a record of how the temperature was given.
pub fn resolve_reservoir(a: &ReservoirArgs) -> CliResult<(ReservoirSpec, Value)> {
    let (spec, flag, value, mapping) = match (a.theta, a.r0, a.rc_over_2pi, a.rc_times_2pi) {
        (Some(t), None, None, None) => (ReservoirSpec::new(a.alpha, a.r, t)?, "theta", t, "theta"),
        (None, Some(r0), None, None) => match a.convention {
            Convention::Appendix => (
                ReservoirSpec::from_r0(a.alpha, a.r, r0)?,
                "r0",
                r0,
                "theta = 1/(2 pi r0)",
            ),
            Convention::Fig1 => (
                ReservoirSpec::from_r0_no_2pi(a.alpha, a.r, r0)?,
                "r0",
                r0,
                "theta = 1/r0",
            ),
        },
        (None, None, Some(rc), None) => (
            ReservoirSpec::from_rc(a.alpha, a.r, rc)?,
            "rc-over-2pi",
            rc,
            "theta = r/(2 pi rc)",
        ),
        (None, None, None, Some(y)) => {
            if !(y.is_finite() && y > 0.0) {
                return Err(invalid(format!("--rc-times-2pi = {y} must be > 0")));
            }
            (ReservoirSpec::new(a.alpha, a.r, a.r / y)?, "rc-times-2pi", y, "theta = r/value")
        }
        (None, None, None, None) => {
            return Err(invalid(
                "give the temperature with one of --theta, --r0, --rc-over-2pi, --rc-times-2pi",
            ))
        }
        _ => return Err(invalid("give only one temperature flag")),
    };
    if spec.strong_coupling_advisory() {
        log::warn!("alpha = {} is outside the weak-coupling regime", spec.alpha);
    }
    let echo = json!({
        "alpha": spec.alpha,
        "r": spec.r,
        "theta": spec.theta,
        "r0": spec.r0(),
        "rc": spec.rc(),
        "temperature_input": {
            "flag": flag,
            "value": value,
            "convention": match a.convention { Convention::Appendix => "appendix", Convention::Fig1 => "fig1" },
            "mapping": mapping,
        },
    });
    Ok((spec, echo))
}

fn grid_times(spec: &ReservoirSpec, g: &GridArgs) -> CliResult<(Vec<f64>, Value)> {
    let tmax = g.tmax.unwrap_or(10.0 / spec.r);
    let n_points = g.n_points.unwrap_or_else(|| {
        let step = (1.0 / spec.r).min(1.0) / 20.0;
        ((tmax / step).ceil() as usize + 1).max(4000)
    });
    let t = match g.spacing {
        Spacing::Linear => uniform_grid(tmax, n_points)?,
        Spacing::Log => log_grid(g.tmin.unwrap_or(1e-6 * tmax), tmax, n_points)?,
    };
    let echo = json!({
        "tmax": tmax,
        "n": n_points,
        "spacing": match g.spacing { Spacing::Linear => "linear", Spacing::Log => "log" },
        "tmin": g.tmin,
    });
    Ok((t, echo))
}

/// Output directory: `$QBMLAB_OUT_DIR` or the current directory.
pub fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn out_path(o: &OutArgs, default: &str) -> PathBuf {
    o.out.clone().unwrap_or_else(|| out_dir().join(default))
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn write_record(csv: &Path, record: &Value) -> CliResult<()> {
    let path = sibling(csv, "", "json");
    let text = serde_json::to_string_pretty(record).map_err(|e| invalid(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn parse_pair(s: &str) -> CliResult<Complex64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| invalid(format!("bad number '{x}' in '{s}'")));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(invalid(format!("expected RE or RE,IM, got '{s}'"))),
    }
}

/// `ground | fock:N | coherent:RE,IM | squeezed:S | thermal:NBAR`.
pub fn parse_state(s: &str) -> CliResult<InitialStateMoments> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let m = match kind {
        "ground" => InitialStateMoments::ground(),
        "fock" => InitialStateMoments::fock(arg.parse().map_err(|_| invalid(format!("bad Fock index '{arg}'")))?),
        "coherent" => InitialStateMoments::coherent(parse_pair(arg)?),
        "squeezed" => InitialStateMoments::squeezed(arg.parse().map_err(|_| invalid(format!("bad squeezing '{arg}'")))?)?,
        "thermal" => InitialStateMoments::thermal(arg.parse().map_err(|_| invalid(format!("bad occupation '{arg}'")))?)?,
        _ => return Err(invalid(format!("unknown state '{s}'"))),
    };
    m.validate()?;
    Ok(m)
}

/// Monte Carlo initial states: `ground | fock:N | coherent:RE,IM`.
pub fn parse_mc_state(s: &str) -> CliResult<InitialCondition> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "ground" => Ok(InitialCondition::Fock(0)),
        "fock" => Ok(InitialCondition::Fock(
            arg.parse().map_err(|_| invalid(format!("bad Fock index '{arg}'")))?,
        )),
        "coherent" => Ok(InitialCondition::Coherent(parse_pair(arg)?)),
        _ => Err(invalid(format!(
            "Monte Carlo starts from fock:N or coherent:RE,IM, got '{s}'"
        ))),
    }
}

fn reservoir_grid(r: &ReservoirArgs, g: &GridArgs, opts: &GridOptions) -> CliResult<(ReservoirSpec, CoefficientGrid, Value, Value)> {
    let (spec, spec_echo) = resolve_reservoir(r)?;
    let (t, grid_echo) = grid_times(&spec, g)?;
    let grid = build_grid(&spec, &t, opts)?;
    Ok((spec, grid, spec_echo, grid_echo))
}

pub fn cmd_coeffs(a: &CoeffsArgs) -> CliResult<()> {
    let opts = GridOptions {
        with_pi_r: a.with_pi_r,
        ..GridOptions::default()
    };
    let (_, grid, spec_echo, grid_echo) = reservoir_grid(&a.reservoir, &a.grid, &opts)?;
    let path = out_path(&a.out, "coeffs.csv");
    grid.write_csv(File::create(&path)?)?;
    write_record(&path, &json!({
        "command": "coeffs",
        "reservoir": spec_echo,
        "grid": grid_echo,
        "with_pi_r": a.with_pi_r,
        "csv": path,
    }))?;
    println!("{}", path.display());
    Ok(())
}

pub fn cmd_observables(a: &ObservablesArgs) -> CliResult<()> {
    let m = parse_state(&a.state)?;
    let (_, grid, spec_echo, grid_echo) = reservoir_grid(&a.reservoir, &a.grid, &GridOptions::default())?;
    let series = ObservableSeries::compute(&grid, &m, a.free_reference)?;
    let path = out_path(&a.out, "observables.csv");
    let f = File::create(&path)?;
    let free = series.var_x_free.as_deref();
    match a.obs {
        Observable::All => series.write_csv(f)?,
        Observable::N => io::write_columns(f, &["t", "n_mean"], &[&series.t, &series.n_mean])?,
        Observable::Varx => match free {
            Some(v) => io::write_columns(f, &["t", "var_x", "var_x_free"], &[&series.t, &series.var_x, v])?,
            None => io::write_columns(f, &["t", "var_x"], &[&series.t, &series.var_x])?,
        },
        Observable::Q => io::write_columns(f, &["t", "mandel_q"], &[&series.t, &series.mandel_q])?,
        Observable::Wigner => io::write_columns(
            f,
            &["t", "wigner_center_re", "wigner_center_im", "wigner_width"],
            &[&series.t, &series.wigner_center_re, &series.wigner_center_im, &series.wigner_width],
        )?,
    }
    write_record(&path, &json!({
        "command": "observables",
        "reservoir": spec_echo,
        "grid": grid_echo,
        "state": a.state,
        "moments": m,
        "obs": format!("{:?}", a.obs).to_lowercase(),
        "free_reference": a.free_reference,
        "csv": path,
    }))?;
    println!("{}", path.display());
    Ok(())
}

pub fn cmd_mc(a: &McArgs) -> CliResult<()> {
    let start = Instant::now();
    let initial = parse_mc_state(&a.state)?;
    if a.samples < 2 {
        return Err(invalid("--samples must be >= 2"));
    }
    let (spec, grid, spec_echo, grid_echo) = reservoir_grid(&a.reservoir, &a.grid, &GridOptions::default())?;
    let tmax = grid.t_end();
    let samples: Vec<f64> = (0..a.samples)
        .map(|i| tmax * i as f64 / (a.samples - 1) as f64)
        .collect();
    let mut cfg = TrajectoryConfig::new(initial, samples);
    cfg.n_max = a.n_max;
    cfg.beta = a.beta;
    cfg.eps_trunc = a.eps_trunc;
    cfg.seed = a.seed;
    cfg.n_traj = a.ntraj;
    cfg.max_step = TrajectoryConfig::max_step_for(spec.r);
    cfg.workers = a.workers;
    let est = run_ensemble(&cfg, &grid)?;
    let analytic: Vec<f64> = est
        .t
        .iter()
        .map(|&t| heating_at(&grid, est.n0, t))
        .collect::<crate::Result<_>>()?;
    let path = out_path(&a.out, "mc.csv");
    est.write_csv(File::create(&path)?, Some(&analytic))?;
    let jumps_per_traj: f64 = est
        .jump_histogram
        .iter()
        .enumerate()
        .map(|(k, &c)| k as f64 * c as f64)
        .sum::<f64>()
        / est.n_traj as f64;
    if est.multi_jump_fraction > 0.1 && a.beta != 1.0 {
        log::warn!(
            "{:.1}% of trajectories jumped more than once; the beta rescaling may be biased",
            100.0 * est.multi_jump_fraction
        );
    }
    write_record(&path, &json!({
        "command": "mc",
        "reservoir": spec_echo,
        "grid": grid_echo,
        "state": a.state,
        "ntraj": a.ntraj,
        "beta": a.beta,
        "seed": a.seed,
        "samples": a.samples,
        "n_max": a.n_max,
        "eps_trunc": a.eps_trunc,
        "n0": est.n0,
        "multi_jump_fraction": est.multi_jump_fraction,
        "jumps_per_trajectory": jumps_per_traj,
        "jump_histogram": est.jump_histogram,
        "max_weight": est.max_weight,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "csv": path,
    }))?;
    println!("{}", path.display());
    Ok(())
}

pub fn cmd_border(b: &BorderCommand) -> CliResult<()> {
    match b {
        BorderCommand::Profile(a) => {
            let (spec, spec_echo) = resolve_reservoir(&a.reservoir)?;
            let horizon = a.horizon.unwrap_or_else(|| default_horizon(spec.r));
            let profiles = sign_profiles(&spec, horizon, a.points)?;
            let path = out_path(&a.out, "profile.csv");
            write_profiles_csv(File::create(&path)?, &profiles)?;
            write_record(&path, &json!({
                "command": "border profile",
                "reservoir": spec_echo,
                "horizon": horizon,
                "points": a.points,
                "profiles": profiles,
                "csv": path,
            }))?;
            println!("{}", path.display());
        }
        BorderCommand::Classify(a) => {
            let (spec, _) = resolve_reservoir(&a.reservoir)?;
            let horizon = a.horizon.unwrap_or_else(|| default_horizon(spec.r));
            println!("{}", classify(&spec, horizon)?.label());
        }
        BorderCommand::CriticalR(a) => {
            println!("{}", io::fmt_num(critical_r_high_t(a.horizon, a.tol)?));
        }
        BorderCommand::Contour(a) => {
            if a.nr < 2 || a.nt < 2 || !(a.r_min > 0.0 && a.r_max > a.r_min && a.wct_max > 0.0) {
                return Err(invalid("contour needs nr, nt >= 2, 0 < r-min < r-max and wct-max > 0"));
            }
            let r: Vec<f64> = (0..a.nr)
                .map(|i| a.r_min + (a.r_max - a.r_min) * i as f64 / (a.nr - 1) as f64)
                .collect();
            let wct: Vec<f64> = (0..a.nt).map(|j| a.wct_max * j as f64 / (a.nt - 1) as f64).collect();
            let regime = match a.regime {
                RegimeArg::HighT => Regime::HighT,
                RegimeArg::General => Regime::General { rc_times_2pi: a.rc_times_2pi },
            };
            let field = contour_grid(regime, &r, &wct)?;
            let path = out_path(&a.out, "contour.csv");
            field.write_csv(File::create(&path)?)?;
            let border_path = sibling(&path, "_border", "csv");
            write_border_csv(File::create(&border_path)?, &field.border()?)?;
            write_record(&path, &json!({
                "command": "border contour",
                "regime": regime,
                "theta_rule": match regime {
                    Regime::HighT => "field independent of alpha and theta".to_string(),
                    Regime::General { rc_times_2pi } => format!("theta = r / {rc_times_2pi}"),
                },
                "r": [a.r_min, a.r_max, a.nr],
                "wct": [0.0, a.wct_max, a.nt],
                "csv": path,
                "border_csv": border_path,
            }))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

pub fn cmd_wigner(a: &WignerArgs) -> CliResult<()> {
    let alpha0 = parse_pair(&a.alpha0)?;
    let m = InitialStateMoments::coherent(alpha0);
    let (_, grid, spec_echo, grid_echo) = reservoir_grid(&a.reservoir, &a.grid, &GridOptions::default())?;
    let series = ObservableSeries::compute(&grid, &m, false)?;
    let path = out_path(&a.out, "wigner.csv");
    io::write_columns(
        File::create(&path)?,
        &["t", "center_re", "center_im", "width"],
        &[&series.t, &series.wigner_center_re, &series.wigner_center_im, &series.wigner_width],
    )?;
    let mut field_path = None;
    if !a.times.is_empty() {
        if a.resolution < 2 || !(a.extent > 0.0) {
            return Err(invalid("--resolution must be >= 2 and --extent > 0"));
        }
        let (mut ts, mut xs, mut ps, mut ws) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &t in &a.times {
            let w = crate::analytic::wigner_coherent(&grid, alpha0, t)?;
            for i in 0..a.resolution {
                for j in 0..a.resolution {
                    let step = 2.0 * a.extent / (a.resolution - 1) as f64;
                    let z = w.center + Complex64::new(-a.extent + i as f64 * step, -a.extent + j as f64 * step);
                    ts.push(t);
                    xs.push(z.re);
                    ps.push(z.im);
                    ws.push(w.eval(z));
                }
            }
        }
        let fp = sibling(&path, "_field", "csv");
        io::write_columns(File::create(&fp)?, &["t", "re", "im", "w"], &[&ts, &xs, &ps, &ws])?;
        field_path = Some(fp);
    }
    write_record(&path, &json!({
        "command": "wigner",
        "reservoir": spec_echo,
        "grid": grid_echo,
        "alpha0": [alpha0.re, alpha0.im],
        "times": a.times,
        "csv": path,
        "field_csv": field_path,
    }))?;
    println!("{}", path.display());
    Ok(())
}
