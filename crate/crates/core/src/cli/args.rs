use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qbmlab", version, about = "Non-Markovian quantum Brownian motion laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate Delta, gamma and their integrals on a time grid.
    Coeffs(CoeffsArgs),
    /// Heating, position variance, Mandel Q and Wigner parameters.
    Observables(ObservablesArgs),
    /// Doubled-space Monte Carlo estimate of the heating function.
    Mc(McArgs),
    /// Lindblad / non-Lindblad border tools.
    #[command(subcommand)]
    Border(BorderCommand),
    /// Gaussian Wigner function of an initially coherent state.
    Wigner(WignerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// `r0 = omega_0 / (2 pi kT)`.
    Appendix,
    /// `r0 = omega_0 / kT`.
    Fig1,
}

#[derive(Debug, Clone, Args)]
pub struct ReservoirArgs {
    /// Coupling constant.
    #[arg(long)]
    pub alpha: f64,
    /// Cutoff ratio `omega_c / omega_0`.
    #[arg(long)]
    pub r: f64,
    /// Temperature `kT / omega_0`.
    #[arg(long, group = "temperature")]
    pub theta: Option<f64>,
    /// Temperature through `r0`, read according to `--convention`.
    #[arg(long, group = "temperature")]
    pub r0: Option<f64>,
    /// Temperature through `rc = omega_c / (2 pi kT)`.
    #[arg(long = "rc-over-2pi", group = "temperature")]
    pub rc_over_2pi: Option<f64>,
    /// Temperature through `2 pi rc = omega_c / kT`.
    #[arg(long = "rc-times-2pi", group = "temperature")]
    pub rc_times_2pi: Option<f64>,
    /// How `--r0` is read.
    #[arg(long, value_enum, default_value = "appendix")]
    pub convention: Convention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Last grid time in `1/omega_0` (default `10/r`).
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Number of grid points (default: at least 4000 and fine enough for
    /// a step of `min(1/r, 1)/20`).
    #[arg(long = "n")]
    pub n_points: Option<usize>,
    #[arg(long, value_enum, default_value = "linear")]
    pub spacing: Spacing,
    /// First positive time of a log grid (default `1e-6 tmax`).
    #[arg(long)]
    pub tmin: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output CSV; defaults to a fixed name in `$QBMLAB_OUT_DIR` or the
    /// current directory. A JSON run record is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub reservoir: ReservoirArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also tabulate the Pi and r coefficients by quadrature.
    #[arg(long)]
    pub with_pi_r: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Observable {
    All,
    N,
    Varx,
    Q,
    Wigner,
}

#[derive(Debug, Args)]
pub struct ObservablesArgs {
    #[command(flatten)]
    pub reservoir: ReservoirArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// ground | fock:N | coherent:RE,IM | squeezed:S | thermal:NBAR
    #[arg(long, default_value = "ground")]
    pub state: String,
    #[arg(long, value_enum, default_value = "all")]
    pub obs: Observable,
    /// Add the undamped position variance.
    #[arg(long)]
    pub free_reference: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub reservoir: ReservoirArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// fock:N | coherent:RE,IM
    #[arg(long, default_value = "fock:0")]
    pub state: String,
    #[arg(long, default_value_t = 10_000)]
    pub ntraj: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of equally spaced sample times on `[0, tmax]`.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 30)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_trunc: f64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Subcommand)]
pub enum BorderCommand {
    /// Negative intervals of Delta and Delta -+ gamma.
    Profile(ProfileArgs),
    /// Print `lindblad-type` or `non-lindblad-type`.
    Classify(ClassifyArgs),
    /// Critical cutoff ratio of the high-temperature diffusion coefficient.
    CriticalR(CriticalRArgs),
    /// Field over `(r, omega_c t)` and its zero contour.
    Contour(ContourArgs),
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub reservoir: ReservoirArgs,
    /// Time horizon in `1/omega_0` (default `max(20/r, 40 pi)`).
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 4000)]
    pub points: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub reservoir: ReservoirArgs,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CriticalRArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Fixed horizon for every `r` (default `max(20/r, 40 pi)`).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    HighT,
    General,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[arg(long, value_enum, default_value = "high-t")]
    pub regime: RegimeArg,
    /// `2 pi rc = omega_c / kT`, held fixed along the scan (general regime).
    #[arg(long = "rc-times-2pi", default_value_t = 10.0)]
    pub rc_times_2pi: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 40)]
    pub nr: usize,
    #[arg(long, default_value_t = 20.0)]
    pub wct_max: f64,
    #[arg(long, default_value_t = 201)]
    pub nt: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct WignerArgs {
    #[command(flatten)]
    pub reservoir: ReservoirArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Initial coherent amplitude `RE,IM`.
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    pub alpha0: String,
    /// Snapshot times for the 2-D field, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Half width of the square snapshot window around the center.
    #[arg(long, default_value_t = 3.0)]
    pub extent: f64,
    /// Points per axis of each snapshot.
    #[arg(long, default_value_t = 61)]
    pub resolution: usize,
    #[command(flatten)]
    pub out: OutArgs,
}
