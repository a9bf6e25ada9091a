//! Run configuration: one TOML file per figure, overridable from flags.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fdsim_core::lattice::{
    build_afi_schedule, build_hhf_schedule, Boundary, HoppingSchedule, LatticeSpec,
};
use fdsim_core::twoparticle::InteractionSign;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Afi,
    Hhf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BoundaryArg {
    Open,
    CylinderY,
    Torus,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Open => Boundary::Open,
            BoundaryArg::CylinderY => Boundary::CylinderY,
            BoundaryArg::Torus => Boundary::Torus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub lx: usize,
    pub ly: usize,
    pub boundary: Boundary,
    pub theta_over_pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_over_j: Option<f64>,
    /// Use the `U < 0` root when `U` comes from `k_index`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub attractive: bool,
    #[serde(default)]
    pub u3_over_j: f64,
    #[serde(default)]
    pub u4_over_j: f64,
    /// Flux per plaquette; hhf only, defaults to 1/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default)]
    pub initial_site: (usize, usize),
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Also export the pair-probability matrix of every snapshot.
    #[serde(default, skip_serializing_if = "is_false")]
    pub amplitudes: bool,
    /// Momenta sampled by `spectrum`.
    #[serde(default = "default_k_points")]
    pub k_points: usize,
    /// Base grid of `chern`; the refinement check uses twice this.
    #[serde(default = "default_chern_grid")]
    pub chern_grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub k_list: Vec<u32>,
    pub theta_prime_min_over_pi: f64,
    pub theta_prime_max_over_pi: f64,
    pub theta_prime_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub theta_prime_over_pi: f64,
    pub k: u32,
    pub u3_range: (f64, f64),
    pub u4_range: (f64, f64),
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            k_list: vec![1, 2, 3, 4],
            theta_prime_min_over_pi: 0.005,
            theta_prime_max_over_pi: 0.995,
            theta_prime_points: 199,
            tune: None,
        }
    }
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { theta_prime_over_pi: 0.6, k: 2, u3_range: (0.0, 2.0), u4_range: (0.0, 2.0) }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}
fn default_periods() -> usize {
    40
}
fn default_stride() -> usize {
    1
}
fn default_k_points() -> usize {
    64
}
fn default_chern_grid() -> usize {
    32
}

impl Default for RunConfig {
    /// The working point: a doublon in the corner of a 9x6 lattice at
    /// `theta = 0.8 pi`, `U = 3J`.
    fn default() -> Self {
        RunConfig {
            model: Model::Afi,
            lx: 9,
            ly: 6,
            boundary: Boundary::Open,
            theta_over_pi: 0.8,
            k_index: Some(2),
            u_over_j: None,
            attractive: false,
            u3_over_j: 0.0,
            u4_over_j: 0.0,
            alpha: None,
            periods: default_periods(),
            initial_site: (0, 0),
            stride: default_stride(),
            amplitudes: false,
            k_points: default_k_points(),
            chern_grid: default_chern_grid(),
            stability: None,
            output: None,
        }
    }
}

/// Flags shared by the configurable subcommands. Anything given here wins
/// over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long)]
    pub lx: Option<usize>,
    #[arg(long)]
    pub ly: Option<usize>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Hopping angle in units of pi
    #[arg(long)]
    pub theta_over_pi: Option<f64>,
    /// Decoupling order; fixes U/J (replaces --u-over-j from the file)
    #[arg(long, conflicts_with = "u_over_j")]
    pub k_index: Option<u32>,
    /// Explicit U/J (replaces k_index from the file)
    #[arg(long, allow_hyphen_values = true)]
    pub u_over_j: Option<f64>,
    /// Take the attractive root when U comes from k_index
    #[arg(long)]
    pub attractive: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub u3_over_j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u4_over_j: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Starting site of the doublon as x,y
    #[arg(long, value_parser = parse_site)]
    pub initial_site: Option<(usize, usize)>,
    #[arg(long)]
    pub amplitudes: bool,
    #[arg(long)]
    pub k_points: Option<usize>,
    #[arg(long)]
    pub chern_grid: Option<usize>,
}

fn parse_site(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse().map_err(|e| format!("x: {e}"))?;
    let y = y.trim().parse().map_err(|e| format!("y: {e}"))?;
    Ok((x, y))
}

fn bad(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.to_string(), message: message.into() }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            // the toml error message already points at the key and line
            let message = e.message();
            let missing = message
                .strip_prefix("missing field `")
                .and_then(|rest| rest.split('`').next())
                .map(str::to_string);
            let field = missing.or_else(|| {
                e.span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
            });
            bad(field.as_deref().unwrap_or("config"), message.to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// File (if any) plus flags.
    pub fn load(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Self::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(o);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.model {
            self.model = v;
        }
        if let Some(v) = o.lx {
            self.lx = v;
        }
        if let Some(v) = o.ly {
            self.ly = v;
        }
        if let Some(v) = o.boundary {
            self.boundary = v.into();
        }
        if let Some(v) = o.theta_over_pi {
            self.theta_over_pi = v;
        }
        if let Some(v) = o.k_index {
            self.k_index = Some(v);
            self.u_over_j = None;
        }
        if let Some(v) = o.u_over_j {
            self.u_over_j = Some(v);
            self.k_index = None;
        }
        self.attractive |= o.attractive;
        if let Some(v) = o.u3_over_j {
            self.u3_over_j = v;
        }
        if let Some(v) = o.u4_over_j {
            self.u4_over_j = v;
        }
        if let Some(v) = o.alpha {
            self.alpha = Some(v);
        }
        if let Some(v) = o.periods {
            self.periods = v;
        }
        if let Some(v) = o.stride {
            self.stride = v;
        }
        if let Some(v) = o.initial_site {
            self.initial_site = v;
        }
        self.amplitudes |= o.amplitudes;
        if let Some(v) = o.k_points {
            self.k_points = v;
        }
        if let Some(v) = o.chern_grid {
            self.chern_grid = v;
        }
        if let Some(v) = &o.out {
            self.output = Some(v.clone());
        }
    }

    /// Checks shared by every subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.theta_over_pi) {
            return Err(bad("theta_over_pi", format!("must lie in [0, 1], got {}", self.theta_over_pi)));
        }
        if self.k_index.is_some() && self.u_over_j.is_some() {
            return Err(bad("k_index", "give either k_index or u_over_j, not both"));
        }
        if self.k_index == Some(0) {
            return Err(bad("k_index", "must be a positive integer"));
        }
        for (name, v) in [("u_over_j", self.u_over_j.unwrap_or(0.0)), ("u3_over_j", self.u3_over_j), ("u4_over_j", self.u4_over_j)] {
            if !v.is_finite() {
                return Err(bad(name, "must be finite"));
            }
        }
        match (self.model, self.alpha) {
            (Model::Afi, Some(a)) if a != 0.0 => {
                return Err(bad("alpha", "only the hhf model carries flux"));
            }
            (_, Some(a)) if !a.is_finite() => return Err(bad("alpha", "must be finite")),
            _ => {}
        }
        if self.periods == 0 {
            return Err(bad("periods", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(bad("stride", "must be at least 1"));
        }
        LatticeSpec::new(self.lx, self.ly, self.boundary).map_err(|e| bad("lx/ly/boundary", e.to_string()))?;
        Ok(())
    }

    pub fn require_boundary(&self, want: Boundary, command: &str) -> Result<(), CliError> {
        if self.boundary != want {
            return Err(bad("boundary", format!("{command} needs boundary = \"{want}\", got \"{}\"", self.boundary)));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta_over_pi * std::f64::consts::PI
    }

    pub fn flux(&self) -> f64 {
        match self.model {
            Model::Afi => 0.0,
            Model::Hhf => self.alpha.unwrap_or(0.5),
        }
    }

    pub fn sign(&self) -> InteractionSign {
        if self.attractive {
            InteractionSign::Attractive
        } else {
            InteractionSign::Repulsive
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec, CliError> {
        LatticeSpec::new(self.lx, self.ly, self.boundary).map_err(|e| bad("lx/ly/boundary", e.to_string()))
    }

    pub fn schedule(&self) -> Result<HoppingSchedule, CliError> {
        let spec = self.lattice()?;
        match self.model {
            Model::Afi => build_afi_schedule(spec),
            Model::Hhf => build_hhf_schedule(spec, self.flux()),
        }
        .map_err(|e| bad("alpha", e.to_string()))
    }

    /// Signed `U/J` of an interacting run.
    pub fn interaction(&self) -> Result<f64, CliError> {
        match (self.k_index, self.u_over_j) {
            (Some(k), None) => {
                let u = fdsim_core::twoparticle::decoupling_ratio(self.theta(), k)?;
                Ok(self.sign().factor() * u)
            }
            (None, Some(u)) => Ok(u),
            _ => Err(bad("k_index", "exactly one of k_index and u_over_j is required")),
        }
    }

    pub fn stability_or_default(&self) -> StabilityConfig {
        self.stability.clone().unwrap_or_default()
    }

    pub fn output_dir(&self, command: &str) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out").join(command))
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(bad("stability.k_list", "needs one or more positive integers"));
        }
        let (lo, hi) = (self.theta_prime_min_over_pi, self.theta_prime_max_over_pi);
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 || lo > hi {
            return Err(bad("stability.theta_prime_min_over_pi", format!("grid [{lo}, {hi}] must lie inside [0, 1] in increasing order")));
        }
        if self.theta_prime_points == 0 {
            return Err(bad("stability.theta_prime_points", "must be at least 1"));
        }
        if let Some(t) = &self.tune {
            if t.k == 0 {
                return Err(bad("stability.tune.k", "must be a positive integer"));
            }
            if !(0.0..1.0).contains(&t.theta_prime_over_pi) {
                return Err(bad("stability.tune.theta_prime_over_pi", "must lie in [0, 1)"));
            }
            for (name, (lo, hi)) in [("stability.tune.u3_range", t.u3_range), ("stability.tune.u4_range", t.u4_range)] {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(bad(name, format!("[{lo}, {hi}] is not an interval")));
                }
            }
        }
        Ok(())
    }
}
