//! Square-lattice geometry and periodic hopping schedules.
//!
//! Sites are indexed row-major, `index = x + lx * y`, with the origin at the
//! bottom-left corner. A link `(i, j, phase)` always points from `i` to its
//! forward neighbour `j` along `+x` or `+y` (possibly through a periodic
//! boundary) and contributes `-J (e^{i phase} a_i^dagger a_j + h.c.)` to the
//! step Hamiltonian.
//!
//! The built-in drives split the bonds into four classes by direction and by
//! the parity of `x + y` at the origin site. Each class is a perfect matching
//! of the bulk, so every site hops exactly once per step away from open
//! edges. The classes are applied in the order
//!
//! ```text
//! step 1: +y bonds from even sites
//! step 2: +x bonds from even sites
//! step 3: +y bonds from odd sites
//! step 4: +x bonds from odd sites
//! ```
//!
//! which makes edge wave packets (and doublons at the `theta = 0.8 pi`,
//! `U = 3 J` working point) circulate clockwise around an open lattice.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    /// Periodic along `y`, open along `x`.
    CylinderY,
    Torus,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "cylinder_y" | "cylinder" => Ok(Boundary::CylinderY),
            "torus" => Ok(Boundary::Torus),
            other => Err(Error::InvalidLattice(format!("unknown boundary '{other}'"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::CylinderY => "cylinder_y",
            Boundary::Torus => "torus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    X,
    Y,
}

/// Geometric relation between the two ends of a forward link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub direction: Direction,
    /// The link crosses a periodic boundary.
    pub wrapped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub lx: usize,
    pub ly: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(lx: usize, ly: usize, boundary: Boundary) -> Result<Self> {
        let spec = LatticeSpec { lx, ly, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn open(lx: usize, ly: usize) -> Result<Self> {
        Self::new(lx, ly, Boundary::Open)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lx < 2 || self.ly < 2 {
            return Err(Error::InvalidLattice(format!(
                "lattice must be at least 2x2, got {}x{}",
                self.lx, self.ly
            )));
        }
        if self.wraps_y() && !self.ly.is_multiple_of(2) {
            return Err(Error::InvalidLattice(format!(
                "ly must be even for a {} boundary, got {}",
                self.boundary, self.ly
            )));
        }
        if self.wraps_x() && !self.lx.is_multiple_of(2) {
            return Err(Error::InvalidLattice(format!(
                "lx must be even for a torus, got {}",
                self.lx
            )));
        }
        Ok(())
    }

    pub fn site_count(&self) -> usize {
        self.lx * self.ly
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.lx && y < self.ly);
        x + self.lx * y
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.lx, site / self.lx)
    }

    pub fn wraps_x(&self) -> bool {
        self.boundary == Boundary::Torus
    }

    pub fn wraps_y(&self) -> bool {
        matches!(self.boundary, Boundary::CylinderY | Boundary::Torus)
    }

    /// Forward neighbour of `site` along `direction`, with a flag telling
    /// whether the hop crosses a periodic boundary.
    pub fn forward(&self, site: usize, direction: Direction) -> Option<(usize, bool)> {
        let (x, y) = self.coords(site);
        match direction {
            Direction::X if x + 1 < self.lx => Some((self.index(x + 1, y), false)),
            Direction::X if self.wraps_x() => Some((self.index(0, y), true)),
            Direction::Y if y + 1 < self.ly => Some((self.index(x, y + 1), false)),
            Direction::Y if self.wraps_y() => Some((self.index(x, 0), true)),
            _ => None,
        }
    }

    /// Classifies `i -> j` as a forward nearest-neighbour bond.
    pub fn bond(&self, i: usize, j: usize) -> Option<Bond> {
        let n = self.site_count();
        if i >= n || j >= n || i == j {
            return None;
        }
        for direction in [Direction::X, Direction::Y] {
            if let Some((target, wrapped)) = self.forward(i, direction) {
                if target == j {
                    return Some(Bond { direction, wrapped });
                }
            }
        }
        None
    }

    /// Every forward nearest-neighbour bond `(origin, direction)`.
    pub fn bonds(&self) -> Vec<(usize, Direction)> {
        let mut out = Vec::new();
        for site in 0..self.site_count() {
            for direction in [Direction::X, Direction::Y] {
                if self.forward(site, direction).is_some() {
                    out.push((site, direction));
                }
            }
        }
        out
    }

    /// Number of nearest-neighbour bonds; for open boundaries
    /// `lx (ly - 1) + ly (lx - 1)`.
    pub fn bond_count(&self) -> usize {
        self.bonds().len()
    }

    /// Sites at distance at least `depth` from every open edge.
    pub fn is_interior(&self, site: usize, depth: usize) -> bool {
        let (x, y) = self.coords(site);
        let x_ok = self.wraps_x() || (x >= depth && x + depth < self.lx);
        let y_ok = self.wraps_y() || (y >= depth && y + depth < self.ly);
        x_ok && y_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Link {
    pub i: usize,
    pub j: usize,
    /// Hopping phase in radians.
    pub phase: f64,
}

impl From<(usize, usize, f64)> for Link {
    fn from((i, j, phase): (usize, usize, f64)) -> Self {
        Link { i, j, phase }
    }
}

impl From<Link> for (usize, usize, f64) {
    fn from(l: Link) -> Self {
        (l.i, l.j, l.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HoppingStep {
    pub links: Vec<Link>,
}

impl HoppingStep {
    pub fn new(links: Vec<Link>) -> Self {
        HoppingStep { links }
    }

    /// Partner site and link for every site touched by this step.
    pub fn partners(&self) -> HashMap<usize, (usize, &Link)> {
        let mut map = HashMap::with_capacity(2 * self.links.len());
        for link in &self.links {
            map.insert(link.i, (link.j, link));
            map.insert(link.j, (link.i, link));
        }
        map
    }
}

/// One drive period: an ordered list of equal-duration hopping steps.
///
/// The step duration is `tau = theta / J`; with `J = 1` the period is
/// `T = N theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingSchedule {
    pub lattice: LatticeSpec,
    pub steps: Vec<HoppingStep>,
}

impl HoppingSchedule {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn tau(&self, theta: f64) -> f64 {
        theta
    }

    pub fn period(&self, theta: f64) -> f64 {
        self.steps.len() as f64 * self.tau(theta)
    }

    /// Drive frequency `Omega = 2 pi / T`.
    pub fn omega(&self, theta: f64) -> f64 {
        2.0 * PI / self.period(theta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    /// Parses a schedule document and rejects it unless it validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let schedule: HoppingSchedule = serde_json::from_str(text)?;
        schedule.lattice.validate()?;
        let report = validate_schedule(&schedule);
        if !report.is_valid() {
            return Err(Error::InvalidSchedule(report.to_string()));
        }
        Ok(schedule)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("schedule serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    /// Same schedule with every phase of a `+y` link shifted by `chi`.
    pub fn with_y_phase_shift(&self, chi: f64) -> HoppingSchedule {
        let mut out = self.clone();
        for step in &mut out.steps {
            for link in &mut step.links {
                if let Some(b) = self.lattice.bond(link.i, link.j) {
                    if b.direction == Direction::Y {
                        link.phase += chi;
                    }
                }
            }
        }
        out
    }
}

/// A set of parallel bonds activated together in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BondClass {
    pub direction: Direction,
    /// Parity of `x + y` at the origin site.
    pub parity: usize,
}

impl BondClass {
    pub const VERTICAL_EVEN: BondClass = BondClass { direction: Direction::Y, parity: 0 };
    pub const HORIZONTAL_EVEN: BondClass = BondClass { direction: Direction::X, parity: 0 };
    pub const VERTICAL_ODD: BondClass = BondClass { direction: Direction::Y, parity: 1 };
    pub const HORIZONTAL_ODD: BondClass = BondClass { direction: Direction::X, parity: 1 };
}

/// Step order giving clockwise edge circulation.
pub const CLOCKWISE_ORDER: [BondClass; 4] = [
    BondClass::VERTICAL_EVEN,
    BondClass::HORIZONTAL_EVEN,
    BondClass::VERTICAL_ODD,
    BondClass::HORIZONTAL_ODD,
];

/// Reversed temporal order; edge motion runs counter-clockwise.
pub const COUNTERCLOCKWISE_ORDER: [BondClass; 4] = [
    BondClass::HORIZONTAL_EVEN,
    BondClass::VERTICAL_EVEN,
    BondClass::HORIZONTAL_ODD,
    BondClass::VERTICAL_ODD,
];

/// Builds a schedule from an arbitrary order of bond classes, with `+y`
/// links carrying the Landau-gauge phase `2 pi alpha x`.
pub fn build_schedule_with_order(
    spec: LatticeSpec,
    order: &[BondClass],
    alpha: f64,
) -> Result<HoppingSchedule> {
    spec.validate()?;
    if spec.wraps_x() {
        let winding = alpha * spec.lx as f64;
        if (winding - winding.round()).abs() > 1e-9 {
            return Err(Error::InvalidLattice(format!(
                "flux alpha = {alpha} is not commensurate with a periodic lx = {}",
                spec.lx
            )));
        }
    }
    let steps = order
        .iter()
        .map(|class| {
            let mut links = Vec::new();
            for y in 0..spec.ly {
                for x in 0..spec.lx {
                    if (x + y) % 2 != class.parity {
                        continue;
                    }
                    let i = spec.index(x, y);
                    if let Some((j, _)) = spec.forward(i, class.direction) {
                        let phase = match class.direction {
                            Direction::X => 0.0,
                            Direction::Y => 2.0 * PI * alpha * x as f64,
                        };
                        links.push(Link { i, j, phase });
                    }
                }
            }
            HoppingStep { links }
        })
        .collect();
    Ok(HoppingSchedule { lattice: spec, steps })
}

/// Anomalous Floquet insulator drive: four steps, all phases zero.
pub fn build_afi_schedule(spec: LatticeSpec) -> Result<HoppingSchedule> {
    build_schedule_with_order(spec, &CLOCKWISE_ORDER, 0.0)
}

/// Harper-Hofstadter-Floquet drive with flux `alpha` per plaquette
/// (in flux quanta); `alpha = 1/2` puts phase `pi x` on every `+y` link.
pub fn build_hhf_schedule(spec: LatticeSpec, alpha: f64) -> Result<HoppingSchedule> {
    build_schedule_with_order(spec, &CLOCKWISE_ORDER, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleIssue {
    SiteReused { step: usize, site: usize },
    DanglingSite { step: usize, site: usize },
    SelfLink { step: usize, site: usize },
    NotNeighbors { step: usize, i: usize, j: usize },
    BondRepeated { step: usize, i: usize, j: usize },
}

impl std::fmt::Display for ScheduleIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleIssue::SiteReused { step, site } => {
                write!(f, "step {step}: site {site} appears in more than one link")
            }
            ScheduleIssue::DanglingSite { step, site } => {
                write!(f, "step {step}: site {site} is outside the lattice")
            }
            ScheduleIssue::SelfLink { step, site } => {
                write!(f, "step {step}: link connects site {site} to itself")
            }
            ScheduleIssue::NotNeighbors { step, i, j } => {
                write!(f, "step {step}: {i} -> {j} is not a forward nearest-neighbour link")
            }
            ScheduleIssue::BondRepeated { step, i, j } => {
                write!(f, "step {step}: bond {i} -> {j} already active earlier in the period")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ScheduleIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("valid");
        }
        let lines: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&lines.join("; "))
    }
}

/// Report-only structural check of a schedule.
///
/// Flags sites used twice within one step, indices outside the lattice,
/// links that are not forward nearest-neighbour bonds, and bonds activated
/// in more than one step of the period.
pub fn validate_schedule(schedule: &HoppingSchedule) -> ValidationReport {
    let spec = schedule.lattice;
    let n = spec.site_count();
    let mut issues = Vec::new();
    let mut seen_bonds = BTreeSet::new();
    for (step_idx, step) in schedule.steps.iter().enumerate() {
        let mut used = BTreeSet::new();
        for link in &step.links {
            if link.i == link.j {
                issues.push(ScheduleIssue::SelfLink { step: step_idx, site: link.i });
            }
            let mut in_range = true;
            for site in [link.i, link.j] {
                if site >= n {
                    issues.push(ScheduleIssue::DanglingSite { step: step_idx, site });
                    in_range = false;
                }
            }
            for site in [link.i, link.j] {
                if site < n && !used.insert(site) {
                    issues.push(ScheduleIssue::SiteReused { step: step_idx, site });
                }
            }
            if in_range && link.i != link.j {
                if spec.bond(link.i, link.j).is_none() {
                    issues.push(ScheduleIssue::NotNeighbors {
                        step: step_idx,
                        i: link.i,
                        j: link.j,
                    });
                } else if !seen_bonds.insert((link.i, link.j)) {
                    issues.push(ScheduleIssue::BondRepeated {
                        step: step_idx,
                        i: link.i,
                        j: link.j,
                    });
                }
            }
        }
    }
    ValidationReport { issues }
}

/// Oriented phase sum around every elementary plaquette, traversed
/// counter-clockwise; a link walked along its own `i -> j` direction adds
/// `+phase`, against it `-phase`. Keyed by the bottom-left site. Plaquettes
/// with a missing bond are skipped.
pub fn plaquette_fluxes(schedule: &HoppingSchedule) -> Vec<(usize, f64)> {
    let spec = schedule.lattice;
    let mut phase = HashMap::new();
    for step in &schedule.steps {
        for link in &step.links {
            phase.insert((link.i, link.j), link.phase);
        }
    }
    let mut out = Vec::new();
    for site in 0..spec.site_count() {
        let Some((right, _)) = spec.forward(site, Direction::X) else { continue };
        let Some((up, _)) = spec.forward(site, Direction::Y) else { continue };
        let Some((diag, _)) = spec.forward(right, Direction::Y) else { continue };
        let edges = [
            phase.get(&(site, right)),
            phase.get(&(right, diag)),
            phase.get(&(up, diag)),
            phase.get(&(site, up)),
        ];
        if let [Some(b), Some(r), Some(t), Some(l)] = edges {
            out.push((site, b + r - t - l));
        }
    }
    out
}
