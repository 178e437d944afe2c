//! Run configuration, read from a TOML file and patched by command-line flags.

use anyhow::{bail, Context, Result};
use honeycomb_edge::bulk::Flavor;
use honeycomb_edge::edge::{DEFAULT_MODES, EIGEN_WIDTHS};
use honeycomb_edge::lattice::classify_edge;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FlavorName {
    PBreaking,
    CBreaking,
}

impl From<FlavorName> for Flavor {
    fn from(f: FlavorName) -> Self {
        match f {
            FlavorName::PBreaking => Flavor::PBreaking,
            FlavorName::CBreaking => Flavor::CBreaking,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub v0: f64,
    pub w0: f64,
    pub a0: f64,
    /// JSON coefficient file replacing the default V
    pub file: Option<PathBuf>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { v0: 10.0, w0: 1.0, a0: 1.0, file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RibbonConfig {
    pub modes: usize,
    pub n_perp: usize,
    pub fd_order: usize,
    /// ribbon half-width in zero-mode decay lengths
    pub widths: f64,
}

impl Default for RibbonConfig {
    fn default() -> Self {
        Self { modes: DEFAULT_MODES, n_perp: 16, fd_order: 8, widths: EIGEN_WIDTHS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuConfig {
    pub n: usize,
    /// defaults to three gap widths on either side of zero
    pub range: Option<[f64; 2]>,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self { n: 41, range: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KparConfig {
    pub n_coarse: usize,
    pub n_dense: usize,
    /// half-width of the dense window around each valley; defaults to delta theta |K2| / v_F
    pub dense_half_width: Option<f64>,
    /// also compute the spectral flow over one period
    pub flow: bool,
}

impl Default for KparConfig {
    fn default() -> Self {
        Self { n_coarse: 16, n_dense: 16, dense_half_width: None, flow: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsConfig {
    pub n_bands: usize,
    pub points_per_segment: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { n_bands: 8, points_per_segment: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub boundary_zone: f64,
    pub boundary_mass: f64,
    pub interface_mass: f64,
    pub fold_tol: f64,
    pub fold_samples: usize,
    pub eigen_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { boundary_zone: 0.1, boundary_mass: 0.1, interface_mass: 0.5, fold_tol: 1e-3, fold_samples: 201, eigen_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub flavor: FlavorName,
    pub edge: [i64; 2],
    pub delta: f64,
    pub deltas: Vec<f64>,
    pub pair_deltas: Vec<f64>,
    /// plane-wave cutoff of the Dirac data feeding 1D and ribbon runs
    pub cutoff: usize,
    /// plane-wave cutoff for bands and bulk checks
    pub bulk_cutoff: usize,
    pub output: PathBuf,
    pub potential: PotentialConfig,
    pub ribbon: RibbonConfig,
    pub mu: MuConfig,
    pub kpar: KparConfig,
    pub bands: BandsConfig,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            flavor: FlavorName::PBreaking,
            edge: [1, 0],
            delta: 0.3,
            deltas: vec![0.4, 0.2, 0.1],
            pair_deltas: vec![0.4, 0.2],
            cutoff: 8,
            bulk_cutoff: 12,
            output: PathBuf::from("out"),
            potential: PotentialConfig::default(),
            ribbon: RibbonConfig::default(),
            mu: MuConfig::default(),
            kpar: KparConfig::default(),
            bands: BandsConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Written by `init`; parses to `RunConfig::default()`.
pub const TEMPLATE: &str = r#"# honeycomb-edge run configuration. Every key is optional; the values below are the defaults.

# perturbation: "p-breaking" (odd W) or "c-breaking" (div(a sigma_2 grad))
flavor = "p-breaking"
# edge direction a1 v1 + b1 v2, coprime
edge = [1, 0]
# domain-wall scale for `edge` and the spectral flow check of `validate`
delta = 0.3
# scales for the correspondence and residual checks of `validate`
deltas = [0.4, 0.2, 0.1]
# scales for the armchair pair splitting check of `validate`
pair_deltas = [0.4, 0.2]
# plane-wave cutoff |m|, |n| <= cutoff for the Dirac data used by dirac1d and edge
cutoff = 8
# plane-wave cutoff for bands, dirac-point and the bulk checks
bulk_cutoff = 12
output = "out"

[potential]
# V = v0 [cos 2pi k1.x + cos 2pi k2.x + cos 2pi (k1+k2).x]
v0 = 10.0
# W = w0 [sin 2pi k1.x + sin 2pi k2.x - sin 2pi (k1+k2).x]; 0 switches it off
w0 = 1.0
# a = a0 [cos 2pi k1.x + cos 2pi k2.x + cos 2pi (k1+k2).x]; 0 switches it off
a0 = 1.0
# optional JSON coefficient file replacing V (not used by validate)
# file = "potential.json"

[ribbon]
# Fourier modes |m| <= modes along the edge
modes = 5
# grid points per period across the edge
n_perp = 16
# finite-difference order across the edge
fd_order = 8
# half-width in zero-mode decay lengths (at least 10 / delta periods)
widths = 9.0

[mu]
# samples of the 1D Dirac parameter
n = 41
# range = [-3.0, 3.0]   # default: three gap widths on either side of zero

[kpar]
# uniform samples over one period, plus dense samples around each valley
n_coarse = 16
n_dense = 16
# dense_half_width = 0.1   # default: delta theta |K2| / v_F, at most 0.5
# also track the spectral flow (slow)
flow = false

[bands]
n_bands = 8
points_per_segment = 40

[tolerances]
# outer fraction of the ribbon counted as boundary
boundary_zone = 0.1
# states with more boundary mass are boundary modes
boundary_mass = 0.1
# interface states need this much mass near the wall
interface_mass = 0.5
# no-fold check: a Dirac band within fold_tol of E_D away from the valleys fails
fold_tol = 1e-3
fold_samples = 201
# accepted eigen-residual of the interior eigensolver
eigen_tol = 1e-9
"#;

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        classify_edge(self.edge[0], self.edge[1])?;
        let positive = [
            ("delta", self.delta),
            ("potential.v0", self.potential.v0),
            ("ribbon.widths", self.ribbon.widths),
            ("tolerances.boundary_zone", self.tolerances.boundary_zone),
            ("tolerances.fold_tol", self.tolerances.fold_tol),
            ("tolerances.eigen_tol", self.tolerances.eigen_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        for (name, list) in [("deltas", &self.deltas), ("pair_deltas", &self.pair_deltas)] {
            if list.len() < 2 || list.iter().any(|&d| !(d > 0.0)) {
                bail!("{name} needs at least two positive values");
            }
        }
        for (name, v) in [("potential.w0", self.potential.w0), ("potential.a0", self.potential.a0)] {
            if !v.is_finite() {
                bail!("{name} must be finite");
            }
        }
        if self.cutoff == 0 || self.bulk_cutoff == 0 {
            bail!("plane-wave cutoffs must be positive");
        }
        if self.ribbon.modes == 0 || self.ribbon.n_perp < 2 || ![2, 4, 6, 8].contains(&self.ribbon.fd_order) {
            bail!("ribbon needs modes >= 1, n_perp >= 2 and fd_order in {{2, 4, 6, 8}}");
        }
        if self.mu.n == 0 || self.kpar.n_coarse < 2 || self.bands.n_bands == 0 || self.bands.points_per_segment == 0 {
            bail!("grid sizes must be positive");
        }
        for (name, v) in [
            ("boundary_mass", self.tolerances.boundary_mass),
            ("interface_mass", self.tolerances.interface_mass),
            ("boundary_zone", self.tolerances.boundary_zone),
        ] {
            if !(v > 0.0 && v < 1.0) {
                bail!("tolerances.{name} must lie in (0, 1)");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One-line provenance header for emitted files.
    pub fn header(&self, command: &str) -> String {
        let t = &self.tolerances;
        format!(
            "honeycomb-edge {command} config_sha256={} boundary_zone={} boundary_mass={} interface_mass={} fold_tol={} fold_samples={} eigen_tol={}",
            self.hash(),
            t.boundary_zone,
            t.boundary_mass,
            t.interface_mass,
            t.fold_tol,
            t.fold_samples,
            t.eigen_tol
        )
    }
}
