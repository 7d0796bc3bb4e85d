use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bars::{ColumnMap, GapPolicy};
use super::snapshot::SNAPSHOT_VERSION;
use crate::dist::{GainsBinning, OverlayScaling};
use crate::error::{Error, Result};
use crate::garch::FitOptions;
use crate::lattice::{LatticeConfig, TieBreak};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub n_intervals: usize,
    pub variance_w: f64,
    pub seed: u64,
    pub tie_break: TieBreak,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            n_intervals: 780,
            variance_w: 1.0,
            seed: 1,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Updates in a single `simulate` or `avalanches` run.
    pub steps: u64,
    /// Updates before an ensemble member is sampled.
    pub equilibration_steps: u64,
    pub ensemble_runs: usize,
    /// Entropy sampling cadence in updates.
    pub entropy_cadence: u64,
    /// Record every site hit (`s,j`) in `simulate`.
    pub hit_log: bool,
    /// Where artifacts are written unless overridden; not part of the
    /// recorded configuration.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            steps: 2_000_000,
            equilibration_steps: 4_000_000,
            ensemble_runs: 200,
            entropy_cadence: 100,
            hit_log: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvalancheSection {
    pub bin_width: f64,
    pub n_bins: usize,
    pub fit_min: f64,
    pub fit_max: f64,
}

impl Default for AvalancheSection {
    fn default() -> Self {
        AvalancheSection {
            bin_width: 1.0,
            n_bins: 10_000,
            fit_min: 10.0,
            fit_max: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    pub bin_width: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub center_points: usize,
    pub tail_points: usize,
    pub overlay_x: f64,
    pub overlay_y: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        let overlay = OverlayScaling::NASDAQ_MINUTE;
        GainsSection {
            bin_width: 0.05,
            r_min: -5.0,
            r_max: 5.0,
            center_points: 7,
            tail_points: 38,
            overlay_x: overlay.x_factor,
            overlay_y: overlay.y_factor,
        }
    }
}

impl GainsSection {
    pub fn binning(&self) -> Result<GainsBinning> {
        GainsBinning::new(self.bin_width, (self.r_min, self.r_max))
    }

    pub fn overlay(&self) -> Result<OverlayScaling> {
        OverlayScaling::new(self.overlay_x, self.overlay_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesSection {
    /// Scale applied to lattice returns before pricing and fitting.
    pub lambda: f64,
    pub p0: f64,
    /// Length of historical windows; lattice series use all `n + 1` sites.
    pub window: usize,
    /// Start bars of historical windows.
    pub offsets: Vec<usize>,
    pub gap_policy: GapPolicy,
    pub columns: ColumnMap,
}

impl Default for SeriesSection {
    fn default() -> Self {
        SeriesSection {
            lambda: 2e-5,
            p0: 1950.0,
            window: 780,
            offsets: Vec::new(),
            gap_policy: GapPolicy::Ignore,
            columns: ColumnMap::default(),
        }
    }
}

/// Everything that determines a run's numeric output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub run: RunSection,
    pub avalanches: AvalancheSection,
    pub gains: GainsSection,
    pub series: SeriesSection,
    pub garch: FitOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse `text`, then apply `section.key=value` overrides in order.
    ///
    /// Values are read as TOML (`5`, `1e-4`, `true`, `"x"`); anything that
    /// does not parse is taken as a bare string.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            let mut path: Vec<&str> = key.trim().split('.').collect();
            let leaf = path
                .pop()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| Error::Config(format!("override {o:?} has an empty key")))?;
            let mut node = &mut table;
            for part in path {
                node = node
                    .entry(part)
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("{part} in {key:?} is not a section")))?;
            }
            node.insert(leaf.to_string(), value);
        }
        Self::from_toml(&toml::to_string(&table).expect("table serializes"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lattice_config(&self) -> Result<LatticeConfig> {
        let l = &self.lattice;
        Ok(LatticeConfig::new(l.n_intervals, l.variance_w, l.seed)?.with_tie_break(l.tie_break))
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice_config()?;
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("series.lambda", self.series.lambda)?;
        positive("series.p0", self.series.p0)?;
        positive("avalanches.bin_width", self.avalanches.bin_width)?;
        positive("garch.tolerance", self.garch.tolerance)?;
        positive("garch.initial_damping", self.garch.initial_damping)?;
        let a = &self.avalanches;
        if !(a.fit_min > 0.0 && a.fit_min < a.fit_max) {
            return Err(Error::Config(format!(
                "avalanche fit range [{}, {}] is empty",
                a.fit_min, a.fit_max
            )));
        }
        for (name, v) in [
            ("run.ensemble_runs", self.run.ensemble_runs),
            ("run.entropy_cadence", self.run.entropy_cadence as usize),
            ("avalanches.n_bins", a.n_bins),
            ("gains.center_points", self.gains.center_points),
            ("gains.tail_points", self.gains.tail_points),
            ("series.window", self.series.window),
            ("garch.max_iterations", self.garch.max_iterations),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        self.gains.binning()?;
        self.gains.overlay()?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, lowercase hex.
    pub fn hash(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl Artifact {
    /// Describe a written file, hashing its contents.
    pub fn from_file(kind: impl Into<String>, path: impl AsRef<Path>, root: &Path) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path).to_path_buf();
        Ok(Artifact {
            kind: kind.into(),
            path: rel,
            sha256: hex_digest(&bytes),
        })
    }
}

/// Links a run's artifacts to the configuration and seeds that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub per_run_seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config: &RunConfig, per_run_seeds: Vec<u64>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("soc-market".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("snapshot-format".into(), SNAPSHOT_VERSION.to_string());
        Manifest {
            config_hash: config.hash(),
            master_seed: config.lattice.seed,
            per_run_seeds,
            artifacts: Vec::new(),
            versions,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
