//! Run configuration: JSON config file mirrored by command-line flags,
//! flags winning over file values.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use coherency::affinity::{Transform, ViewMode};
use coherency::gridsim::GridSpec;
use coherency::pipeline::KChoice;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Inline grid section: the grid spec plus the simulation window and the
/// outage list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSection {
    #[serde(flatten)]
    pub spec: GridSpec,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Outages to simulate; defaults to one per area at 1.0 pu.
    #[serde(default)]
    pub outages: Vec<OutageSpec>,
}

fn default_horizon() -> f64 {
    20.0
}

fn default_step() -> f64 {
    0.01
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            spec: GridSpec::default(),
            horizon: default_horizon(),
            step: default_step(),
            outages: Vec::new(),
        }
    }
}

/// One outage: either a concrete bus or a seeded pick within an area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutageSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<usize>,
    #[serde(default = "default_delta_p")]
    pub delta_p: f64,
}

fn default_delta_p() -> f64 {
    1.0
}

impl OutageSpec {
    /// Parse the `--outage` flag format: `bus=a00b01[,dp=0.5]` or
    /// `area=0[,dp=0.5]`.
    pub fn parse_flag(raw: &str) -> Result<Self> {
        let mut spec = OutageSpec {
            bus: None,
            area: None,
            delta_p: default_delta_p(),
        };
        for part in raw.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("outage part {part:?} is not key=value"))?;
            match key.trim() {
                "bus" => spec.bus = Some(value.trim().to_string()),
                "area" => spec.area = Some(value.trim().parse().context("bad area index")?),
                "dp" | "delta_p" => {
                    spec.delta_p = value.trim().parse().context("bad delta_p value")?
                }
                other => bail!("unknown outage key {other:?} (expected bus, area, dp)"),
            }
        }
        if spec.bus.is_some() == spec.area.is_some() {
            bail!("outage {raw:?} must name exactly one of bus= or area=");
        }
        Ok(spec)
    }
}

/// The JSON config document. Every field has a flag counterpart.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset manifest path (input source for cluster/report).
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Inline grid (input source for simulate).
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub transform: Option<Transform>,
    #[serde(default)]
    pub view_mode: Option<ViewMode>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub k_min: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
    /// Fixed balance parameter; omitted means the adaptive rule.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Also write each contingency's similarity matrix, degree vector,
    /// and view matrix as CSVs.
    #[serde(default)]
    pub dump_matrices: Option<bool>,
}

/// Command-line overrides shared by all subcommands; any flag given here
/// wins over the config file.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Dataset manifest (input for cluster/report).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    /// Master RNG seed (grid construction and clustering restarts).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Fixed cluster count (mutually exclusive with --k-min/--k-max).
    #[arg(long)]
    pub k: Option<usize>,

    /// Sweep lower bound.
    #[arg(long)]
    pub k_min: Option<usize>,

    /// Sweep upper bound.
    #[arg(long)]
    pub k_max: Option<usize>,

    /// View matrix mode.
    #[arg(long, value_enum)]
    pub view_mode: Option<ViewModeArg>,

    /// Correlation-to-affinity transform.
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,

    /// Fixed balance parameter (disables the adaptive rule).
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Maximum consensus iterations.
    #[arg(long)]
    pub max_iter: Option<usize>,

    /// Relative objective-change stopping tolerance.
    #[arg(long)]
    pub rel_tol: Option<f64>,

    /// Dump per-contingency similarity, degree, and view matrices as CSVs.
    #[arg(long)]
    pub dump_matrices: bool,

    /// Grid: number of areas.
    #[arg(long)]
    pub areas: Option<usize>,

    /// Grid: buses per area.
    #[arg(long)]
    pub buses_per_area: Option<usize>,

    /// Grid: intra-area coupling (pu/rad).
    #[arg(long)]
    pub intra_coupling: Option<f64>,

    /// Grid: inter-area coupling (pu/rad).
    #[arg(long)]
    pub inter_coupling: Option<f64>,

    /// Grid: mean inertia (s^2 pu).
    #[arg(long)]
    pub inertia_mean: Option<f64>,

    /// Grid: damping (pu).
    #[arg(long)]
    pub damping: Option<f64>,

    /// Grid: fraction of IBR buses.
    #[arg(long)]
    pub ibr_fraction: Option<f64>,

    /// Grid: inertia multiplier on IBR buses.
    #[arg(long)]
    pub ibr_inertia_scale: Option<f64>,

    /// Grid: droop gain on IBR buses.
    #[arg(long)]
    pub droop_gain: Option<f64>,

    /// Grid: droop time constant (s).
    #[arg(long)]
    pub droop_time_constant: Option<f64>,

    /// Grid: damper coefficient on coupling-aligned speed differences.
    #[arg(long)]
    pub coupling_damping: Option<f64>,

    /// Grid: nominal frequency (Hz).
    #[arg(long)]
    pub nominal_frequency: Option<f64>,

    /// Simulation horizon (s).
    #[arg(long)]
    pub horizon: Option<f64>,

    /// Integration and sampling step (s).
    #[arg(long)]
    pub step: Option<f64>,

    /// Outage, repeatable: `bus=a00b01[,dp=0.5]` or `area=0[,dp=0.5]`.
    #[arg(long = "outage", value_parser = OutageSpec::parse_flag)]
    pub outages: Vec<OutageSpec>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ViewModeArg {
    UnnormalizedLaplacian,
    NormalizedAdjacency,
}

impl From<ViewModeArg> for ViewMode {
    fn from(value: ViewModeArg) -> Self {
        match value {
            ViewModeArg::UnnormalizedLaplacian => ViewMode::UnnormalizedLaplacian,
            ViewModeArg::NormalizedAdjacency => ViewMode::NormalizedAdjacency,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TransformArg {
    ClipNegative,
    Absolute,
    ShiftRescale,
}

impl From<TransformArg> for Transform {
    fn from(value: TransformArg) -> Self {
        match value {
            TransformArg::ClipNegative => Transform::ClipNegative,
            TransformArg::Absolute => Transform::Absolute,
            TransformArg::ShiftRescale => Transform::ShiftRescale,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("config {} is not valid JSON", path.display()))
    }

    /// Merge a config file (if any) with flag overrides; flags win.
    pub fn resolve(overrides: &Overrides) -> Result<Self> {
        let mut config = match &overrides.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };

        if let Some(manifest) = &overrides.manifest {
            config.manifest = Some(manifest.clone());
        }
        if let Some(dir) = &overrides.output_dir {
            config.output_dir = Some(dir.clone());
        }
        if let Some(seed) = overrides.seed {
            config.seed = Some(seed);
        }
        if let Some(threads) = overrides.threads {
            config.threads = Some(threads);
        }
        if let Some(k) = overrides.k {
            config.k = Some(k);
        }
        if let Some(k_min) = overrides.k_min {
            config.k_min = Some(k_min);
        }
        if let Some(k_max) = overrides.k_max {
            config.k_max = Some(k_max);
        }
        if let Some(mode) = overrides.view_mode {
            config.view_mode = Some(mode.into());
        }
        if let Some(transform) = overrides.transform {
            config.transform = Some(transform.into());
        }
        if let Some(alpha) = overrides.alpha {
            config.alpha = Some(alpha);
        }
        if let Some(max_iter) = overrides.max_iter {
            config.max_iter = Some(max_iter);
        }
        if let Some(rel_tol) = overrides.rel_tol {
            config.rel_tol = Some(rel_tol);
        }
        if overrides.dump_matrices {
            config.dump_matrices = Some(true);
        }

        let grid_flags_used = overrides.areas.is_some()
            || overrides.buses_per_area.is_some()
            || overrides.intra_coupling.is_some()
            || overrides.inter_coupling.is_some()
            || overrides.inertia_mean.is_some()
            || overrides.damping.is_some()
            || overrides.ibr_fraction.is_some()
            || overrides.ibr_inertia_scale.is_some()
            || overrides.droop_gain.is_some()
            || overrides.droop_time_constant.is_some()
            || overrides.coupling_damping.is_some()
            || overrides.nominal_frequency.is_some()
            || overrides.horizon.is_some()
            || overrides.step.is_some()
            || !overrides.outages.is_empty();
        if grid_flags_used || config.grid.is_some() {
            let grid = config.grid.get_or_insert_with(GridSection::default);
            if let Some(v) = overrides.areas {
                grid.spec.areas = v;
            }
            if let Some(v) = overrides.buses_per_area {
                grid.spec.buses_per_area = v;
            }
            if let Some(v) = overrides.intra_coupling {
                grid.spec.intra_coupling = v;
            }
            if let Some(v) = overrides.inter_coupling {
                grid.spec.inter_coupling = v;
            }
            if let Some(v) = overrides.inertia_mean {
                grid.spec.inertia_mean = v;
            }
            if let Some(v) = overrides.damping {
                grid.spec.damping = v;
            }
            if let Some(v) = overrides.ibr_fraction {
                grid.spec.ibr_fraction = v;
            }
            if let Some(v) = overrides.ibr_inertia_scale {
                grid.spec.ibr_inertia_scale = v;
            }
            if let Some(v) = overrides.droop_gain {
                grid.spec.droop_gain = v;
            }
            if let Some(v) = overrides.droop_time_constant {
                grid.spec.droop_time_constant = v;
            }
            if let Some(v) = overrides.coupling_damping {
                grid.spec.coupling_damping = v;
            }
            if let Some(v) = overrides.nominal_frequency {
                grid.spec.nominal_frequency = v;
            }
            if let Some(v) = overrides.horizon {
                grid.horizon = v;
            }
            if let Some(v) = overrides.step {
                grid.step = v;
            }
            if !overrides.outages.is_empty() {
                grid.outages = overrides.outages.clone();
            }
            if let Some(seed) = config.seed {
                grid.spec.seed = seed;
            }
        }

        config.check()?;
        Ok(config)
    }

    /// Structural checks that do not need the dataset.
    fn check(&self) -> Result<()> {
        if self.k.is_some() && (self.k_min.is_some() || self.k_max.is_some()) {
            bail!("config sets both a fixed k and a sweep range; choose one");
        }
        if self.manifest.is_some() && self.grid.is_some() {
            bail!("config sets both a manifest and an inline grid; choose one input source");
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| "out".into())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The cluster-count policy; `None` pieces fall back to the default
    /// sweep, resolved against the dataset size.
    pub fn k_choice(&self, n_buses: usize) -> KChoice {
        match (self.k, self.k_min, self.k_max) {
            (Some(k), _, _) => KChoice::Fixed(k),
            (None, None, None) => KChoice::default_sweep(n_buses),
            (None, k_min, k_max) => {
                let default = match KChoice::default_sweep(n_buses) {
                    KChoice::Sweep { k_min, k_max } => (k_min, k_max),
                    KChoice::Fixed(_) => unreachable!(),
                };
                KChoice::Sweep {
                    k_min: k_min.unwrap_or(default.0),
                    k_max: k_max.unwrap_or(default.1),
                }
            }
        }
    }
}
