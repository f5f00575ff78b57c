//! Synthetic multi-contingency scenario generation.
//!
//! Builds a grid of `A` areas with strong intra-area and weak inter-area
//! coupling, then integrates linearized swing dynamics for step-outage
//! disturbances:
//!
//! ```text
//!   M_i w_i' = P_i - D_i w_i - sum_j B_ij (theta_i - theta_j)
//!                            - gamma * sum_j B_ij (w_i - w_j) - g_i
//!   theta_i' = w_i
//!   t_g g_i' = droop_gain * w_i - g_i + r_i(t)  (IBR buses only)
//! ```
//!
//! with `P_i = -delta_p` at the outage bus for `t >= 0`. Classical
//! fixed-step RK4; bus frequency is `f_i = f_nominal + w_i / 2 pi` Hz.
//! The area membership used to build the coupling blocks is kept as the
//! planted ground-truth partition.
//!
//! Two terms model effects the plain swing equation misses:
//!
//! - The `gamma` term is damper-winding-style damping aligned with the
//!   coupling graph. It separates timescales: local intra-area
//!   transients (high graph eigenvalues) die within seconds while
//!   inter-area swings and the aggregate frequency decline persist,
//!   which is the regime where planted areas are recoverable from
//!   correlations. Being antisymmetric in (i, j), it cancels from the
//!   aggregate swing balance exactly.
//! - `r_i(t)` is fast inverter-control ripple on IBR buses: a small
//!   fixed-amplitude sinusoid per bus (seeded frequency and phase),
//!   active only while a disturbance is present. Its amplitude does not
//!   scale with `delta_p`, so weak disturbances leave distant buses with
//!   a genuinely poor signal-to-ripple ratio, the effect that makes
//!   single weak contingencies unreliable for coherency. It enters
//!   through the droop state, so the aggregate swing balance over
//!   `M, D, g` still holds exactly.

use crate::dataset::{ContingencyRecord, Dataset, FrequencyTrace, Manifest, ManifestEntry};
use crate::spectral::Partition;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

/// Multiplicative jitter applied to couplings, inertias, and dampings.
const JITTER: f64 = 0.1;

/// System base used to report `mw_lost` for per-unit disturbances.
const MW_BASE: f64 = 100.0;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("unknown bus {0:?}")]
    UnknownBus(String),

    #[error("invalid simulation window: step {step}, horizon {horizon} (need step > 0 and horizon >= 10 * step)")]
    InvalidWindow { step: f64, horizon: f64 },

    #[error("state became non-finite at t = {time:.4} s")]
    NonFiniteState { time: f64 },

    #[error("no outages specified")]
    NoOutages,

    #[error("I/O error writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Parameters of the synthetic grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub areas: usize,
    pub buses_per_area: usize,
    /// Coupling within an area, per-unit power / rad.
    pub intra_coupling: f64,
    /// Coupling between ring-neighbor areas.
    pub inter_coupling: f64,
    /// Mean inertia, s^2 * pu.
    pub inertia_mean: f64,
    /// Damping, pu.
    pub damping: f64,
    /// Fraction of buses with inverter-based resources.
    pub ibr_fraction: f64,
    /// Inertia multiplier for IBR buses, in (0, 1].
    pub ibr_inertia_scale: f64,
    pub droop_gain: f64,
    /// Seconds.
    pub droop_time_constant: f64,
    /// Damper coefficient on coupling-aligned speed differences
    /// (dimensionless multiple of the coupling matrix).
    pub coupling_damping: f64,
    /// Amplitude (pu) of the fixed-size control ripple on IBR buses.
    pub ibr_control_ripple: f64,
    /// Hz.
    pub nominal_frequency: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            areas: 3,
            buses_per_area: 8,
            intra_coupling: 10.0,
            inter_coupling: 0.5,
            inertia_mean: 8.0,
            damping: 1.0,
            ibr_fraction: 0.2,
            ibr_inertia_scale: 0.3,
            droop_gain: 5.0,
            droop_time_constant: 0.2,
            coupling_damping: 1.0,
            ibr_control_ripple: 0.08,
            nominal_frequency: 60.0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn n_buses(&self) -> usize {
        self.areas * self.buses_per_area
    }

    /// Reject specs that cannot produce a valid planted block structure.
    pub fn validate(&self) -> Result<(), GridError> {
        if self.areas < 2 {
            return Err(GridError::InvalidSpec(format!(
                "need at least 2 areas, got {}",
                self.areas
            )));
        }
        if self.buses_per_area < 2 {
            return Err(GridError::InvalidSpec(format!(
                "need at least 2 buses per area, got {}",
                self.buses_per_area
            )));
        }
        if !(self.inter_coupling > 0.0 && self.intra_coupling > self.inter_coupling) {
            return Err(GridError::InvalidSpec(format!(
                "need intra_coupling > inter_coupling > 0, got {} and {}",
                self.intra_coupling, self.inter_coupling
            )));
        }
        // Jitter must not let weak intra links dip below strong inter links.
        if self.intra_coupling * (1.0 - JITTER) <= self.inter_coupling * (1.0 + JITTER) {
            return Err(GridError::InvalidSpec(format!(
                "intra/inter coupling ratio {:.3} too small to survive +-{:.0}% jitter",
                self.intra_coupling / self.inter_coupling,
                JITTER * 100.0
            )));
        }
        for (name, value) in [
            ("inertia_mean", self.inertia_mean),
            ("damping", self.damping),
            ("droop_gain", self.droop_gain),
            ("droop_time_constant", self.droop_time_constant),
            ("nominal_frequency", self.nominal_frequency),
        ] {
            if !(value > 0.0) {
                return Err(GridError::InvalidSpec(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.coupling_damping < 0.0 {
            return Err(GridError::InvalidSpec(format!(
                "coupling_damping must be non-negative, got {}",
                self.coupling_damping
            )));
        }
        if self.ibr_control_ripple < 0.0 {
            return Err(GridError::InvalidSpec(format!(
                "ibr_control_ripple must be non-negative, got {}",
                self.ibr_control_ripple
            )));
        }
        if !(0.0..=1.0).contains(&self.ibr_fraction) {
            return Err(GridError::InvalidSpec(format!(
                "ibr_fraction must lie in [0, 1], got {}",
                self.ibr_fraction
            )));
        }
        if !(self.ibr_inertia_scale > 0.0 && self.ibr_inertia_scale <= 1.0) {
            return Err(GridError::InvalidSpec(format!(
                "ibr_inertia_scale must lie in (0, 1], got {}",
                self.ibr_inertia_scale
            )));
        }
        Ok(())
    }
}

/// A realized synthetic grid.
#[derive(Debug, Clone)]
pub struct GridModel {
    pub bus_ids: Vec<String>,
    /// Symmetric non-negative coupling matrix with zero diagonal.
    pub coupling: Array2<f64>,
    pub inertia: Array1<f64>,
    pub damping: Array1<f64>,
    pub ibr_mask: Vec<bool>,
    /// Ground truth: area membership per bus.
    pub planted_partition: Partition,
    pub droop_gain: f64,
    pub droop_time_constant: f64,
    pub coupling_damping: f64,
    /// Ripple amplitude (pu) and per-bus frequency (Hz) / phase (rad);
    /// only entries under `ibr_mask` are used.
    pub ibr_control_ripple: f64,
    pub ripple_frequency: Vec<f64>,
    pub ripple_phase: Vec<f64>,
    pub nominal_frequency: f64,
}

impl GridModel {
    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn bus_index(&self, bus_id: &str) -> Option<usize> {
        self.bus_ids.iter().position(|b| b == bus_id)
    }

    /// Bus indices belonging to one area.
    pub fn area_buses(&self, area: usize) -> Vec<usize> {
        self.planted_partition
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &label)| label == area)
            .map(|(i, _)| i)
            .collect()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Build the jittered block-coupled network for a spec.
///
/// Areas are complete graphs internally; each area connects to its ring
/// neighbors through 2 randomly chosen bus pairs. `ibr_fraction` of the
/// buses (round-half-up) get scaled-down inertia and an active droop
/// controller. Fully deterministic in the spec's seed.
pub fn build_network(spec: &GridSpec) -> Result<GridModel, GridError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_buses();
    let per_area = spec.buses_per_area;

    let bus_ids: Vec<String> = (0..spec.areas)
        .flat_map(|area| (0..per_area).map(move |bus| format!("a{area:02}b{bus:02}")))
        .collect();
    let labels: Vec<usize> = (0..spec.areas)
        .flat_map(|area| std::iter::repeat_n(area, per_area))
        .collect();

    let jitter = |base: f64, rng: &mut ChaCha8Rng| -> f64 {
        base * (1.0 + rng.random_range(-JITTER..JITTER))
    };

    let mut coupling = Array2::zeros((n, n));
    for area in 0..spec.areas {
        let start = area * per_area;
        for i in start..start + per_area {
            for j in (i + 1)..start + per_area {
                let b = jitter(spec.intra_coupling, &mut rng);
                coupling[(i, j)] = b;
                coupling[(j, i)] = b;
            }
        }
    }

    // Ring of areas; A = 2 collapses to a single adjacent pair.
    let ring_pairs: Vec<(usize, usize)> = if spec.areas == 2 {
        vec![(0, 1)]
    } else {
        (0..spec.areas)
            .map(|area| (area, (area + 1) % spec.areas))
            .collect()
    };
    for (area_a, area_b) in ring_pairs {
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        while chosen.len() < 2 {
            let i = area_a * per_area + rng.random_range(0..per_area);
            let j = area_b * per_area + rng.random_range(0..per_area);
            if !chosen.contains(&(i, j)) {
                chosen.push((i, j));
            }
        }
        for (i, j) in chosen {
            let b = jitter(spec.inter_coupling, &mut rng);
            coupling[(i, j)] = b;
            coupling[(j, i)] = b;
        }
    }

    let mut inertia = Array1::zeros(n);
    let mut damping = Array1::zeros(n);
    for i in 0..n {
        inertia[i] = jitter(spec.inertia_mean, &mut rng);
        damping[i] = jitter(spec.damping, &mut rng);
    }

    let ibr_count = round_half_up(spec.ibr_fraction * n as f64);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let mut ibr_mask = vec![false; n];
    for &i in indices.iter().take(ibr_count) {
        ibr_mask[i] = true;
        inertia[i] *= spec.ibr_inertia_scale;
    }

    // Fast-control ripple characteristics per bus, drawn for every bus so
    // the stream layout is independent of the IBR pattern.
    let mut ripple_frequency = vec![0.0; n];
    let mut ripple_phase = vec![0.0; n];
    for i in 0..n {
        ripple_frequency[i] = rng.random_range(2.0..5.0);
        ripple_phase[i] = rng.random_range(0.0..std::f64::consts::TAU);
    }

    Ok(GridModel {
        bus_ids,
        coupling,
        inertia,
        damping,
        ibr_mask,
        planted_partition: Partition {
            labels,
            k: spec.areas,
            silhouette: None,
            seed: spec.seed,
        },
        droop_gain: spec.droop_gain,
        droop_time_constant: spec.droop_time_constant,
        coupling_damping: spec.coupling_damping,
        ibr_control_ripple: spec.ibr_control_ripple,
        ripple_frequency,
        ripple_phase,
        nominal_frequency: spec.nominal_frequency,
    })
}

/// Flat state layout for the integrator: angles, speeds, droop outputs.
struct SwingSystem<'a> {
    model: &'a GridModel,
    /// Row sums of the coupling matrix.
    degree: Array1<f64>,
    /// Droop-state slot per bus (IBR buses only).
    droop_slot: Vec<Option<usize>>,
    n_droop: usize,
    outage_index: usize,
    delta_p: f64,
    /// Control ripple runs only while a disturbance is present.
    ripple_active: bool,
}

impl<'a> SwingSystem<'a> {
    fn new(model: &'a GridModel, outage_index: usize, delta_p: f64) -> Self {
        let n = model.n_buses();
        let mut degree = Array1::zeros(n);
        for i in 0..n {
            degree[i] = model.coupling.row(i).sum();
        }
        let mut droop_slot = vec![None; n];
        let mut n_droop = 0;
        for i in 0..n {
            if model.ibr_mask[i] {
                droop_slot[i] = Some(n_droop);
                n_droop += 1;
            }
        }
        Self {
            model,
            degree,
            droop_slot,
            n_droop,
            outage_index,
            delta_p,
            ripple_active: delta_p != 0.0 && model.ibr_control_ripple > 0.0,
        }
    }

    fn state_len(&self) -> usize {
        2 * self.model.n_buses() + self.n_droop
    }

    fn derivative(&self, t: f64, state: &[f64], out: &mut [f64]) {
        let n = self.model.n_buses();
        let (theta, rest) = state.split_at(n);
        let (omega, droop) = rest.split_at(n);

        out[..n].copy_from_slice(omega);
        let gamma = self.model.coupling_damping;
        for i in 0..n {
            // Network terms (B_L x)_i = d_i x_i - sum_j B_ij x_j for the
            // angle stiffness and the coupling-aligned damper.
            let mut network = self.degree[i] * (theta[i] + gamma * omega[i]);
            for j in 0..n {
                network -= self.model.coupling[(i, j)] * (theta[j] + gamma * omega[j]);
            }
            let injection = if i == self.outage_index {
                -self.delta_p
            } else {
                0.0
            };
            let droop_draw = match self.droop_slot[i] {
                Some(slot) => droop[slot],
                None => 0.0,
            };
            out[n + i] = (injection - self.model.damping[i] * omega[i] - network - droop_draw)
                / self.model.inertia[i];
        }
        for i in 0..n {
            if let Some(slot) = self.droop_slot[i] {
                let ripple = if self.ripple_active {
                    self.model.ibr_control_ripple
                        * (std::f64::consts::TAU * self.model.ripple_frequency[i] * t
                            + self.model.ripple_phase[i])
                            .sin()
                } else {
                    0.0
                };
                out[2 * n + slot] = (self.model.droop_gain * omega[i] - droop[slot] + ripple)
                    / self.model.droop_time_constant;
            }
        }
    }
}

/// A simulated record plus the internal droop trajectories, for callers
/// that audit the power balance.
#[derive(Debug, Clone)]
pub struct SimulationDetail {
    pub record: ContingencyRecord,
    /// Bus indices that carry a droop state, in state order.
    pub droop_buses: Vec<usize>,
    /// `droop_states[s][t]` is droop output `g` of `droop_buses[s]` at
    /// sample `t`.
    pub droop_states: Vec<Vec<f64>>,
}

/// Integrate one step-outage disturbance and return the sampled bus
/// frequencies as a contingency record.
///
/// Samples land at `t = 0, step, 2*step, ..., horizon`, so a 20 s horizon
/// at 0.01 s steps yields 2001 samples per trace.
pub fn simulate_outage(
    model: &GridModel,
    outage_bus: &str,
    delta_p: f64,
    horizon: f64,
    step: f64,
) -> Result<ContingencyRecord, GridError> {
    simulate_outage_detailed(model, outage_bus, delta_p, horizon, step).map(|d| d.record)
}

/// As [`simulate_outage`], also returning the droop states per sample.
pub fn simulate_outage_detailed(
    model: &GridModel,
    outage_bus: &str,
    delta_p: f64,
    horizon: f64,
    step: f64,
) -> Result<SimulationDetail, GridError> {
    let outage_index = model
        .bus_index(outage_bus)
        .ok_or_else(|| GridError::UnknownBus(outage_bus.to_string()))?;
    if !(step > 0.0) || horizon < 10.0 * step {
        return Err(GridError::InvalidWindow { step, horizon });
    }

    let system = SwingSystem::new(model, outage_index, delta_p);
    let n = model.n_buses();
    let n_steps = (horizon / step).round() as usize;

    let mut state = vec![0.0; system.state_len()];
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps + 1); n];
    let mut droop_states: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps + 1); system.n_droop];
    let record_sample =
        |state: &[f64], samples: &mut Vec<Vec<f64>>, droop_states: &mut Vec<Vec<f64>>| {
            for (i, trace) in samples.iter_mut().enumerate() {
                trace.push(model.nominal_frequency + state[n + i] / std::f64::consts::TAU);
            }
            for (s, series) in droop_states.iter_mut().enumerate() {
                series.push(state[2 * n + s]);
            }
        };
    record_sample(&state, &mut samples, &mut droop_states);

    let len = system.state_len();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut scratch = vec![0.0; len];

    for step_index in 0..n_steps {
        let t = step_index as f64 * step;
        system.derivative(t, &state, &mut k1);
        for i in 0..len {
            scratch[i] = state[i] + 0.5 * step * k1[i];
        }
        system.derivative(t + 0.5 * step, &scratch, &mut k2);
        for i in 0..len {
            scratch[i] = state[i] + 0.5 * step * k2[i];
        }
        system.derivative(t + 0.5 * step, &scratch, &mut k3);
        for i in 0..len {
            scratch[i] = state[i] + step * k3[i];
        }
        system.derivative(t + step, &scratch, &mut k4);
        for i in 0..len {
            state[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        if state.iter().any(|x| !x.is_finite()) {
            return Err(GridError::NonFiniteState {
                time: (step_index + 1) as f64 * step,
            });
        }
        record_sample(&state, &mut samples, &mut droop_states);
    }

    let sample_times: Arc<[f64]> = (0..=n_steps).map(|i| i as f64 * step).collect();
    let traces = model
        .bus_ids
        .iter()
        .zip(samples)
        .map(|(bus_id, samples)| FrequencyTrace {
            bus_id: bus_id.clone(),
            samples,
            sample_times: Arc::clone(&sample_times),
        })
        .collect();

    let droop_buses = (0..n).filter(|&i| model.ibr_mask[i]).collect();
    Ok(SimulationDetail {
        record: ContingencyRecord {
            contingency_id: format!("outage-{outage_bus}"),
            outage_bus: outage_bus.to_string(),
            mw_lost: delta_p * MW_BASE,
            traces,
        },
        droop_buses,
        droop_states,
    })
}

/// Simulate one record per `(bus, delta_p)` outage and collect them into a
/// dataset in the model's bus order. Contingency ids are `c00-<bus>`,
/// `c01-<bus>`, ... so repeated outage buses stay distinct.
pub fn generate_scenario_suite(
    model: &GridModel,
    outages: &[(String, f64)],
    horizon: f64,
    step: f64,
) -> Result<Dataset, GridError> {
    if outages.is_empty() {
        return Err(GridError::NoOutages);
    }
    // Outage simulations are independent; run them in parallel.
    let records = outages
        .par_iter()
        .enumerate()
        .map(|(index, (bus, delta_p))| {
            let mut record = simulate_outage(model, bus, *delta_p, horizon, step)?;
            record.contingency_id = format!("c{index:02}-{bus}");
            Ok(record)
        })
        .collect::<Result<Vec<_>, GridError>>()?;
    Ok(Dataset {
        records,
        bus_order: model.bus_ids.clone(),
    })
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, GridError> {
    let file = std::fs::File::create(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(std::io::BufWriter::new(file))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GridError + '_ {
    move |source| GridError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write a dataset as contingency CSVs plus a manifest, in the format
/// [`crate::dataset::ingest_csv`] reads. Floats are written with Rust's
/// shortest round-trip formatting, so ingestion reproduces the samples
/// bit for bit. Returns the manifest path.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<PathBuf, GridError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut entries = Vec::with_capacity(dataset.records.len());
    for record in &dataset.records {
        let file_name = format!("{}.csv", record.contingency_id);
        let path = dir.join(&file_name);
        let mut out = create_file(&path)?;

        write!(out, "bus").map_err(io_err(&path))?;
        if let Some(first) = record.traces.first() {
            for &t in first.sample_times.iter() {
                write!(out, ",{t}").map_err(io_err(&path))?;
            }
        }
        writeln!(out).map_err(io_err(&path))?;
        for trace in &record.traces {
            write!(out, "{}", trace.bus_id).map_err(io_err(&path))?;
            for &value in &trace.samples {
                write!(out, ",{value}").map_err(io_err(&path))?;
            }
            writeln!(out).map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))?;

        entries.push(ManifestEntry {
            id: record.contingency_id.clone(),
            file: file_name,
            outage_bus: record.outage_bus.clone(),
            mw_lost: record.mw_lost,
        });
    }

    let manifest_path = dir.join("manifest.json");
    let manifest = Manifest {
        contingencies: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}

/// Write the planted ground truth as a two-column CSV (bus, area).
pub fn write_ground_truth(
    path: &Path,
    bus_order: &[String],
    labels: &[usize],
) -> Result<(), GridError> {
    let mut out = create_file(path)?;
    writeln!(out, "bus,area").map_err(io_err(path))?;
    for (bus, label) in bus_order.iter().zip(labels) {
        writeln!(out, "{bus},{label}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}
