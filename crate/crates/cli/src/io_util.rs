//! CSV writers and readers for the pipeline's on-disk artifacts.

use anyhow::{bail, Context, Result};
use coherency::consensus::IterationStat;
use coherency::spectral::{KScore, Partition};
use ndarray::Array2;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

/// Replace characters that are awkward in file names.
pub fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn write_partition_csv(path: &Path, bus_order: &[String], labels: &[usize]) -> Result<()> {
    let mut out = String::from("bus,cluster\n");
    for (bus, label) in bus_order.iter().zip(labels) {
        let _ = writeln!(out, "{bus},{label}");
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Read a partition CSV back, aligned to the given bus order.
pub fn read_partition_csv(path: &Path, bus_order: &[String]) -> Result<Partition> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("bus,cluster") => {}
        other => bail!(
            "{}: expected 'bus,cluster' header, found {other:?}",
            path.display()
        ),
    }
    let mut by_bus: HashMap<&str, usize> = HashMap::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (bus, label) = line
            .split_once(',')
            .with_context(|| format!("{}: malformed row {line:?}", path.display()))?;
        let label: usize = label
            .trim()
            .parse()
            .with_context(|| format!("{}: bad cluster id in {line:?}", path.display()))?;
        by_bus.insert(bus, label);
    }

    let mut labels = Vec::with_capacity(bus_order.len());
    for bus in bus_order {
        match by_bus.get(bus.as_str()) {
            Some(&label) => labels.push(label),
            None => bail!("{}: bus {bus:?} missing from partition", path.display()),
        }
    }
    if by_bus.len() != bus_order.len() {
        bail!(
            "{}: partition lists {} buses, dataset has {}",
            path.display(),
            by_bus.len(),
            bus_order.len()
        );
    }
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    Ok(Partition {
        labels,
        k,
        silhouette: None,
        seed: 0,
    })
}

pub fn write_sweep_csv(path: &Path, scores: &[KScore]) -> Result<()> {
    let mut out = String::from("k,silhouette\n");
    for score in scores {
        let _ = writeln!(out, "{},{}", score.k, score.silhouette);
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_iterations_csv(path: &Path, log: &[IterationStat]) -> Result<()> {
    let mut out = String::from("iteration,objective,alpha,max_subspace_change\n");
    for stat in log {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            stat.iteration, stat.objective, stat.alpha, stat.max_subspace_change
        );
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_summary_csv(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut out = String::from("key,value\n");
    for (key, value) in entries {
        let _ = writeln!(out, "{key},{value}");
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_matrix_csv(path: &Path, bus_order: &[String], matrix: &Array2<f64>) -> Result<()> {
    let mut out = String::from("bus");
    for bus in bus_order {
        let _ = write!(out, ",{bus}");
    }
    out.push('\n');
    for (i, bus) in bus_order.iter().enumerate() {
        out.push_str(bus);
        for j in 0..bus_order.len() {
            let _ = write!(out, ",{}", matrix[(i, j)]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
