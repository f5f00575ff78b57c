//! The three pipeline stages: simulate, cluster, report.

use crate::config::RunConfig;
use crate::io_util::{
    read_partition_csv, safe_file_stem, write_iterations_csv, write_matrix_csv,
    write_partition_csv, write_summary_csv, write_sweep_csv,
};
use crate::CliError;
use anyhow::{anyhow, Context, Result};
use coherency::dataset::{ingest_csv, Dataset};
use coherency::gridsim::{
    build_network, generate_scenario_suite, write_dataset, write_ground_truth, GridModel,
};
use coherency::pipeline::{cluster_dataset, PipelineError, PipelineOptions};
use coherency::report::{
    cluster_ordering, co_association, heatmap_svg, membership_table, overlay_svg,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

fn config_err(err: anyhow::Error) -> CliError {
    CliError::Config(err)
}

fn runtime_err(err: anyhow::Error) -> CliError {
    CliError::Runtime(err)
}

/// Resolve outage specs against a built model; area-based entries pick a
/// bus with a seed-derived RNG, and an empty list defaults to one outage
/// per area at 1.0 pu.
fn resolve_outages(
    model: &GridModel,
    requested: &[crate::config::OutageSpec],
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let areas = model.planted_partition.k;

    if requested.is_empty() {
        return Ok((0..areas)
            .map(|area| {
                let buses = model.area_buses(area);
                let bus = buses[rng.random_range(0..buses.len())];
                (model.bus_ids[bus].clone(), 1.0)
            })
            .collect());
    }

    requested
        .iter()
        .map(|outage| {
            let bus = match (&outage.bus, outage.area) {
                (Some(bus), None) => {
                    if model.bus_index(bus).is_none() {
                        return Err(anyhow!("outage bus {bus:?} does not exist in the grid"));
                    }
                    bus.clone()
                }
                (None, Some(area)) => {
                    if area >= areas {
                        return Err(anyhow!(
                            "outage area {area} out of range (grid has {areas})"
                        ));
                    }
                    let buses = model.area_buses(area);
                    model.bus_ids[buses[rng.random_range(0..buses.len())]].clone()
                }
                _ => return Err(anyhow!("outage must name exactly one of bus or area")),
            };
            Ok((bus, outage.delta_p))
        })
        .collect()
}

/// `simulate`: build the synthetic grid, run every outage, and write the
/// dataset (CSVs + manifest) plus the planted ground truth.
pub fn cmd_simulate(config: &RunConfig) -> Result<(), CliError> {
    let default_grid;
    let grid = match &config.grid {
        Some(grid) => grid,
        // No grid configured and no competing input source: use defaults.
        None if config.manifest.is_none() => {
            let mut section = crate::config::GridSection::default();
            section.spec.seed = config.seed();
            default_grid = section;
            &default_grid
        }
        None => {
            return Err(config_err(anyhow!(
                "simulate needs an inline grid (config `grid` section or grid flags), \
                 but the config names a dataset manifest"
            )))
        }
    };

    let model = build_network(&grid.spec).map_err(|e| config_err(e.into()))?;
    let outages = resolve_outages(&model, &grid.outages, grid.spec.seed).map_err(config_err)?;

    let dataset = generate_scenario_suite(&model, &outages, grid.horizon, grid.step)
        .map_err(|e| runtime_err(e.into()))?;

    let out_dir = config.output_dir();
    let manifest = write_dataset(&out_dir, &dataset).map_err(|e| runtime_err(e.into()))?;
    write_ground_truth(
        &out_dir.join("ground_truth.csv"),
        &dataset.bus_order,
        &model.planted_partition.labels,
    )
    .map_err(|e| runtime_err(e.into()))?;

    println!(
        "simulated {} contingencies over {} buses ({} areas), horizon {} s at {} s steps",
        dataset.n_views(),
        dataset.n_buses(),
        model.planted_partition.k,
        grid.horizon,
        grid.step
    );
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn load_dataset(config: &RunConfig) -> Result<(PathBuf, Dataset), CliError> {
    let manifest = config.manifest.clone().ok_or_else(|| {
        config_err(anyhow!(
            "this command needs a dataset manifest (--manifest or config)"
        ))
    })?;
    let dataset = ingest_csv(&manifest).map_err(|e| config_err(e.into()))?;
    Ok((manifest, dataset))
}

fn classify_pipeline_error(err: PipelineError) -> CliError {
    match err {
        PipelineError::InvalidDataset(_) | PipelineError::InvalidSweepRange { .. } => {
            config_err(err.into())
        }
        other => runtime_err(other.into()),
    }
}

/// `cluster`: run the full similarity -> views -> consensus pipeline and
/// write partitions, the sweep table, the iteration log, and a summary.
pub fn cmd_cluster(config: &RunConfig) -> Result<(), CliError> {
    let (_, dataset) = load_dataset(config)?;

    let options = PipelineOptions {
        transform: config.transform.unwrap_or_default(),
        view_mode: config.view_mode.unwrap_or_default(),
        k_choice: config.k_choice(dataset.n_buses()),
        alpha_override: config.alpha,
        max_iter: config.max_iter.unwrap_or(50),
        rel_tol: config.rel_tol.unwrap_or(1e-6),
        seed: config.seed(),
    };

    let outcome = cluster_dataset(&dataset, &options).map_err(classify_pipeline_error)?;

    for (contingency, warning) in &outcome.warnings {
        eprintln!("warning [{contingency}]: {warning}");
    }

    let out_dir = config.output_dir();
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(runtime_err)?;

    write_partition_csv(
        &out_dir.join("partition.csv"),
        &dataset.bus_order,
        &outcome.consensus.partition.labels,
    )
    .map_err(runtime_err)?;

    for (record, partition) in dataset.records.iter().zip(&outcome.per_view) {
        let stem = safe_file_stem(&record.contingency_id);
        write_partition_csv(
            &out_dir.join(format!("view_{stem}_partition.csv")),
            &dataset.bus_order,
            &partition.labels,
        )
        .map_err(runtime_err)?;
    }

    if let Some(scores) = &outcome.sweep {
        write_sweep_csv(&out_dir.join("silhouette_sweep.csv"), scores).map_err(runtime_err)?;
    }

    if config.dump_matrices.unwrap_or(false) {
        for (record, view) in dataset.records.iter().zip(&outcome.views) {
            let stem = safe_file_stem(&record.contingency_id);
            let (similarity, _) = coherency::affinity::build_similarity(record, options.transform)
                .map_err(|e| runtime_err(e.into()))?;
            write_matrix_csv(
                &out_dir.join(format!("similarity_{stem}.csv")),
                &dataset.bus_order,
                &similarity.values,
            )
            .map_err(runtime_err)?;
            write_matrix_csv(
                &out_dir.join(format!("view_{stem}.csv")),
                &dataset.bus_order,
                &view.values,
            )
            .map_err(runtime_err)?;

            let mut degree_csv = String::from("bus,degree\n");
            for (bus, value) in dataset.bus_order.iter().zip(view.degree.iter()) {
                degree_csv.push_str(&format!("{bus},{value}\n"));
            }
            std::fs::write(out_dir.join(format!("degree_{stem}.csv")), degree_csv)
                .with_context(|| "writing degree dump")
                .map_err(runtime_err)?;
        }
    }

    write_iterations_csv(&out_dir.join("iterations.csv"), &outcome.consensus.log)
        .map_err(runtime_err)?;

    let silhouette = outcome
        .consensus
        .partition
        .silhouette
        .map_or_else(|| "n/a".to_string(), |s| s.to_string());
    let summary = [
        ("chosen_k", outcome.chosen_k.to_string()),
        ("converged", outcome.consensus.converged.to_string()),
        ("iterations", outcome.consensus.iterations_used.to_string()),
        ("alpha_final", outcome.consensus.state.alpha.to_string()),
        ("silhouette", silhouette),
        ("n_buses", dataset.n_buses().to_string()),
        ("n_views", dataset.n_views().to_string()),
        ("transform", options.transform.to_string()),
        ("view_mode", options.view_mode.to_string()),
        ("seed", options.seed.to_string()),
    ];
    write_summary_csv(&out_dir.join("summary.csv"), &summary).map_err(runtime_err)?;

    println!(
        "clustered {} buses from {} views: k = {}, converged = {} in {} iterations",
        dataset.n_buses(),
        dataset.n_views(),
        outcome.chosen_k,
        outcome.consensus.converged,
        outcome.consensus.iterations_used
    );
    println!("outputs in {}", out_dir.display());
    Ok(())
}

/// `report`: overlay SVGs per (region, contingency), the co-association
/// heatmap (SVG + matrix CSV), and the membership-count table.
pub fn cmd_report(config: &RunConfig) -> Result<(), CliError> {
    let (_, dataset) = load_dataset(config)?;
    let out_dir = config.output_dir();

    let consensus_path = out_dir.join("partition.csv");
    if !consensus_path.exists() {
        return Err(config_err(anyhow!(
            "{} not found; run `cluster` first",
            consensus_path.display()
        )));
    }
    let consensus = read_partition_csv(&consensus_path, &dataset.bus_order).map_err(config_err)?;

    let mut per_view = Vec::with_capacity(dataset.n_views());
    let mut view_ids = Vec::with_capacity(dataset.n_views());
    for record in &dataset.records {
        let stem = safe_file_stem(&record.contingency_id);
        let path = out_dir.join(format!("view_{stem}_partition.csv"));
        if !path.exists() {
            return Err(config_err(anyhow!(
                "{} not found; run `cluster` first",
                path.display()
            )));
        }
        per_view.push(read_partition_csv(&path, &dataset.bus_order).map_err(config_err)?);
        view_ids.push(record.contingency_id.clone());
    }

    // Per-region frequency overlays, one per (region, contingency).
    let mut overlay_count = 0;
    for record in &dataset.records {
        let stem = safe_file_stem(&record.contingency_id);
        for region in 0..consensus.k {
            let members: Vec<usize> = consensus
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &label)| label == region)
                .map(|(i, _)| i)
                .collect();
            let title = format!(
                "region {region} under {} ({} buses)",
                record.contingency_id,
                members.len()
            );
            let svg = overlay_svg(record, &members, &title);
            std::fs::write(out_dir.join(format!("region_{region:02}_{stem}.svg")), svg)
                .with_context(|| "writing overlay SVG")
                .map_err(runtime_err)?;
            overlay_count += 1;
        }
    }

    // Co-association across the per-view partitions.
    let matrix = co_association(&per_view);
    write_matrix_csv(
        &out_dir.join("co_association.csv"),
        &dataset.bus_order,
        &matrix,
    )
    .map_err(runtime_err)?;
    let (ordering, boundaries) = cluster_ordering(&consensus);
    let heatmap = heatmap_svg(
        &matrix,
        &ordering,
        &boundaries,
        "co-association (rows grouped by consensus region)",
    );
    std::fs::write(out_dir.join("co_association.svg"), heatmap)
        .with_context(|| "writing heatmap SVG")
        .map_err(runtime_err)?;

    // Membership counts in the shape of a per-view vs consensus table.
    let table = membership_table(&view_ids, &per_view, &consensus);
    std::fs::write(out_dir.join("membership_counts.csv"), table.to_csv())
        .with_context(|| "writing membership table")
        .map_err(runtime_err)?;

    println!(
        "report: {overlay_count} overlay SVGs, co-association heatmap, membership table in {}",
        out_dir.display()
    );
    Ok(())
}
