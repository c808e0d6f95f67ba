use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pcnflow::golden::weights::manifest_path;
use pcnflow::golden::{
    max_abs_deviation, run_network, InferenceResult, Model, NetworkWeights, Precision,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest;
use crate::output::{out_dir, write_atomic, write_json};

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also write the weights as `weights.bin` plus manifest.
    #[arg(long)]
    pub export_weights: bool,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub events: usize,
    pub precision: Precision,
    pub points: usize,
    pub condensation_points: usize,
    pub assigned_points: usize,
    /// Largest per-point output deviation from real arithmetic, fixed modes only.
    pub max_abs_deviation_vs_real: Option<f64>,
}

pub fn golden_all(
    model: &Model,
    events: &[pcnflow::events::CompactEvent],
) -> pcnflow::Result<Vec<InferenceResult>> {
    events.par_iter().map(|e| run_network(model, e)).collect()
}

pub fn run(args: &RunArgs) -> Result<()> {
    let loaded = manifest::load(&args.manifest)?;
    let dir = out_dir(args.out_dir.as_deref().or(loaded.out_dir.as_deref()));
    let results = golden_all(&loaded.model, &loaded.events.events)?;

    let precision = loaded.manifest.arch.precision;
    let deviation = if precision == Precision::Real {
        None
    } else {
        let real = golden_all(&loaded.model_in(Precision::Real)?, &loaded.events.events)?;
        Some(
            results
                .iter()
                .zip(&real)
                .map(|(a, b)| max_abs_deviation(a, b))
                .fold(0.0, f64::max),
        )
    };
    let summary = RunSummary {
        events: results.len(),
        precision,
        points: results.iter().map(|r| r.n).sum(),
        condensation_points: results.iter().map(|r| r.num_clusters()).sum(),
        assigned_points: results
            .iter()
            .map(|r| r.cluster_id.iter().filter(|&&id| id >= 0).count())
            .sum(),
        max_abs_deviation_vs_real: deviation,
    };
    write_json(&dir.join("results.json"), &results)?;
    write_json(&dir.join("run_summary.json"), &summary)?;
    if args.export_weights {
        let weights = match &loaded.manifest.weights {
            Some(p) => NetworkWeights::load(&loaded.network, p)?,
            None => NetworkWeights::init(&loaded.network)?,
        };
        let (blob, wm) = weights.to_blob(&loaded.network);
        let blob_path = dir.join("weights.bin");
        write_atomic(&blob_path, &blob)?;
        let text = toml::to_string_pretty(&wm).expect("weight manifest serializes");
        write_atomic(&manifest_path(&blob_path), text.as_bytes())?;
    }

    println!(
        "events: {} ({} points), precision {}",
        summary.events, summary.points, precision
    );
    println!(
        "condensation points: {}, assigned points: {}",
        summary.condensation_points, summary.assigned_points
    );
    if let Some(d) = deviation {
        println!("max abs deviation vs real arithmetic: {d:.6}");
    }
    println!("results written to {}", dir.display());
    Ok(())
}
