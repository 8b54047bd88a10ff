//! CSV ingestion and table output.

use anyhow::{bail, Context, Result};
use copulamix::data::{ClusteredDataset, ObsRow};
use std::path::Path;

/// Format a float with 17 significant digits for reproducible tables.
pub fn fmt17(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // keep integers readable (cluster sizes, counts, discrete responses)
        format!("{x:.1}")
    } else {
        format!("{x:.16e}")
    }
}

pub struct LoadedData {
    pub dataset: ClusteredDataset,
    pub rows_rejected: usize,
}

/// Read a CSV with a header into a clustered dataset.
///
/// Rows with a missing (empty) required field are rejected and counted;
/// a non-empty cell that fails to parse is a hard error with its row number.
pub fn read_dataset(
    path: &Path,
    cluster_col: &str,
    response_col: &str,
    margin_covs: &[String],
    copula_covs: &[String],
) -> Result<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .context("missing CSV header")?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("column '{name}' not found in {}", path.display()))
    };
    let cluster_idx = col(cluster_col)?;
    let response_idx = col(response_col)?;
    let margin_idx: Vec<usize> = margin_covs.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let copula_idx: Vec<usize> = copula_covs.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut rejected = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("row {}: malformed CSV", line + 2))?;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        let required: Vec<&str> = std::iter::once(get(cluster_idx))
            .chain(std::iter::once(get(response_idx)))
            .chain(margin_idx.iter().map(|&i| get(i)))
            .chain(copula_idx.iter().map(|&i| get(i)))
            .collect();
        if required.iter().any(|c| c.is_empty() || c.eq_ignore_ascii_case("na")) {
            rejected += 1;
            continue;
        }
        let parse = |cell: &str, what: &str| -> Result<f64> {
            cell.parse::<f64>()
                .with_context(|| format!("row {}: non-numeric {what} value '{cell}'", line + 2))
        };
        let y = parse(get(response_idx), "response")?;
        let x_margin: Vec<f64> = margin_idx
            .iter()
            .map(|&i| parse(get(i), "covariate"))
            .collect::<Result<_>>()?;
        let x_copula: Vec<f64> = copula_idx
            .iter()
            .map(|&i| parse(get(i), "covariate"))
            .collect::<Result<_>>()?;
        rows.push(ObsRow { cluster: get(cluster_idx).to_string(), y, x_margin, x_copula });
    }
    if rows.is_empty() {
        bail!("no data rows in {}", path.display());
    }
    let dataset =
        ClusteredDataset::from_rows(rows, margin_covs.to_vec(), copula_covs.to_vec())?;
    Ok(LoadedData { dataset, rows_rejected: rejected })
}

/// Write a simulated dataset as a fit-ready CSV (cluster, y, covariates).
pub fn write_dataset_csv(path: &Path, sim: &copulamix::simulate::SimulatedData) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    let data = &sim.dataset;
    let mut header = vec!["cluster".to_string(), "y".to_string()];
    header.extend(data.margin_names().iter().cloned());
    for name in data.copula_names() {
        if !data.margin_names().contains(name) {
            header.push(name.clone());
        }
    }
    writer.write_record(&header)?;
    for k in 0..data.n_clusters() {
        for i in data.cluster_range(k) {
            let mut record = vec![data.cluster_label(k).to_string(), fmt17(data.y()[i])];
            record.extend(data.x_margin_row(i).iter().map(|&v| fmt17(v)));
            for (j, name) in data.copula_names().iter().enumerate() {
                if !data.margin_names().contains(name) {
                    record.push(fmt17(data.x_copula_row(i)[j]));
                }
            }
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}
