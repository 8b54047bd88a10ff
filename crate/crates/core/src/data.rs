//! Clustered datasets: responses, per-link design matrices and cluster
//! membership, stored with clusters contiguous.

use crate::error::{Error, Result};

/// One observation row used to assemble a dataset.
#[derive(Debug, Clone)]
pub struct ObsRow {
    pub cluster: String,
    pub y: f64,
    pub x_margin: Vec<f64>,
    pub x_copula: Vec<f64>,
}

/// Responses, covariate design matrices and cluster membership.
///
/// Rows are regrouped so each cluster occupies a contiguous block; clusters
/// keep their first-appearance order and rows keep their file order within a
/// cluster.
#[derive(Debug, Clone)]
pub struct ClusteredDataset {
    y: Vec<f64>,
    x_margin: Vec<f64>,
    d_margin: usize,
    x_copula: Vec<f64>,
    d_copula: usize,
    cluster_starts: Vec<usize>,
    cluster_labels: Vec<String>,
    margin_names: Vec<String>,
    copula_names: Vec<String>,
}

impl ClusteredDataset {
    pub fn from_rows(
        rows: Vec<ObsRow>,
        margin_names: Vec<String>,
        copula_names: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::input("no data rows"));
        }
        let d_margin = margin_names.len();
        let d_copula = copula_names.len();
        for (i, r) in rows.iter().enumerate() {
            if r.x_margin.len() != d_margin || r.x_copula.len() != d_copula {
                return Err(Error::dimension(format!("row {i}: covariate count mismatch")));
            }
            if !r.y.is_finite()
                || r.x_margin.iter().any(|v| !v.is_finite())
                || r.x_copula.iter().any(|v| !v.is_finite())
            {
                return Err(Error::input(format!("row {i}: non-finite value")));
            }
        }
        // Group rows by cluster, preserving first-appearance order of the
        // labels and row order within each cluster.
        let mut labels: Vec<String> = Vec::new();
        let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        for r in &rows {
            if !index.contains_key(&r.cluster) {
                index.insert(r.cluster.clone(), labels.len());
                labels.push(r.cluster.clone());
            }
        }
        let k = labels.len();
        let mut buckets: Vec<Vec<&ObsRow>> = vec![Vec::new(); k];
        for r in &rows {
            buckets[index[&r.cluster]].push(r);
        }
        let n = rows.len();
        let mut y = Vec::with_capacity(n);
        let mut x_margin = Vec::with_capacity(n * d_margin);
        let mut x_copula = Vec::with_capacity(n * d_copula);
        let mut cluster_starts = Vec::with_capacity(k + 1);
        cluster_starts.push(0);
        for bucket in &buckets {
            for r in bucket {
                y.push(r.y);
                x_margin.extend_from_slice(&r.x_margin);
                x_copula.extend_from_slice(&r.x_copula);
            }
            cluster_starts.push(y.len());
        }
        Ok(ClusteredDataset {
            y,
            x_margin,
            d_margin,
            x_copula,
            d_copula,
            cluster_starts,
            cluster_labels: labels,
            margin_names,
            copula_names,
        })
    }

    /// Convenience constructor for simulated data where every covariate
    /// column feeds both links as specified by the two index lists.
    pub fn from_columns(
        y: Vec<f64>,
        cluster_ids: Vec<usize>,
        covariates: &[(String, Vec<f64>)],
        margin_cols: &[usize],
        copula_cols: &[usize],
    ) -> Result<Self> {
        let n = y.len();
        if cluster_ids.len() != n || covariates.iter().any(|(_, c)| c.len() != n) {
            return Err(Error::dimension("column lengths differ"));
        }
        let rows: Vec<ObsRow> = (0..n)
            .map(|i| ObsRow {
                cluster: cluster_ids[i].to_string(),
                y: y[i],
                x_margin: margin_cols.iter().map(|&j| covariates[j].1[i]).collect(),
                x_copula: copula_cols.iter().map(|&j| covariates[j].1[i]).collect(),
            })
            .collect();
        let margin_names = margin_cols.iter().map(|&j| covariates[j].0.clone()).collect();
        let copula_names = copula_cols.iter().map(|&j| covariates[j].0.clone()).collect();
        Self::from_rows(rows, margin_names, copula_names)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.cluster_starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Cluster-size imbalance diagnostic sum(n_k^2) / N.
    pub fn lambda_k(&self) -> f64 {
        let s: usize = self.cluster_sizes().iter().map(|&n| n * n).sum();
        s as f64 / self.n_obs() as f64
    }

    /// Observation index range of cluster `k`.
    pub fn cluster_range(&self, k: usize) -> std::ops::Range<usize> {
        self.cluster_starts[k]..self.cluster_starts[k + 1]
    }

    pub fn cluster_label(&self, k: usize) -> &str {
        &self.cluster_labels[k]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_margin_row(&self, i: usize) -> &[f64] {
        &self.x_margin[i * self.d_margin..(i + 1) * self.d_margin]
    }

    pub fn x_copula_row(&self, i: usize) -> &[f64] {
        &self.x_copula[i * self.d_copula..(i + 1) * self.d_copula]
    }

    pub fn d_margin(&self) -> usize {
        self.d_margin
    }

    pub fn d_copula(&self) -> usize {
        self.d_copula
    }

    pub fn margin_names(&self) -> &[String] {
        &self.margin_names
    }

    pub fn copula_names(&self) -> &[String] {
        &self.copula_names
    }
}
