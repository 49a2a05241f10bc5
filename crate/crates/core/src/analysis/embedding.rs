use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::expr::{jaccard_distance, MembershipVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub d: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, d: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        let k = labels.len();
        if d.len() != k || d.iter().any(|row| row.len() != k) {
            return Err(AnalysisError::Shape(format!("expected a {k}x{k} matrix")));
        }
        Ok(Self { labels, d })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same matrix with rows, columns and labels reordered: entry `i` of the
    /// result is entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: perm.iter().map(|&i| self.labels[i].clone()).collect(),
            d: perm.iter().map(|&i| perm.iter().map(|&j| self.d[i][j]).collect()).collect(),
        }
    }
}

pub fn pairwise_jaccard_matrix(labels: &[String], memberships: &[MembershipVector]) -> Result<DistanceMatrix, AnalysisError> {
    if labels.len() != memberships.len() {
        return Err(AnalysisError::Shape(format!("{} labels for {} memberships", labels.len(), memberships.len())));
    }
    let k = memberships.len();
    let mut d = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = jaccard_distance(&memberships[i], &memberships[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    DistanceMatrix::new(labels.to_vec(), d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub labels: Vec<String>,
    pub coordinates: Vec<[f64; 2]>,
    pub eigenvalues_used: [f64; 2],
}

impl Embedding2D {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coordinates[i], self.coordinates[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

/// Classical (Torgerson) scaling into two dimensions.
///
/// Negative eigenvalues are clamped to zero. Each axis is oriented so that
/// the point with the smallest label among those off the axis' origin has a
/// positive coordinate.
pub fn classical_mds(dm: &DistanceMatrix) -> Result<Embedding2D, AnalysisError> {
    let k = dm.len();
    if k < 3 {
        return Err(AnalysisError::TooFewPoints(k));
    }
    let sq = DMatrix::from_fn(k, k, |i, j| dm.d[i][j] * dm.d[i][j]);
    let row_means: Vec<f64> = (0..k).map(|i| sq.row(i).sum() / k as f64).collect();
    let grand = row_means.iter().sum::<f64>() / k as f64;
    let b = DMatrix::from_fn(k, k, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut by_label: Vec<usize> = (0..k).collect();
    by_label.sort_by(|&a, &b| dm.labels[a].cmp(&dm.labels[b]).then(a.cmp(&b)));

    let mut coordinates = vec![[0.0; 2]; k];
    let mut eigenvalues_used = [0.0; 2];
    for (axis, &e) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[e].max(0.0);
        eigenvalues_used[axis] = lambda;
        let scale = lambda.sqrt();
        let mut column: Vec<f64> = (0..k).map(|i| eig.eigenvectors[(i, e)] * scale).collect();
        if let Some(&first) = by_label.iter().find(|&&i| column[i].abs() > 1e-9) {
            if column[first] < 0.0 {
                column.iter_mut().for_each(|c| *c = -*c);
            }
        }
        let mean = column.iter().sum::<f64>() / k as f64;
        for (i, c) in column.into_iter().enumerate() {
            coordinates[i][axis] = if lambda == 0.0 { 0.0 } else { c - mean };
        }
    }
    Ok(Embedding2D { labels: dm.labels.clone(), coordinates, eigenvalues_used })
}
