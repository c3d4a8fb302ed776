//! Agglomerative clustering over Euclidean distance.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

impl FromStr for Linkage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            _ => Err(format!("unknown linkage `{s}`")),
        }
    }
}

/// One merge step. Cluster ids below `n` are leaves; merge `i` creates id
/// `n + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    pub linkage: Linkage,
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
    /// Leaf labels left to right.
    pub leaf_order: Vec<String>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Cluster {
    id: usize,
    members: Vec<usize>,
    /// Lexicographically smallest member label.
    min_label: String,
}

/// Merges the closest pair at each step. Ties go to the pair whose
/// `(min label, min label)` is lexicographically smallest; the left child is
/// the one with the smaller minimum label.
pub fn hierarchical_cluster(
    labels: &[String],
    points: &[Vec<f64>],
    linkage: Linkage,
) -> Result<Dendrogram, AnalysisError> {
    let n = labels.len();
    if n == 0 || points.len() != n {
        return Err(AnalysisError::EmptyMatrix);
    }
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| euclid(a, b)).collect())
        .collect();

    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            id: i,
            members: vec![i],
            min_label: labels[i].clone(),
        })
        .collect();
    let d = &d;
    let dist = |a: &Cluster, b: &Cluster| -> f64 {
        let pairs = a.members.iter().flat_map(|&i| b.members.iter().map(move |&j| d[i][j]));
        match linkage {
            Linkage::Average => pairs.sum::<f64>() / (a.members.len() * b.members.len()) as f64,
            Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
            Linkage::Complete => pairs.fold(0.0, f64::max),
        }
    };

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while clusters.len() > 1 {
        let mut best: Option<(f64, &str, &str, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (a, b) = if clusters[i].min_label <= clusters[j].min_label { (i, j) } else { (j, i) };
                let cand = (
                    dist(&clusters[a], &clusters[b]),
                    clusters[a].min_label.as_str(),
                    clusters[b].min_label.as_str(),
                    a,
                    b,
                );
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        cand.0.total_cmp(&cur.0).then_with(|| (cand.1, cand.2).cmp(&(cur.1, cur.2))).is_lt()
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (distance, _, _, a, b) = best.expect("two or more clusters");
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        let cb = clusters.remove(hi);
        let ca = clusters.remove(lo);
        let (left, right) = if a < b { (ca, cb) } else { (cb, ca) };
        let mut members = left.members.clone();
        members.extend(&right.members);
        let id = n + merges.len();
        merges.push(Merge {
            left: left.id,
            right: right.id,
            distance,
            size: members.len(),
        });
        clusters.push(Cluster {
            id,
            members,
            min_label: left.min_label.min(right.min_label),
        });
    }

    let mut leaf_order = Vec::with_capacity(n);
    let mut stack = vec![clusters[0].id];
    while let Some(id) = stack.pop() {
        if id < n {
            leaf_order.push(labels[id].clone());
        } else {
            let m = &merges[id - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    Ok(Dendrogram {
        linkage,
        labels: labels.to_vec(),
        merges,
        leaf_order,
    })
}
