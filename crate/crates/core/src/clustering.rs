//! Field clustering and the aggregated instance solved in place of the
//! field-level one.
//!
//! Centroids are member means. With explicit cost matrices the pseudo-field
//! costs are average linkages (mean over member pairs), which keeps the
//! triangle inequality of the field-level matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CostSpec, ExplicitMatrices, Field, Instance};

pub const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per field.
    pub assignment: Vec<usize>,
    /// Member mean per cluster.
    pub centroids: Vec<[f64; 2]>,
    /// Field ids per cluster, ascending.
    pub members: Vec<Vec<usize>>,
}

/// Clustering exchange format: `{"k": k̃, "assignment": [cluster per field]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringJson {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// One cluster per field, in field order.
    pub fn identity(fields: &[Field]) -> Self {
        Clustering {
            assignment: (0..fields.len()).collect(),
            centroids: fields.iter().map(Field::position).collect(),
            members: (0..fields.len()).map(|l| vec![l]).collect(),
        }
    }

    /// Builds a clustering from an explicit assignment; every label in `0..k` must be used.
    pub fn from_assignment(fields: &[Field], k: usize, assignment: &[usize]) -> Result<Self> {
        if assignment.len() != fields.len() {
            return Err(Error::Shape(format!(
                "assignment lists {} fields, instance has {}",
                assignment.len(),
                fields.len()
            )));
        }
        if k == 0 {
            return Err(Error::Validation("at least one cluster is required".into()));
        }
        let mut members = vec![Vec::new(); k];
        for (l, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(Error::Validation(format!(
                    "field {l} assigned to cluster {c} of {k}"
                )));
            }
            members[c].push(l);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!("cluster {empty} has no fields")));
        }
        let centroids = members.iter().map(|m| mean(fields, m)).collect();
        Ok(Clustering {
            assignment: assignment.to_vec(),
            centroids,
            members,
        })
    }

    pub fn to_json(&self) -> ClusteringJson {
        ClusteringJson {
            k: self.k(),
            assignment: self.assignment.clone(),
        }
    }

    pub fn from_json(fields: &[Field], json: &ClusteringJson) -> Result<Self> {
        Self::from_assignment(fields, json.k, &json.assignment)
    }

    /// Within-cluster sum of squared distances to the centroids.
    pub fn wcss(&self, fields: &[Field]) -> f64 {
        fields
            .iter()
            .zip(&self.assignment)
            .map(|(f, &c)| sq_dist(f.position(), self.centroids[c]))
            .sum()
    }
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn mean(fields: &[Field], members: &[usize]) -> [f64; 2] {
    let n = members.len() as f64;
    let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &l| {
        (x + fields[l].x_km, y + fields[l].y_km)
    });
    [sx / n, sy / n]
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, q) in centroids.iter().enumerate().skip(1) {
        if sq_dist(p, *q) < sq_dist(p, centroids[best]) {
            best = c;
        }
    }
    best
}

fn seed_centers(fields: &[Field], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let pts: Vec<[f64; 2]> = fields.iter().map(Field::position).collect();
    let mut chosen = vec![rng.random_range(0..pts.len())];
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(*p, pts[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just above the accumulated sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).unwrap())
        } else {
            (0..pts.len()).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, p) in pts.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(*p, pts[next]));
        }
    }
    chosen.into_iter().map(|i| pts[i]).collect()
}

/// Refills empty clusters with the field farthest from its centroid (lowest
/// index on ties), taken from a cluster with at least two members.
fn repair_empty(fields: &[Field], assignment: &mut [usize], centroids: &mut [[f64; 2]]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far: Option<(usize, f64)> = None;
        for (l, f) in fields.iter().enumerate() {
            if sizes[assignment[l]] < 2 {
                continue;
            }
            let d = sq_dist(f.position(), centroids[assignment[l]]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((l, d));
            }
        }
        let (l, _) = far.expect("k <= L leaves a cluster with two members");
        assignment[l] = empty;
        centroids[empty] = fields[l].position();
    }
}

fn recompute(fields: &[Field], assignment: &[usize], k: usize) -> Vec<[f64; 2]> {
    let mut members = vec![Vec::new(); k];
    for (l, &c) in assignment.iter().enumerate() {
        members[c].push(l);
    }
    members.iter().map(|m| mean(fields, m)).collect()
}

/// Lloyd iterations from a k-means++ seeding. `k ≥ L` yields the identity
/// partition (with a warning when `k > L`). Clusters are relabelled by their
/// lowest member field. Also returns the within-cluster sum of squares after
/// every iteration.
pub fn kmeans_traced(fields: &[Field], k: usize, seed: u64) -> Result<(Clustering, Vec<f64>)> {
    if fields.is_empty() {
        return Err(Error::Validation(
            "cannot cluster an empty field set".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Validation("at least one cluster is required".into()));
    }
    if k >= fields.len() {
        if k > fields.len() {
            log::warn!(
                "{k} clusters requested for {} fields; using one cluster per field",
                fields.len()
            );
        }
        let c = Clustering::identity(fields);
        return Ok((c, vec![0.0]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centers(fields, k, &mut rng);
    let mut assignment: Vec<usize> = fields
        .iter()
        .map(|f| nearest(f.position(), &centroids))
        .collect();
    repair_empty(fields, &mut assignment, &mut centroids);
    centroids = recompute(fields, &assignment, k);
    let mut history = vec![wcss_of(fields, &assignment, &centroids)];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut next: Vec<usize> = fields
            .iter()
            .map(|f| nearest(f.position(), &centroids))
            .collect();
        // Keep the current label when it is as close as the nearest one.
        for (l, f) in fields.iter().enumerate() {
            let cur = assignment[l];
            if sq_dist(f.position(), centroids[cur]) <= sq_dist(f.position(), centroids[next[l]]) {
                next[l] = cur;
            }
        }
        repair_empty(fields, &mut next, &mut centroids);
        let changed = next != assignment;
        assignment = next;
        centroids = recompute(fields, &assignment, k);
        history.push(wcss_of(fields, &assignment, &centroids));
        if !changed {
            break;
        }
    }

    let mut order: Vec<usize> = Vec::with_capacity(k);
    for &c in &assignment {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let assignment: Vec<usize> = assignment.iter().map(|&c| relabel[c]).collect();
    Ok((
        Clustering::from_assignment(fields, k, &assignment)?,
        history,
    ))
}

fn wcss_of(fields: &[Field], assignment: &[usize], centroids: &[[f64; 2]]) -> f64 {
    fields
        .iter()
        .zip(assignment)
        .map(|(f, &c)| sq_dist(f.position(), centroids[c]))
        .sum()
}

pub fn kmeans(fields: &[Field], k: usize, seed: u64) -> Result<Clustering> {
    kmeans_traced(fields, k, seed).map(|(c, _)| c)
}

/// An instance whose fields are clusters, together with the clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredInstance {
    pub instance: Instance,
    pub clustering: Clustering,
}

/// Pseudo-field per cluster at its centroid, carrying summed size and revenue.
pub fn aggregate(clustering: &Clustering, inst: &Instance) -> Result<ClusteredInstance> {
    if clustering.assignment.len() != inst.num_fields() {
        return Err(Error::Shape(format!(
            "clustering covers {} fields, instance has {}",
            clustering.assignment.len(),
            inst.num_fields()
        )));
    }
    let k_count = inst.num_crops();
    let fields: Vec<Field> = clustering
        .members
        .iter()
        .enumerate()
        .map(|(z, members)| {
            let mut revenue = vec![0.0; k_count];
            for &l in members {
                for (k, r) in inst.fields[l].revenue_eur.iter().enumerate() {
                    revenue[k] += r;
                }
            }
            Field {
                id: z,
                x_km: clustering.centroids[z][0],
                y_km: clustering.centroids[z][1],
                size_ha: members.iter().map(|&l| inst.fields[l].size_ha).sum(),
                revenue_eur: revenue,
            }
        })
        .collect();
    let cost = match &inst.cost {
        CostSpec::Rate { .. } => inst.cost.clone(),
        CostSpec::Matrices { matrices } => CostSpec::Matrices {
            matrices: average_linkage(matrices, &clustering.members),
        },
    };
    Ok(ClusteredInstance {
        instance: Instance {
            crops: inst.crops.clone(),
            depots: inst.depots.clone(),
            fields,
            cost,
            generation: None,
        },
        clustering: clustering.clone(),
    })
}

fn average_linkage(m: &ExplicitMatrices, members: &[Vec<usize>]) -> ExplicitMatrices {
    let field_field = m
        .field_field
        .iter()
        .map(|ff| {
            members
                .iter()
                .enumerate()
                .map(|(a, ma)| {
                    members
                        .iter()
                        .enumerate()
                        .map(|(b, mb)| {
                            if a == b {
                                return 0.0;
                            }
                            let s: f64 = ma
                                .iter()
                                .flat_map(|&i| mb.iter().map(move |&j| ff[i][j]))
                                .sum();
                            s / (ma.len() * mb.len()) as f64
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let depot_field = m
        .depot_field
        .iter()
        .map(|df| {
            df.iter()
                .map(|row| {
                    members
                        .iter()
                        .map(|mz| mz.iter().map(|&j| row[j]).sum::<f64>() / mz.len() as f64)
                        .collect()
                })
                .collect()
        })
        .collect();
    ExplicitMatrices {
        field_field,
        depot_field,
    }
}
