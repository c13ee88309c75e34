//! The per-round architecture graph.
//!
//! Nodes are all assignments of a [`Subspace`], enumerated in mixed radix with
//! the last slot least significant. Two nodes are adjacent iff they differ in
//! exactly one slot; a super-cell counts as a single slot.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use ndarray::Array2;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::{write_gray_bits, Subspace};
use crate::sparse::{CsrMatrix, Edge};

/// Largest subspace a graph may be built over: `6^7` nodes.
pub const DEFAULT_NODE_CAP: usize = 279_936;

/// Edge weight of the assigned similarity, `e^{-0.5}`.
pub fn assigned_weight() -> f64 {
    (-0.5f64).exp()
}

/// Magic bytes of the feature-matrix sidecar written by [`ArchGraph::dump`].
pub const FEATURE_MAGIC: &[u8; 4] = b"GFEA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimilarityMode {
    Assigned {
        #[serde(default = "assigned_weight")]
        weight: f64,
    },
    Measured {
        #[serde(default = "default_min_pairs")]
        min_pairs: usize,
        #[serde(default = "default_floor")]
        floor: f64,
    },
}

fn default_min_pairs() -> usize {
    30
}

fn default_floor() -> f64 {
    0.01
}

impl Default for SimilarityMode {
    fn default() -> Self {
        SimilarityMode::Assigned {
            weight: assigned_weight(),
        }
    }
}

impl SimilarityMode {
    pub fn measured() -> Self {
        SimilarityMode::Measured {
            min_pairs: default_min_pairs(),
            floor: default_floor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SimilarityMode::Assigned { weight } if !(weight > 0.0 && weight.is_finite()) => Err(
                Error::InvalidSpec(format!("assigned weight must be positive, got {weight}")),
            ),
            SimilarityMode::Measured { floor, .. } if !(floor > 0.0 && floor <= 1.0) => Err(
                Error::InvalidSpec(format!("measured floor must lie in (0, 1], got {floor}")),
            ),
            _ => Ok(()),
        }
    }
}

/// One evaluated node: slot digits and the measured accuracy.
pub type Sample = (Vec<usize>, f64);

/// Edge weights per slot and unordered choice pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    radices: Vec<usize>,
    weights: Vec<Vec<f64>>,
    measured_pairs: usize,
}

impl SimilarityTable {
    pub fn uniform(radices: &[usize], weight: f64) -> Self {
        Self {
            radices: radices.to_vec(),
            weights: radices.iter().map(|&r| vec![weight; r * r]).collect(),
            measured_pairs: 0,
        }
    }

    #[inline]
    pub fn weight(&self, slot: usize, a: usize, b: usize) -> f64 {
        self.weights[slot][a * self.radices[slot] + b]
    }

    /// Number of (slot, choice pair) entries backed by enough observations.
    pub fn measured_pairs(&self) -> usize {
        self.measured_pairs
    }

    fn set(&mut self, slot: usize, a: usize, b: usize, w: f64) {
        let r = self.radices[slot];
        self.weights[slot][a * r + b] = w;
        self.weights[slot][b * r + a] = w;
    }
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Correlation-based edge weights.
///
/// For each slot and choice pair `(a, b)`, collects sampled node pairs that
/// agree everywhere except that slot, where one picks `a` and the other `b`,
/// and takes the Pearson correlation of their accuracies clamped to
/// `[floor, 1]`. Pairs with fewer than `min_pairs` matches, or with zero
/// variance, keep the assigned weight.
pub fn measured_similarity(
    samples: &[Sample],
    subspace: &Subspace,
    min_pairs: usize,
    floor: f64,
) -> Result<SimilarityTable> {
    if samples.is_empty() {
        return Err(Error::MissingSamples);
    }
    let radices = subspace.radices();
    let strides = subspace.strides()?;
    let indexed: Vec<(usize, &[usize], f64)> = samples
        .iter()
        .map(|(a, acc)| Ok((subspace.node_index(a)?, a.as_slice(), *acc)))
        .collect::<Result<_>>()?;

    let mut table = SimilarityTable::uniform(radices, assigned_weight());
    for slot in 0..radices.len() {
        let mut groups: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for &(idx, digits, acc) in &indexed {
            let d = digits[slot];
            groups.entry(idx - d * strides[slot]).or_default().push((d, acc));
        }
        let r = radices[slot];
        let mut pairs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); r * r];
        for members in groups.values() {
            for (i, &(da, xa)) in members.iter().enumerate() {
                for &(db, xb) in &members[i + 1..] {
                    match da.cmp(&db) {
                        std::cmp::Ordering::Less => pairs[da * r + db].push((xa, xb)),
                        std::cmp::Ordering::Greater => pairs[db * r + da].push((xb, xa)),
                        std::cmp::Ordering::Equal => {}
                    }
                }
            }
        }
        for a in 0..r {
            for b in a + 1..r {
                let obs = &pairs[a * r + b];
                if obs.len() < min_pairs.max(2) {
                    continue;
                }
                if let Some(rho) = pearson(obs) {
                    table.set(slot, a, b, rho.clamp(floor, 1.0));
                    table.measured_pairs += 1;
                }
            }
        }
    }
    Ok(table)
}

impl Subspace {
    /// Place value of each slot's digit in the node index.
    pub fn strides(&self) -> Result<Vec<usize>> {
        self.node_count_usize()?;
        let radices = self.radices();
        let mut strides = vec![1usize; radices.len()];
        for i in (0..radices.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * radices[i + 1];
        }
        Ok(strides)
    }

    pub fn node_index(&self, assignment: &[usize]) -> Result<usize> {
        let radices = self.radices();
        if assignment.len() != radices.len() {
            return Err(Error::MissingAssignment {
                expected: radices.len(),
                got: assignment.len(),
            });
        }
        self.node_count_usize()?;
        let mut index = 0usize;
        for (position, (&d, &r)) in assignment.iter().zip(radices).enumerate() {
            if d >= r {
                return Err(Error::ChoiceOutOfRange {
                    position,
                    choice: d,
                    limit: r,
                });
            }
            index = index * r + d;
        }
        Ok(index)
    }

    pub fn assignment_of(&self, index: usize) -> Result<Vec<usize>> {
        let len = self.node_count_usize()?;
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        let radices = self.radices();
        let mut digits = vec![0; radices.len()];
        let mut rest = index;
        for (d, &r) in digits.iter_mut().zip(radices).rev() {
            *d = rest % r;
            rest /= r;
        }
        Ok(digits)
    }
}

#[derive(Debug, Clone)]
pub struct ArchGraph {
    subspace: Subspace,
    num_nodes: usize,
    edges: Vec<Edge>,
    feature_dim: usize,
    features: Vec<u8>,
    normalized: Option<CsrMatrix>,
}

/// Builds the Hamming-1 graph of `subspace`.
///
/// `samples` feed the measured similarity and are otherwise ignored.
pub fn build_graph(
    subspace: &Subspace,
    mode: &SimilarityMode,
    samples: Option<&[Sample]>,
    node_cap: usize,
) -> Result<ArchGraph> {
    mode.validate()?;
    if subspace.node_count() > node_cap as u128 {
        return Err(Error::NodeCapExceeded {
            nodes: subspace.node_count(),
            cap: node_cap,
        });
    }
    let n = subspace.node_count_usize()?;
    let radices = subspace.radices();
    let strides = subspace.strides()?;
    let table = match *mode {
        SimilarityMode::Assigned { weight } => SimilarityTable::uniform(radices, weight),
        SimilarityMode::Measured { min_pairs, floor } => {
            let samples = samples.ok_or(Error::MissingSamples)?;
            measured_similarity(samples, subspace, min_pairs, floor)?
        }
    };

    let degree: usize = radices.iter().map(|r| r - 1).sum();
    let spec = subspace.spec();
    let bits = spec.bits_per_cell();
    let feature_dim = spec.feature_dim();
    let mut edges = Vec::with_capacity(n * degree / 2);
    let mut features = vec![0u8; n * feature_dim];
    let mut digits = vec![0usize; radices.len()];
    let mut arch = vec![0usize; spec.num_layers];

    for u in 0..n {
        subspace.materialize_into(&digits, &mut arch);
        write_gray_bits(&arch, bits, &mut features[u * feature_dim..(u + 1) * feature_dim]);
        for (slot, (&d, &r)) in digits.iter().zip(radices).enumerate() {
            for other in d + 1..r {
                edges.push(Edge {
                    u: u as u32,
                    v: (u + (other - d) * strides[slot]) as u32,
                    w: table.weight(slot, d, other),
                });
            }
        }
        // Odometer increment, last slot fastest.
        for (d, &r) in digits.iter_mut().zip(radices).rev() {
            *d += 1;
            if *d < r {
                break;
            }
            *d = 0;
        }
    }
    edges.sort_by_key(|e| (e.u, e.v));

    Ok(ArchGraph {
        subspace: subspace.clone(),
        num_nodes: n,
        edges,
        feature_dim,
        features,
        normalized: None,
    })
}

/// `D^{-1/2} (A + I) D^{-1/2}` of the graph's adjacency.
pub fn normalize_adjacency(graph: &ArchGraph) -> CsrMatrix {
    CsrMatrix::normalized_from_edges(graph.num_nodes, &graph.edges)
}

impl ArchGraph {
    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Gray-code bits of node `i`.
    pub fn feature_row(&self, i: usize) -> &[u8] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn features_as<F: Float>(&self) -> Array2<F> {
        Array2::from_shape_fn((self.num_nodes, self.feature_dim), |(i, j)| {
            if self.features[i * self.feature_dim + j] == 1 {
                F::one()
            } else {
                F::zero()
            }
        })
    }

    /// Computes and stores the normalized adjacency.
    pub fn normalize(&mut self) -> &CsrMatrix {
        let m = normalize_adjacency(self);
        self.normalized.insert(m)
    }

    pub fn normalized(&self) -> Option<&CsrMatrix> {
        self.normalized.as_ref()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for e in &self.edges {
            deg[e.u as usize] += 1;
            deg[e.v as usize] += 1;
        }
        deg
    }

    /// Writes `u v w` lines to `edge_path` and the bit matrix to `feature_path`
    /// (magic `GFEA`, u32 rows, u32 cols, then one byte per bit, row-major).
    pub fn dump(&self, edge_path: &Path, feature_path: &Path) -> Result<()> {
        let open = |p: &Path| {
            File::create(p).map(BufWriter::new).map_err(|source| Error::File {
                path: p.to_path_buf(),
                source,
            })
        };
        let mut out = open(edge_path)?;
        for e in &self.edges {
            writeln!(out, "{} {} {:.6}", e.u, e.v, e.w)?;
        }
        out.flush()?;

        let mut out = open(feature_path)?;
        out.write_all(FEATURE_MAGIC)?;
        out.write_u32::<LittleEndian>(self.num_nodes as u32)?;
        out.write_u32::<LittleEndian>(self.feature_dim as u32)?;
        out.write_all(&self.features)?;
        out.flush()?;
        Ok(())
    }
}
