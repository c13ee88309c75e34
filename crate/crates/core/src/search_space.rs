//! Chain-styled search spaces, architectures, subspaces and segment plans.
//!
//! An [`Architecture`] picks one of `O` operator choices for each of `L`
//! layers. A [`Subspace`] is the region searched in one round: some layers
//! are free, some are pinned, and blocks of previously searched layers may be
//! collapsed into [`SuperCell`]s whose options are preserved sub-assignments.
//! Each free layer and each super-cell is one *slot*; a node of the subspace
//! is an assignment of one digit per slot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Labels for the six inverted-residual variants: kernel in {3,5,7} and
/// expansion ratio in {3,6}.
pub const DEFAULT_CHOICE_LABELS: [&str; 6] = ["k3_e3", "k3_e6", "k5_e3", "k5_e6", "k7_e3", "k7_e6"];

/// Label of the cell every layer starts from when no initial architecture is given.
pub const DEFAULT_INITIAL_LABEL: &str = "k3_e6";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceSpec {
    pub num_layers: usize,
    pub choices_per_layer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_labels: Option<Vec<String>>,
}

impl SearchSpaceSpec {
    pub fn new(num_layers: usize, choices_per_layer: usize) -> Result<Self> {
        let spec = Self {
            num_layers,
            choices_per_layer,
            choice_labels: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.choice_labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::InvalidSpec("num_layers must be at least 1".into()));
        }
        if self.choices_per_layer < 2 {
            return Err(Error::InvalidSpec(format!(
                "choices_per_layer must be at least 2, got {}",
                self.choices_per_layer
            )));
        }
        if let Some(labels) = &self.choice_labels {
            if labels.len() != self.choices_per_layer {
                return Err(Error::InvalidSpec(format!(
                    "{} choice labels given for {} choices",
                    labels.len(),
                    self.choices_per_layer
                )));
            }
        }
        Ok(())
    }

    /// Bits needed to Gray-encode one cell: `ceil(log2 O)`.
    pub fn bits_per_cell(&self) -> usize {
        let o = self.choices_per_layer;
        (usize::BITS - (o - 1).leading_zeros()) as usize
    }

    pub fn feature_dim(&self) -> usize {
        self.num_layers * self.bits_per_cell()
    }

    /// All layers at the `k3_e6` cell when labels name it, else choice 0.
    pub fn default_initial(&self) -> Architecture {
        let choice = self
            .choice_labels
            .as_ref()
            .and_then(|labels| labels.iter().position(|l| l == DEFAULT_INITIAL_LABEL))
            .unwrap_or(0);
        Architecture(vec![choice; self.num_layers])
    }
}

/// One choice index per layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Architecture(Vec<usize>);

impl Architecture {
    pub fn new(choices: Vec<usize>, spec: &SearchSpaceSpec) -> Result<Self> {
        let arch = Self(choices);
        arch.check(spec)?;
        Ok(arch)
    }

    /// Wraps choices without validation against a spec.
    pub fn from_choices(choices: Vec<usize>) -> Self {
        Self(choices)
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, spec: &SearchSpaceSpec) -> Result<()> {
        if self.0.len() != spec.num_layers {
            return Err(Error::InvalidArchitecture(format!(
                "expected {} layers, got {}",
                spec.num_layers,
                self.0.len()
            )));
        }
        if let Some((layer, &c)) = self
            .0
            .iter()
            .enumerate()
            .find(|(_, &c)| c >= spec.choices_per_layer)
        {
            return Err(Error::InvalidArchitecture(format!(
                "layer {layer} has choice {c}, limit {}",
                spec.choices_per_layer
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str, spec: &SearchSpaceSpec) -> Result<Self> {
        let arch: Architecture = text.parse()?;
        arch.check(spec)?;
        Ok(arch)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("architecture entry {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Architecture)
    }
}

/// `i`-th word of the binary-reflected Gray sequence.
#[inline]
pub fn gray_code(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Writes the Gray bits of `arch` into `out` (MSB first per cell).
pub fn write_gray_bits(arch: &[usize], bits_per_cell: usize, out: &mut [u8]) {
    for (layer, &choice) in arch.iter().enumerate() {
        let code = gray_code(choice);
        let cell = &mut out[layer * bits_per_cell..(layer + 1) * bits_per_cell];
        for (b, slot) in cell.iter_mut().enumerate() {
            *slot = ((code >> (bits_per_cell - 1 - b)) & 1) as u8;
        }
    }
}

/// Concatenated per-layer Gray codes, `L * ceil(log2 O)` bits of 0/1.
pub fn gray_encode(arch: &Architecture, spec: &SearchSpaceSpec) -> Vec<u8> {
    let bits = spec.bits_per_cell();
    let mut out = vec![0u8; arch.len() * bits];
    write_gray_bits(arch.choices(), bits, &mut out);
    out
}

/// Number of layers at which two architectures choose different cells.
pub fn cell_hamming(a: &Architecture, b: &Architecture) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}

/// A block of layers searched as one position whose options are preserved
/// sub-assignments from an earlier round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperCell {
    positions: Vec<usize>,
    candidates: Vec<Vec<usize>>,
}

impl SuperCell {
    pub fn new(positions: Vec<usize>, candidates: Vec<Vec<usize>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidSpec("super-cell without positions".into()));
        }
        if candidates.is_empty() {
            return Err(Error::InvalidSpec("super-cell without candidates".into()));
        }
        let unique: BTreeSet<_> = positions.iter().collect();
        if unique.len() != positions.len() || positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidSpec(
                "super-cell positions must be strictly increasing".into(),
            ));
        }
        if let Some(c) = candidates.iter().find(|c| c.len() != positions.len()) {
            return Err(Error::InvalidSpec(format!(
                "super-cell candidate has {} entries for {} positions",
                c.len(),
                positions.len()
            )));
        }
        let distinct: BTreeSet<_> = candidates.iter().collect();
        if distinct.len() != candidates.len() {
            return Err(Error::InvalidSpec("super-cell candidates must be distinct".into()));
        }
        Ok(Self {
            positions,
            candidates,
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn candidates(&self) -> &[Vec<usize>] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// One searchable position of a subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Free(usize),
    Super(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    spec: SearchSpaceSpec,
    free_positions: Vec<usize>,
    fixed: BTreeMap<usize, usize>,
    super_cells: Vec<SuperCell>,
    slots: Vec<Slot>,
    radices: Vec<usize>,
    node_count: u128,
}

impl Subspace {
    pub fn new(
        spec: SearchSpaceSpec,
        free_positions: Vec<usize>,
        fixed: BTreeMap<usize, usize>,
        super_cells: Vec<SuperCell>,
    ) -> Result<Self> {
        spec.validate()?;
        let l = spec.num_layers;
        let o = spec.choices_per_layer;
        let mut free_positions = free_positions;
        free_positions.sort_unstable();

        let mut owner = vec![false; l];
        let mut claim = |layer: usize, what: &str| -> Result<()> {
            if layer >= l {
                return Err(Error::InvalidSpec(format!(
                    "{what} layer {layer} outside 0..{l}"
                )));
            }
            if std::mem::replace(&mut owner[layer], true) {
                return Err(Error::InvalidSpec(format!(
                    "layer {layer} claimed more than once"
                )));
            }
            Ok(())
        };
        for &p in &free_positions {
            claim(p, "free")?;
        }
        for (&p, &c) in &fixed {
            claim(p, "fixed")?;
            if c >= o {
                return Err(Error::InvalidSpec(format!(
                    "fixed layer {p} has choice {c}, limit {o}"
                )));
            }
        }
        for cell in &super_cells {
            for &p in cell.positions() {
                claim(p, "super-cell")?;
            }
            if cell.candidates().iter().flatten().any(|&c| c >= o) {
                return Err(Error::InvalidSpec(format!(
                    "super-cell candidate choice out of range (limit {o})"
                )));
            }
        }
        if let Some(missing) = owner.iter().position(|&claimed| !claimed) {
            return Err(Error::InvalidSpec(format!(
                "layer {missing} is neither free, fixed, nor in a super-cell"
            )));
        }

        let mut slots: Vec<(usize, Slot)> = free_positions
            .iter()
            .map(|&p| (p, Slot::Free(p)))
            .chain(
                super_cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.positions()[0], Slot::Super(i))),
            )
            .collect();
        slots.sort_by_key(|(lead, _)| *lead);
        let slots: Vec<Slot> = slots.into_iter().map(|(_, s)| s).collect();
        let radices: Vec<usize> = slots
            .iter()
            .map(|s| match *s {
                Slot::Free(_) => o,
                Slot::Super(i) => super_cells[i].len(),
            })
            .collect();
        let node_count = radices
            .iter()
            .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
            .ok_or_else(|| Error::InvalidSpec("subspace node count overflows".into()))?;

        Ok(Self {
            spec,
            free_positions,
            fixed,
            super_cells,
            slots,
            radices,
            node_count,
        })
    }

    /// Subspace with `free` layers searchable, the given super-cells, and
    /// every other layer pinned to its choice in `base`.
    pub fn around(
        spec: &SearchSpaceSpec,
        base: &Architecture,
        free: &[usize],
        super_cells: Vec<SuperCell>,
    ) -> Result<Self> {
        base.check(spec)?;
        let mut taken: BTreeSet<usize> = free.iter().copied().collect();
        taken.extend(super_cells.iter().flat_map(|c| c.positions().iter().copied()));
        let fixed = (0..spec.num_layers)
            .filter(|p| !taken.contains(p))
            .map(|p| (p, base.choices()[p]))
            .collect();
        Self::new(spec.clone(), free.to_vec(), fixed, super_cells)
    }

    /// The full search space: every layer free.
    pub fn full(spec: &SearchSpaceSpec) -> Result<Self> {
        Self::new(
            spec.clone(),
            (0..spec.num_layers).collect(),
            BTreeMap::new(),
            Vec::new(),
        )
    }

    pub fn spec(&self) -> &SearchSpaceSpec {
        &self.spec
    }

    pub fn free_positions(&self) -> &[usize] {
        &self.free_positions
    }

    pub fn fixed(&self) -> &BTreeMap<usize, usize> {
        &self.fixed
    }

    pub fn super_cells(&self) -> &[SuperCell] {
        &self.super_cells
    }

    /// Searchable positions in canonical order (by leading layer index).
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn node_count(&self) -> u128 {
        self.node_count
    }

    pub(crate) fn node_count_usize(&self) -> Result<usize> {
        usize::try_from(self.node_count)
            .map_err(|_| Error::InvalidSpec("subspace too large to index".into()))
    }

    fn check_assignment(&self, assignment: &[usize]) -> Result<()> {
        if assignment.len() != self.slots.len() {
            return Err(Error::MissingAssignment {
                expected: self.slots.len(),
                got: assignment.len(),
            });
        }
        for (position, (&choice, &limit)) in assignment.iter().zip(&self.radices).enumerate() {
            if choice >= limit {
                return Err(Error::ChoiceOutOfRange {
                    position,
                    choice,
                    limit,
                });
            }
        }
        Ok(())
    }

    /// Writes the full architecture for `assignment` into `out` (length L).
    pub(crate) fn materialize_into(&self, assignment: &[usize], out: &mut [usize]) {
        for (&p, &c) in &self.fixed {
            out[p] = c;
        }
        for (slot, &digit) in self.slots.iter().zip(assignment) {
            match *slot {
                Slot::Free(p) => out[p] = digit,
                Slot::Super(i) => {
                    let cell = &self.super_cells[i];
                    for (&p, &c) in cell.positions.iter().zip(&cell.candidates[digit]) {
                        out[p] = c;
                    }
                }
            }
        }
    }

    /// Expands one digit per slot into a full `L`-layer architecture.
    pub fn materialize(&self, assignment: &[usize]) -> Result<Architecture> {
        self.check_assignment(assignment)?;
        let mut out = vec![0; self.spec.num_layers];
        self.materialize_into(assignment, &mut out);
        Ok(Architecture(out))
    }

    /// Like [`Subspace::materialize`], with the assignment keyed by each
    /// slot's leading layer index.
    pub fn materialize_map(&self, assignment: &BTreeMap<usize, usize>) -> Result<Architecture> {
        let digits = self
            .slots
            .iter()
            .map(|s| {
                let lead = match *s {
                    Slot::Free(p) => p,
                    Slot::Super(i) => self.super_cells[i].positions[0],
                };
                assignment.get(&lead).copied().ok_or(Error::MissingAssignment {
                    expected: self.slots.len(),
                    got: assignment.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.materialize(&digits)
    }

    /// Inverse of [`Subspace::materialize`] for architectures inside this subspace.
    pub fn extract(&self, arch: &Architecture) -> Result<Vec<usize>> {
        arch.check(&self.spec)?;
        let choices = arch.choices();
        if let Some((&p, &c)) = self.fixed.iter().find(|(&p, &c)| choices[p] != c) {
            return Err(Error::InvalidArchitecture(format!(
                "layer {p} is fixed to {c} but the architecture has {}",
                choices[p]
            )));
        }
        self.slots
            .iter()
            .map(|slot| match *slot {
                Slot::Free(p) => Ok(choices[p]),
                Slot::Super(i) => {
                    let cell = &self.super_cells[i];
                    cell.candidates
                        .iter()
                        .position(|cand| {
                            cell.positions.iter().zip(cand).all(|(&p, &c)| choices[p] == c)
                        })
                        .ok_or_else(|| {
                            Error::InvalidArchitecture(format!(
                                "no super-cell candidate matches layers {:?}",
                                cell.positions
                            ))
                        })
                }
            })
            .collect()
    }

    /// `m` distinct node indices drawn uniformly without replacement.
    pub fn sample_nodes(&self, m: usize, seed: u64) -> Result<Vec<usize>> {
        let available = self.node_count_usize().unwrap_or(usize::MAX);
        if m > available {
            return Err(Error::SampleTooLarge {
                requested: m,
                available,
            });
        }
        let mut rng = seeds::rng_from(seed);
        Ok(index::sample(&mut rng, available, m).into_vec())
    }

    /// `m` distinct assignments drawn uniformly without replacement.
    pub fn sample_uniform(&self, m: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        self.sample_nodes(m, seed)?
            .into_iter()
            .map(|i| self.assignment_of(i))
            .collect()
    }
}

/// Disjoint layer sets searched in successive rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    segments: Vec<Vec<usize>>,
}

impl SegmentPlan {
    pub fn segments(&self) -> &[Vec<usize>] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.segments.iter().map(Vec::len).collect()
    }
}

/// Contiguous segments of the given sizes, in layer order.
pub fn make_segment_plan(spec: &SearchSpaceSpec, sizes: &[usize]) -> Result<SegmentPlan> {
    let sum: usize = sizes.iter().sum();
    if sum != spec.num_layers {
        return Err(Error::PlanSizeMismatch {
            sum,
            layers: spec.num_layers,
        });
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidSpec("segments must be non-empty".into()));
    }
    let mut start = 0;
    let segments = sizes
        .iter()
        .map(|&s| {
            let seg: Vec<usize> = (start..start + s).collect();
            start += s;
            seg
        })
        .collect();
    Ok(SegmentPlan { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(l: usize, o: usize) -> SearchSpaceSpec {
        SearchSpaceSpec::new(l, o).unwrap()
    }

    fn bits(s: &str) -> Vec<u8> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_digit(2).unwrap() as u8)
            .collect()
    }

    #[test]
    fn gray_encoding_examples() {
        let s = spec(3, 6);
        let zero = Architecture::new(vec![0, 0, 0], &s).unwrap();
        assert_eq!(gray_encode(&zero, &s), bits("000 000 000"));
        let arch = Architecture::new(vec![5, 4, 3], &s).unwrap();
        assert_eq!(gray_encode(&arch, &s), bits("111 110 010"));

        let s19 = spec(19, 6);
        assert_eq!(s19.feature_dim(), 57);
        let arch = Architecture::new((0..19).map(|i| i % 6).collect(), &s19).unwrap();
        assert_eq!(gray_encode(&arch, &s19).len(), 57);
    }

    #[test]
    fn gray_table_matches_reflection_construction() {
        // Build the 3-bit reflected sequence by mirroring, independent of `gray_code`.
        let mut seq = vec![0usize, 1];
        for bit in 1..3 {
            let mirrored: Vec<usize> = seq.iter().rev().map(|c| c | (1 << bit)).collect();
            seq.extend(mirrored);
        }
        assert_eq!(&seq[..6], &[0b000, 0b001, 0b011, 0b010, 0b110, 0b111]);
        for (i, &c) in seq.iter().enumerate() {
            assert_eq!(gray_code(i), c);
        }
    }

    #[test]
    fn bits_per_cell() {
        assert_eq!(spec(1, 2).bits_per_cell(), 1);
        assert_eq!(spec(1, 4).bits_per_cell(), 2);
        assert_eq!(spec(1, 5).bits_per_cell(), 3);
        assert_eq!(spec(1, 8).bits_per_cell(), 3);
        assert_eq!(spec(1, 9).bits_per_cell(), 4);
    }

    #[test]
    fn spec_validation() {
        assert!(SearchSpaceSpec::new(0, 6).is_err());
        assert!(SearchSpaceSpec::new(3, 1).is_err());
        let labels = DEFAULT_CHOICE_LABELS.iter().map(|s| s.to_string()).collect();
        let s = spec(19, 6).with_labels(labels).unwrap();
        assert_eq!(s.default_initial().choices(), &[1; 19]);
        assert_eq!(spec(4, 6).default_initial().choices(), &[0; 4]);
    }

    #[test]
    fn hamming_examples() {
        let a = |v: Vec<usize>| Architecture::from_choices(v);
        assert_eq!(cell_hamming(&a(vec![0, 1, 2]), &a(vec![0, 1, 2])).unwrap(), 0);
        assert_eq!(cell_hamming(&a(vec![0, 1, 2]), &a(vec![0, 1, 3])).unwrap(), 1);
        assert_eq!(cell_hamming(&a(vec![0, 0, 0]), &a(vec![5, 5, 5])).unwrap(), 3);
        assert!(matches!(
            cell_hamming(&a(vec![0, 0]), &a(vec![0, 0, 0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn architecture_text_format() {
        let s = spec(4, 6);
        let arch = Architecture::parse("1, 3,0,5", &s).unwrap();
        assert_eq!(arch.to_string(), "1,3,0,5");
        assert!(Architecture::parse("1,3,0", &s).is_err());
        assert!(Architecture::parse("1,3,0,6", &s).is_err());
        assert!(Architecture::parse("1,x,0,5", &s).is_err());
    }

    fn two_free() -> Subspace {
        let fixed = BTreeMap::from([(2, 4)]);
        Subspace::new(spec(3, 6), vec![0, 1], fixed, vec![]).unwrap()
    }

    #[test]
    fn sampling() {
        let sub = two_free();
        assert_eq!(sub.node_count(), 36);
        let all = sub.sample_uniform(36, 9).unwrap();
        let unique: BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), 36);
        assert_eq!(sub.sample_uniform(20, 4).unwrap(), sub.sample_uniform(20, 4).unwrap());
        assert_ne!(sub.sample_uniform(20, 4).unwrap(), sub.sample_uniform(20, 5).unwrap());
        match sub.sample_uniform(37, 0) {
            Err(Error::SampleTooLarge {
                requested,
                available,
            }) => assert_eq!((requested, available), (37, 36)),
            other => panic!("unexpected {other:?}"),
        }
        let msg = sub.sample_uniform(37, 0).unwrap_err().to_string();
        assert!(msg.contains("37") && msg.contains("36"), "{msg}");
    }

    #[test]
    fn materialize_examples() {
        let sub = two_free();
        assert_eq!(sub.materialize(&[1, 3]).unwrap().choices(), &[1, 3, 4]);
        let map = BTreeMap::from([(0, 1), (1, 3)]);
        assert_eq!(sub.materialize_map(&map).unwrap().choices(), &[1, 3, 4]);
        assert!(matches!(
            sub.materialize_map(&BTreeMap::from([(0, 1)])),
            Err(Error::MissingAssignment { .. })
        ));
        assert!(matches!(
            sub.materialize(&[1]),
            Err(Error::MissingAssignment { .. })
        ));
        assert!(matches!(
            sub.materialize(&[1, 6]),
            Err(Error::ChoiceOutOfRange { position: 1, .. })
        ));

        let cell = SuperCell::new(vec![0, 1], vec![vec![2, 5], vec![3, 3]]).unwrap();
        let sub = Subspace::new(spec(3, 6), vec![], BTreeMap::from([(2, 0)]), vec![cell]).unwrap();
        assert_eq!(sub.node_count(), 2);
        assert_eq!(sub.materialize(&[0]).unwrap().choices(), &[2, 5, 0]);
        assert_eq!(sub.materialize(&[1]).unwrap().choices(), &[3, 3, 0]);
        assert!(sub.materialize(&[2]).is_err());
    }

    #[test]
    fn subspace_rejects_bad_partitions() {
        let s = spec(3, 6);
        assert!(Subspace::new(s.clone(), vec![0, 1], BTreeMap::new(), vec![]).is_err());
        assert!(Subspace::new(s.clone(), vec![0, 1], BTreeMap::from([(1, 0), (2, 0)]), vec![]).is_err());
        assert!(Subspace::new(s.clone(), vec![0, 1, 3], BTreeMap::from([(2, 0)]), vec![]).is_err());
        assert!(Subspace::new(s, vec![0, 1], BTreeMap::from([(2, 6)]), vec![]).is_err());
        assert!(SuperCell::new(vec![0, 1], vec![vec![1, 1], vec![1, 1]]).is_err());
        assert!(SuperCell::new(vec![0, 1], vec![vec![1]]).is_err());
        assert!(SuperCell::new(vec![1, 0], vec![vec![1, 1]]).is_err());
    }

    #[test]
    fn node_count_with_super_cells() {
        let s = spec(19, 6);
        let m0 = s.default_initial();
        let seg0: Vec<usize> = (0..7).collect();
        let sub = Subspace::around(&s, &m0, &seg0, vec![]).unwrap();
        assert_eq!(sub.node_count(), 279_936);

        let cands: Vec<Vec<usize>> = (0..6).map(|k| vec![k; 7]).collect();
        let cell = SuperCell::new(seg0, cands).unwrap();
        let seg1: Vec<usize> = (7..13).collect();
        let sub = Subspace::around(&s, &m0, &seg1, vec![cell]).unwrap();
        assert_eq!(sub.node_count(), 6u128.pow(7));
        assert_eq!(sub.fixed().len(), 6);
        assert_eq!(sub.slots()[0], Slot::Super(0));
    }

    #[test]
    fn segment_plans() {
        let plan = make_segment_plan(&spec(19, 6), &[7, 6, 6]).unwrap();
        assert_eq!(plan.segments()[0], (0..7).collect::<Vec<_>>());
        assert_eq!(plan.segments()[1], (7..13).collect::<Vec<_>>());
        assert_eq!(plan.segments()[2], (13..19).collect::<Vec<_>>());
        let covered: Vec<usize> = plan.segments().iter().flatten().copied().collect();
        assert_eq!(covered, (0..19).collect::<Vec<_>>());

        assert_eq!(make_segment_plan(&spec(6, 6), &[6]).unwrap().len(), 1);
        assert!(matches!(
            make_segment_plan(&spec(19, 6), &[7, 7, 6]),
            Err(Error::PlanSizeMismatch { sum: 20, layers: 19 })
        ));
    }

    proptest! {
        #[test]
        fn consecutive_gray_codes_differ_in_one_bit(o in 2usize..64, i in 0usize..63) {
            prop_assume!(i + 1 < o);
            let s = spec(1, o);
            let a = gray_encode(&Architecture::from_choices(vec![i]), &s);
            let b = gray_encode(&Architecture::from_choices(vec![i + 1]), &s);
            let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            prop_assert_eq!(diff, 1);
        }

        #[test]
        fn gray_codes_are_distinct_within_a_layer(o in 2usize..40) {
            let s = spec(1, o);
            let codes: BTreeSet<Vec<u8>> = (0..o)
                .map(|i| gray_encode(&Architecture::from_choices(vec![i]), &s))
                .collect();
            prop_assert_eq!(codes.len(), o);
        }

        #[test]
        fn extract_inverts_materialize(
            digits in proptest::collection::vec(0usize..6, 3),
            k in 1usize..5,
            pick in 0usize..5,
        ) {
            prop_assume!(pick < k);
            let s = spec(6, 6);
            let cands: Vec<Vec<usize>> = (0..k).map(|i| vec![i, (i + 1) % 6]).collect();
            let cell = SuperCell::new(vec![1, 2], cands).unwrap();
            let sub = Subspace::new(
                s, vec![0, 3, 5], BTreeMap::from([(4, 2)]), vec![cell],
            ).unwrap();
            let assignment = vec![digits[0], pick, digits[1], digits[2]];
            let arch = sub.materialize(&assignment).unwrap();
            prop_assert_eq!(sub.extract(&arch).unwrap(), assignment);
        }
    }
}
