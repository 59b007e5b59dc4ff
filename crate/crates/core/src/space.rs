//! Finite sample spaces, partition sigma-algebras and filtrations.
//!
//! A sigma-algebra on a finite set is generated by its atoms, so it is stored
//! as a partition of point indices. Blocks are kept in canonical order (each
//! block ascending, blocks ordered by smallest element) which makes
//! structural equality coincide with equality of sigma-algebras.

use indexmap::IndexSet;

use crate::error::{Error, Result};

/// An ordered set of distinct point labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSpace {
    points: IndexSet<String>,
}

impl SampleSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut points = IndexSet::new();
        for label in labels {
            let label = label.into();
            if !points.insert(label.clone()) {
                return Err(Error::InvalidSpace(format!("duplicate label `{label}`")));
            }
        }
        if points.is_empty() {
            return Err(Error::InvalidSpace("sample space is empty".into()));
        }
        Ok(SampleSpace { points })
    }

    /// `x1, ..., xn`.
    pub fn indexed(n: usize) -> Self {
        assert!(n >= 1, "sample space needs at least one point");
        SampleSpace {
            points: (1..=n).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.points[i]
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.points.get_index_of(label)
    }

    pub(crate) fn require_same(&self, other: &SampleSpace) -> Result<()> {
        if self != other {
            return Err(Error::SpaceMismatch(format!(
                "sample spaces differ ({} vs {} points)",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

/// A partition of `{0, .., n-1}` into nonempty blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::InvalidPartition(format!("point index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("point {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("point {missing} not covered")));
        }
        Ok(Self::canonical(n, blocks))
    }

    /// Builds a partition from label blocks over `space`.
    pub fn from_labels(space: &SampleSpace, blocks: &[Vec<String>]) -> Result<Self> {
        let mut idx = Vec::with_capacity(blocks.len());
        for block in blocks {
            let mut b = Vec::with_capacity(block.len());
            for label in block {
                b.push(space.index_of(label).ok_or_else(|| {
                    Error::InvalidPartition(format!("unknown label `{label}`"))
                })?);
            }
            idx.push(b);
        }
        Self::from_blocks(space.len(), idx)
    }

    fn canonical(n: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let mut block_of = vec![0; n];
        for (k, b) in blocks.iter().enumerate() {
            for &i in b {
                block_of[i] = k;
            }
        }
        Partition { blocks, block_of }
    }

    /// `{X}`.
    pub fn trivial(n: usize) -> Self {
        Self::canonical(n, vec![(0..n).collect()])
    }

    /// Singletons: the power set.
    pub fn discrete(n: usize) -> Self {
        Self::canonical(n, (0..n).map(|i| vec![i]).collect())
    }

    pub fn n_points(&self) -> usize {
        self.block_of.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks.len() == self.n_points()
    }

    pub fn to_labels(&self, space: &SampleSpace) -> Vec<Vec<String>> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&i| space.label(i).to_string()).collect())
            .collect()
    }

    fn require_same_size(&self, other: &Partition) -> Result<()> {
        if self.n_points() != other.n_points() {
            return Err(Error::SpaceMismatch(format!(
                "partitions of {} and {} points",
                self.n_points(),
                other.n_points()
            )));
        }
        Ok(())
    }

    /// True iff every block of `coarser` is a union of blocks of `self`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.n_points() == coarser.n_points()
            && self.blocks.iter().all(|b| {
                let k = coarser.block_of[b[0]];
                b.iter().all(|&i| coarser.block_of[i] == k)
            })
    }

    /// Coarsest common refinement.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        self.require_same_size(other)?;
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for i in 0..self.n_points() {
            let key = (self.block_of[i], other.block_of[i]);
            let k = *index.entry(key).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[k].push(i);
        }
        Ok(Self::canonical(self.n_points(), blocks))
    }

    /// First pair of points in a common block whose values differ by more than `tol`.
    pub fn measurability_witness<T>(
        &self,
        values: &[T],
        dist: impl Fn(&T, &T) -> f64,
        tol: f64,
    ) -> Option<(usize, usize)> {
        self.blocks.iter().find_map(|b| {
            b[1..]
                .iter()
                .find(|&&i| dist(&values[b[0]], &values[i]) > tol)
                .map(|&i| (b[0], i))
        })
    }
}

/// An increasing finite sequence of partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtration {
    stages: Vec<Partition>,
}

impl Filtration {
    pub fn new(stages: Vec<Partition>) -> Result<Self> {
        let Some(first) = stages.first() else {
            return Err(Error::InvalidFiltration("no stages".into()));
        };
        let n = first.n_points();
        for (j, pair) in stages.windows(2).enumerate() {
            if pair[1].n_points() != n {
                return Err(Error::InvalidFiltration(format!(
                    "stage {} has a different point count",
                    j + 1
                )));
            }
            if !pair[1].refines(&pair[0]) {
                return Err(Error::InvalidFiltration(format!(
                    "stage {} does not refine stage {j}",
                    j + 1
                )));
            }
        }
        Ok(Filtration { stages })
    }

    pub fn from_labels(space: &SampleSpace, stages: &[Vec<Vec<String>>]) -> Result<Self> {
        let parts = stages
            .iter()
            .map(|s| Partition::from_labels(space, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(parts)
    }

    pub fn to_labels(&self, space: &SampleSpace) -> Vec<Vec<Vec<String>>> {
        self.stages.iter().map(|p| p.to_labels(space)).collect()
    }

    pub fn stages(&self) -> &[Partition] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// The sigma-algebra generated by all stages.
    pub fn limit(&self) -> Partition {
        let mut acc = self.stages[0].clone();
        for p in &self.stages[1..] {
            acc = acc.join(p).expect("stages share a point count");
        }
        acc
    }
}
