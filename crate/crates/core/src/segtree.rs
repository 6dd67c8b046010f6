//! Hierarchical change points and quarterly segmentation.
//!
//! A [`SegTree`] is rooted at the full grid. Every node carries a change point
//! local to its rectangle; the nonempty quadrants under that point become the
//! node's children, labelled by appending the quadrant number (1..=4) to the
//! parent's [`HierIndex`]. A node whose change point is the double boundary
//! has no children, and the leaves partition the grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{algorithm2, coarse_init, ThresholdConfig};
use crate::grid::{ChangePoint, DataGrid, GridDims, Quadrant};
use crate::numeric::KahanSum;

/// Base-4 hierarchical index `(i_1, ..., i_l)`, each digit in `1..=4`. The
/// empty index is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct HierIndex(Vec<u8>);

impl HierIndex {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if digits.iter().any(|d| !(1..=4).contains(d)) {
            return Err(Error::invalid(format!("hierarchical digits must be in 1..=4, got {digits:?}")));
        }
        Ok(Self(digits))
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn child(&self, q: Quadrant) -> Self {
        let mut d = self.0.clone();
        d.push(q.number() as u8);
        Self(d)
    }

    pub fn parent(&self) -> Option<Self> {
        let (_, head) = self.0.split_last()?;
        Some(Self(head.to_vec()))
    }
}

impl Ord for HierIndex {
    /// Breadth-first: by level, then lexicographically.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.level().cmp(&other.level()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for HierIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for HierIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for HierIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| Error::Parse(format!("bad index `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(digits)
    }
}

impl Serialize for HierIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HierIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Maps `m in 1..=4^level` to the level-`level` index whose digits are the
/// big-endian base-4 expansion of `m - 1`, each shifted up by one.
pub fn index_finder(level: usize, m: usize) -> Result<HierIndex> {
    if level == 0 {
        return Err(Error::invalid("level must be at least 1"));
    }
    let count = 4usize
        .checked_pow(level as u32)
        .ok_or_else(|| Error::invalid(format!("level {level} is too deep")))?;
    if m == 0 || m > count {
        return Err(Error::invalid(format!("m = {m} is outside 1..={count}")));
    }
    let mut rest = m - 1;
    let mut digits = vec![0u8; level];
    for d in digits.iter_mut().rev() {
        *d = (rest % 4) as u8 + 1;
        rest /= 4;
    }
    Ok(HierIndex(digits))
}

/// Inverse of [`index_finder`]: returns `(level, m)`.
pub fn index_position(index: &HierIndex) -> (usize, usize) {
    let m = index.0.iter().fold(0usize, |acc, d| acc * 4 + (*d as usize - 1));
    (index.level(), m + 1)
}

/// Inclusive 1-based rectangle `[w_lo, w_hi] x [h_lo, h_hi]` in grid
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub w_lo: usize,
    pub w_hi: usize,
    pub h_lo: usize,
    pub h_hi: usize,
}

impl Rect {
    pub fn full(dims: GridDims) -> Self {
        Self {
            w_lo: 1,
            w_hi: dims.tw,
            h_lo: 1,
            h_hi: dims.th,
        }
    }

    pub fn width(&self) -> usize {
        self.w_hi + 1 - self.w_lo
    }

    pub fn height(&self) -> usize {
        self.h_hi + 1 - self.h_lo
    }

    pub fn cells(&self) -> usize {
        self.width() * self.height()
    }

    pub fn local_dims(&self) -> GridDims {
        GridDims::new(self.width(), self.height())
    }

    pub fn contains(&self, w: usize, h: usize) -> bool {
        (self.w_lo..=self.w_hi).contains(&w) && (self.h_lo..=self.h_hi).contains(&h)
    }

    /// Global coordinates of a change point local to this rectangle.
    pub fn to_global(&self, cp: ChangePoint) -> ChangePoint {
        ChangePoint {
            tau_w: self.w_lo - 1 + cp.tau_w,
            tau_h: self.h_lo - 1 + cp.tau_h,
        }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.w_lo, self.w_hi, self.h_lo, self.h_hi]
    }
}

/// Splits `domain` by a change point local to it. Entry `j` is quadrant
/// `Q_{j+1}`, or `None` when that quadrant is empty.
pub fn child_domains(domain: Rect, cp: ChangePoint) -> Result<[Option<Rect>; 4]> {
    cp.check(domain.local_dims())?;
    let w_mid = domain.w_lo - 1 + cp.tau_w;
    let h_mid = domain.h_lo - 1 + cp.tau_h;
    let rect = |w_lo: usize, w_hi: usize, h_lo: usize, h_hi: usize| {
        (w_lo <= w_hi && h_lo <= h_hi).then_some(Rect { w_lo, w_hi, h_lo, h_hi })
    };
    Ok([
        rect(w_mid + 1, domain.w_hi, h_mid + 1, domain.h_hi),
        rect(domain.w_lo, w_mid, h_mid + 1, domain.h_hi),
        rect(domain.w_lo, w_mid, domain.h_lo, h_mid),
        rect(w_mid + 1, domain.w_hi, domain.h_lo, h_mid),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegNode {
    pub domain: Rect,
    /// Change point in the rectangle's local coordinates; the double
    /// boundary for leaves.
    pub cp: ChangePoint,
    pub children: Vec<HierIndex>,
}

impl SegNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn global_cp(&self) -> ChangePoint {
        self.domain.to_global(self.cp)
    }

    /// Whether the node splits its rectangle on at least one axis.
    pub fn has_change(&self) -> bool {
        !self.cp.is_double_boundary(self.domain.local_dims())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegTree {
    dims: GridDims,
    nodes: BTreeMap<HierIndex, SegNode>,
}

impl SegTree {
    /// Single-leaf tree over the whole grid.
    pub fn leaf(dims: GridDims) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(
            HierIndex::root(),
            SegNode {
                domain: Rect::full(dims),
                cp: ChangePoint::boundary(dims),
                children: Vec::new(),
            },
        );
        Self { dims, nodes }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn nodes(&self) -> &BTreeMap<HierIndex, SegNode> {
        &self.nodes
    }

    pub fn node(&self, index: &HierIndex) -> Option<&SegNode> {
        self.nodes.get(index)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&HierIndex, &SegNode)> {
        self.nodes.iter().filter(|(_, n)| n.is_leaf())
    }

    /// Assigns `cp` (local to the node's rectangle) to a current leaf and
    /// creates its nonempty children as new leaves.
    pub fn split(&mut self, index: &HierIndex, cp: ChangePoint) -> Result<Vec<HierIndex>> {
        let node = self
            .nodes
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no node `{index}`")))?;
        if !node.is_leaf() {
            return Err(Error::invalid(format!("node `{index}` is already split")));
        }
        let domain = node.domain;
        let children = if cp.is_double_boundary(domain.local_dims()) {
            cp.check(domain.local_dims())?;
            Vec::new()
        } else {
            let rects = child_domains(domain, cp)?;
            let mut kids = Vec::new();
            for q in Quadrant::ALL {
                if let Some(r) = rects[q.index()] {
                    let child = index.child(q);
                    self.nodes.insert(
                        child.clone(),
                        SegNode {
                            domain: r,
                            cp: ChangePoint::boundary(r.local_dims()),
                            children: Vec::new(),
                        },
                    );
                    kids.push(child);
                }
            }
            kids
        };
        let node = self.nodes.get_mut(index).expect("checked above");
        node.cp = cp;
        node.children = children.clone();
        Ok(children)
    }

    /// Checks every structural invariant; used on deserialised trees.
    pub fn validate(&self) -> Result<()> {
        let root = self
            .nodes
            .get(&HierIndex::root())
            .ok_or_else(|| Error::invalid("tree has no root"))?;
        if root.domain != Rect::full(self.dims) {
            return Err(Error::invalid("root domain is not the full grid"));
        }
        for (idx, node) in &self.nodes {
            node.cp.check(node.domain.local_dims())?;
            if node.is_leaf() {
                continue;
            }
            let rects = child_domains(node.domain, node.cp)?;
            let expected: Vec<HierIndex> = Quadrant::ALL
                .iter()
                .filter(|q| rects[q.index()].is_some())
                .map(|q| idx.child(*q))
                .collect();
            if expected != node.children || !node.has_change() {
                return Err(Error::invalid(format!("children of node `{idx}` do not match its change point")));
            }
            for c in &node.children {
                let child = self
                    .nodes
                    .get(c)
                    .ok_or_else(|| Error::invalid(format!("missing child `{c}`")))?;
                let q = *c.digits().last().expect("child has a digit") as usize;
                if Some(child.domain) != rects[q - 1] {
                    return Err(Error::invalid(format!("domain of `{c}` does not match its parent split")));
                }
            }
        }
        for idx in self.nodes.keys() {
            if let Some(parent) = idx.parent() {
                if !self.nodes.get(&parent).is_some_and(|p| p.children.contains(idx)) {
                    return Err(Error::invalid(format!("node `{idx}` is detached from its parent")));
                }
            }
        }
        let mut cover = vec![0u8; self.dims.cells()];
        for (_, leaf) in self.leaves() {
            for w in leaf.domain.w_lo..=leaf.domain.w_hi {
                for h in leaf.domain.h_lo..=leaf.domain.h_hi {
                    cover[(w - 1) * self.dims.th + (h - 1)] += 1;
                }
            }
        }
        if cover.iter().any(|c| *c != 1) {
            return Err(Error::invalid("leaf domains do not partition the grid"));
        }
        Ok(())
    }
}

/// Settings for [`quarterly_segmentation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub threshold: ThresholdConfig,
    pub c_bic: f64,
    /// Rectangles with fewer cells are leaves without estimation.
    pub min_cells: usize,
    /// Deepest level at which change points are estimated (root = 0).
    pub max_level: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            threshold: ThresholdConfig::default(),
            c_bic: 1.0,
            min_cells: 16,
            max_level: 20,
        }
    }
}

/// Recursive quarterly segmentation.
///
/// The root rectangle is estimated with boundary selection from a coarse
/// start; then, level by level, every new child rectangle with at least
/// `min_cells` cells (and at least 4 cells per axis, so the coarse start
/// exists) is estimated on its own sub-grid. Recursion stops when a level
/// adds no change point or `max_level` is reached. Rectangles at one level
/// are independent and estimated in parallel.
pub fn quarterly_segmentation(grid: &DataGrid, config: &SegmentationConfig) -> Result<SegTree> {
    use rayon::prelude::*;

    config.threshold.validate()?;
    if config.max_level == 0 {
        return Err(Error::invalid("max_level must be at least 1"));
    }
    let mut tree = SegTree::leaf(grid.dims());
    let mut frontier = vec![HierIndex::root()];
    let mut level = 0;
    while !frontier.is_empty() && level <= config.max_level {
        let work: Vec<(HierIndex, Rect)> = frontier
            .iter()
            .map(|i| (i.clone(), tree.nodes[i].domain))
            .filter(|(_, r)| r.cells() >= config.min_cells && r.width() >= 4 && r.height() >= 4)
            .collect();
        let found = work
            .par_iter()
            .map(|(idx, r)| estimate_rect(grid, *r, config).map(|cp| (idx.clone(), cp)))
            .collect::<Result<Vec<_>>>()?;

        let mut next = Vec::new();
        for (idx, cp) in found {
            next.extend(tree.split(&idx, cp)?);
        }
        frontier = next;
        level += 1;
    }
    Ok(tree)
}

fn estimate_rect(grid: &DataGrid, r: Rect, config: &SegmentationConfig) -> Result<ChangePoint> {
    let sub = grid.subgrid(r.w_lo, r.w_hi, r.h_lo, r.h_hi)?;
    let init = coarse_init(&sub, &config.threshold)?;
    Ok(algorithm2(&sub, init, &config.threshold, config.c_bic)?.final_cp)
}

/// Replaces every cell by the sample mean of the leaf rectangle holding it.
pub fn reconstruct_means(grid: &DataGrid, tree: &SegTree) -> Result<DataGrid> {
    if tree.dims() != grid.dims() {
        return Err(Error::invalid("tree and grid dimensions differ"));
    }
    tree.validate()?;
    let p = grid.p();
    let mut out = grid.clone();
    for (_, leaf) in tree.leaves() {
        let d = leaf.domain;
        let mut acc = vec![KahanSum::new(); p];
        for w in d.w_lo..=d.w_hi {
            for h in d.h_lo..=d.h_hi {
                for (a, v) in acc.iter_mut().zip(grid.at(w, h)) {
                    a.add(*v);
                }
            }
        }
        let mean: Vec<f64> = acc.iter().map(|a| a.value() / d.cells() as f64).collect();
        for w in d.w_lo..=d.w_hi {
            for h in d.h_lo..=d.h_hi {
                out.at_mut(w, h).copy_from_slice(&mean);
            }
        }
    }
    Ok(out)
}

/// One serialised tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub index: HierIndex,
    /// `[w_lo, w_hi, h_lo, h_hi]`
    pub domain: [usize; 4],
    /// `[tau_w, tau_h]` in global coordinates.
    pub cp: [usize; 2],
    pub is_leaf: bool,
}

/// Counts reported for a segmentation, plus the node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub schema: String,
    pub tw: usize,
    pub th: usize,
    /// Deepest level of any node (root = 0).
    pub depth: usize,
    /// Deepest level holding a change point; `None` without any change.
    pub hierarchy_level: Option<usize>,
    pub change_points: usize,
    pub partitions: usize,
    pub nodes: Vec<NodeRecord>,
}

pub fn tree_report(tree: &SegTree) -> TreeReport {
    let nodes: Vec<NodeRecord> = tree
        .nodes()
        .iter()
        .map(|(i, n)| {
            let g = n.global_cp();
            NodeRecord {
                index: i.clone(),
                domain: n.domain.as_array(),
                cp: [g.tau_w, g.tau_h],
                is_leaf: n.is_leaf(),
            }
        })
        .collect();
    TreeReport {
        schema: crate::SCHEMA.to_string(),
        tw: tree.dims().tw,
        th: tree.dims().th,
        depth: tree.nodes().keys().map(HierIndex::level).max().unwrap_or(0),
        hierarchy_level: tree
            .nodes()
            .iter()
            .filter(|(_, n)| n.has_change())
            .map(|(i, _)| i.level())
            .max(),
        change_points: tree.nodes().values().filter(|n| n.has_change()).count(),
        partitions: tree.leaves().count(),
        nodes,
    }
}

impl TreeReport {
    /// Rebuilds and validates the tree described by this report.
    pub fn to_tree(&self) -> Result<SegTree> {
        let dims = GridDims::new(self.tw, self.th);
        let mut tree = SegTree::leaf(dims);
        let mut records: Vec<&NodeRecord> = self.nodes.iter().collect();
        records.sort_by(|a, b| a.index.cmp(&b.index));
        for rec in records {
            if rec.is_leaf {
                continue;
            }
            let node = tree
                .node(&rec.index)
                .ok_or_else(|| Error::Parse(format!("node `{}` has no parent split", rec.index)))?;
            let d = node.domain;
            if d.as_array() != rec.domain || rec.cp[0] < d.w_lo || rec.cp[1] < d.h_lo {
                return Err(Error::Parse(format!("inconsistent record for node `{}`", rec.index)));
            }
            let local = ChangePoint {
                tau_w: rec.cp[0] + 1 - d.w_lo,
                tau_h: rec.cp[1] + 1 - d.h_lo,
            };
            tree.split(&rec.index, local)?;
        }
        if tree.nodes().len() != self.nodes.len() {
            return Err(Error::Parse("node list does not describe a tree".into()));
        }
        tree.validate()?;
        Ok(tree)
    }
}
