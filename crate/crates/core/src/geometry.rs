//! Spatial domains, the Cartesian lattice that discretizes them, and the
//! ε-ball stencils used by the sup/inf and averaging operators.
//!
//! The lattice is origin aligned (`x = i·h` per axis) and stored densely over
//! the bounding box of Ω grown by the collar width `ε + h`. Only interior and
//! collar cells become nodes. Because the lattice is uniform, every interior
//! node sees the same set of stencil offsets, so stencils are stored once as
//! offsets and, for fast summation, as contiguous runs along the last axis.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Relative slack used when comparing lattice distances against ε so that
/// nodes lying exactly on the sphere (up to rounding) are kept.
const TIE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
}

impl DomainSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        DomainSpec::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn cube(lo: &[f64], hi: &[f64]) -> Self {
        DomainSpec::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn annulus(center: &[f64], r_in: f64, r_out: f64) -> Self {
        DomainSpec::Annulus {
            center: center.to_vec(),
            r_in,
            r_out,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { center, .. } | DomainSpec::Annulus { center, .. } => center.len(),
            DomainSpec::Box { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return Err(Error::config("domain.center", "must be a non-empty finite point"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::config("domain.radius", "must be positive"));
                }
            }
            DomainSpec::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || !finite(lo) || !finite(hi) {
                    return Err(Error::config(
                        "domain.lo",
                        "lo and hi must be finite points of the same non-zero dimension",
                    ));
                }
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(Error::config("domain.hi", "need lo < hi on every axis"));
                }
            }
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                if center.is_empty() || !finite(center) {
                    return Err(Error::config("domain.center", "must be a non-empty finite point"));
                }
                if !(r_in.is_finite() && r_out.is_finite() && 0.0 < *r_in && r_in < r_out) {
                    return Err(Error::config("domain.r_in", "need 0 < r_in < r_out"));
                }
            }
        }
        Ok(())
    }

    /// Membership in the open set Ω.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Ball { center, radius } => dist(x, center) < *radius,
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (a, b))| *a < *c && *c < *b),
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = dist(x, center);
                *r_in < r && r < *r_out
            }
        }
    }

    /// Euclidean distance from `x` to the closure of Ω (zero inside).
    pub fn dist_to_domain(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(c, (a, b))| {
                    let e = (a - c).max(c - b).max(0.0);
                    e * e
                })
                .sum::<f64>()
                .sqrt(),
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = dist(x, center);
                (r - r_out).max(r_in - r).max(0.0)
            }
        }
    }

    /// Distance from `x` to ∂Ω, for points inside Ω.
    pub fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, radius } => (radius - dist(x, center)).abs(),
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(c, (a, b))| (c - a).abs().min((b - c).abs()))
                .fold(f64::INFINITY, f64::min),
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = dist(x, center);
                (r - r_in).abs().min((r_out - r).abs())
            }
        }
    }

    /// Axis-aligned bounding box of Ω̄.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainSpec::Box { lo, hi } => (lo.clone(), hi.clone()),
            DomainSpec::Annulus { center, r_out, .. } => (
                center.iter().map(|c| c - r_out).collect(),
                center.iter().map(|c| c + r_out).collect(),
            ),
        }
    }

    /// Unit normal pointing into Ω at a boundary point `y`.
    pub fn inward_normal(&self, y: &[f64]) -> Point {
        match self {
            DomainSpec::Ball { center, .. } => unit(&sub(center, y)),
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = dist(y, center);
                let outward = unit(&sub(y, center));
                if (r - r_in).abs() < (r - r_out).abs() {
                    outward
                } else {
                    outward.iter().map(|c| -c).collect()
                }
            }
            DomainSpec::Box { lo, hi } => {
                let mut best = (f64::INFINITY, 0usize, 1.0);
                for (i, c) in y.iter().enumerate() {
                    let dl = (c - lo[i]).abs();
                    let dh = (hi[i] - c).abs();
                    if dl < best.0 {
                        best = (dl, i, 1.0);
                    }
                    if dh < best.0 {
                        best = (dh, i, -1.0);
                    }
                }
                let mut n: Point = std::iter::repeat(0.0).take(y.len()).collect();
                n[best.1] = best.2;
                n
            }
        }
    }

    pub fn classify(&self, x: &[f64], t: f64) -> PointClass {
        if t <= 0.0 {
            PointClass::TimeExit
        } else if self.contains(x) {
            PointClass::Interior
        } else {
            PointClass::LateralExit
        }
    }
}

/// Where a space-time point sits relative to the parabolic cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Interior,
    LateralExit,
    TimeExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeClass {
    Interior = 0,
    Collar = 1,
}

/// A contiguous run of stencil cells along the last axis: cells
/// `c + base - half ..= c + base + half` for a node at dense cell `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StencilRun {
    pub base: isize,
    pub half: usize,
}

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct SpaceTimeGrid {
    spec: DomainSpec,
    h: f64,
    eps: f64,
    horizon: f64,
    dim: usize,
    shape: Vec<usize>,
    origin: Vec<i64>,
    strides: Vec<usize>,
    cell_node: Vec<u32>,
    node_cell: Vec<usize>,
    coords: Vec<f64>,
    n_interior: usize,
    offsets: Vec<Vec<i64>>,
    offset_deltas: Vec<isize>,
    runs: Vec<StencilRun>,
    times: Vec<f64>,
    clamped: bool,
}

impl SpaceTimeGrid {
    /// Lattice of spacing `h` over Ω plus a collar of width `eps + h`, with
    /// time levels `t_m = m·eps²` up to `horizon` (the last level is clamped
    /// to `horizon` when it is not a multiple of `eps²`).
    pub fn build(spec: DomainSpec, h: f64, eps: f64, horizon: f64) -> Result<Self> {
        spec.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config("h", "spatial spacing must be positive"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::config("eps", "game step must be positive"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config("horizon", "time horizon must be positive"));
        }
        if h > eps / 4.0 * (1.0 + 1e-12) {
            return Err(Error::config(
                "h",
                format!(
                    "stencil resolution requires h <= eps/4, got h/eps = {:.6} > 0.25",
                    h / eps
                ),
            ));
        }
        let dim = spec.dim();
        let width = eps + h;
        let (lo, hi) = spec.bounding_box();
        let mut origin = Vec::with_capacity(dim);
        let mut shape = Vec::with_capacity(dim);
        for axis in 0..dim {
            let a = ((lo[axis] - width) / h).floor() as i64 - 1;
            let b = ((hi[axis] + width) / h).ceil() as i64 + 1;
            origin.push(a);
            shape.push((b - a + 1) as usize);
        }
        let mut strides = vec![1usize; dim];
        for axis in (0..dim.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * shape[axis + 1];
        }
        let cells: usize = shape.iter().product();
        if cells > u32::MAX as usize / 2 {
            return Err(Error::config("h", "lattice too large"));
        }

        let mut interior = Vec::new();
        let mut collar = Vec::new();
        let mut x = vec![0.0; dim];
        for cell in 0..cells {
            let mut rem = cell;
            for axis in 0..dim {
                let i = rem / strides[axis];
                rem %= strides[axis];
                x[axis] = (origin[axis] + i as i64) as f64 * h;
            }
            if spec.contains(&x) {
                interior.push(cell);
            } else if spec.dist_to_domain(&x) < width - TIE_SLACK * h {
                collar.push(cell);
            }
        }
        if interior.is_empty() {
            return Err(Error::config(
                "domain",
                format!("no lattice node of spacing h = {h} falls inside the domain"),
            ));
        }

        let n_interior = interior.len();
        let mut node_cell = interior;
        node_cell.extend(collar);
        let mut cell_node = vec![NO_NODE; cells];
        let mut coords = Vec::with_capacity(node_cell.len() * dim);
        for (node, &cell) in node_cell.iter().enumerate() {
            cell_node[cell] = node as u32;
            let mut rem = cell;
            for axis in 0..dim {
                let i = rem / strides[axis];
                rem %= strides[axis];
                coords.push((origin[axis] + i as i64) as f64 * h);
            }
        }

        let offsets = ball_offsets(dim, eps / h);
        let offset_deltas = offsets
            .iter()
            .map(|o| o.iter().zip(&strides).map(|(d, s)| *d as isize * *s as isize).sum())
            .collect();
        let runs = stencil_runs(&offsets, &strides);

        let steps = horizon / (eps * eps);
        let levels = (steps - 1e-9).ceil().max(1.0) as usize;
        let clamped = (levels as f64 - steps).abs() > 1e-9;
        let mut times: Vec<f64> = (0..=levels).map(|m| m as f64 * eps * eps).collect();
        if clamped {
            times[levels] = horizon;
        }

        Ok(SpaceTimeGrid {
            spec,
            h,
            eps,
            horizon,
            dim,
            shape,
            origin,
            strides,
            cell_node,
            node_cell,
            coords,
            n_interior,
            offsets,
            offset_deltas,
            runs,
            times,
            clamped,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn node_count(&self) -> usize {
        self.node_cell.len()
    }
    pub fn interior_count(&self) -> usize {
        self.n_interior
    }
    pub fn collar_count(&self) -> usize {
        self.node_cell.len() - self.n_interior
    }
    /// Interior nodes are numbered `0..interior_count()`, collar nodes after.
    pub fn class(&self, node: usize) -> NodeClass {
        if node < self.n_interior {
            NodeClass::Interior
        } else {
            NodeClass::Collar
        }
    }
    pub fn coord(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    /// Index of the last time level.
    pub fn levels(&self) -> usize {
        self.times.len() - 1
    }
    pub fn is_clamped(&self) -> bool {
        self.clamped
    }
    pub fn cell_count(&self) -> usize {
        self.cell_node.len()
    }
    pub fn cell_of(&self, node: usize) -> usize {
        self.node_cell[node]
    }
    pub fn node_at_cell(&self, cell: usize) -> Option<usize> {
        match self.cell_node.get(cell) {
            Some(&n) if n != NO_NODE => Some(n as usize),
            _ => None,
        }
    }
    /// Lattice offsets (in units of `h`) of the ε-ball, lexicographically sorted.
    pub fn stencil_offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }
    pub fn stencil_runs(&self) -> &[StencilRun] {
        &self.runs
    }
    pub fn stencil_size(&self) -> usize {
        self.offsets.len()
    }

    /// Nodes `y` of the grid with `|y - x| <= eps` for node `x`. For
    /// interior nodes this is the full offset set.
    pub fn stencil(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let cell = self.node_cell[node] as isize;
        self.offset_deltas.iter().filter_map(move |d| {
            let c = cell + d;
            if c < 0 {
                None
            } else {
                self.node_at_cell(c as usize)
            }
        })
    }

    /// Node sitting exactly at lattice point `x` (up to rounding), if any.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut cell = 0usize;
        for axis in 0..self.dim {
            let i = (x[axis] / self.h).round() as i64 - self.origin[axis];
            if i < 0 || i as usize >= self.shape[axis] {
                return None;
            }
            cell += i as usize * self.strides[axis];
        }
        self.node_at_cell(cell)
    }

    /// Multilinear interpolation weights at `x`: the `2^N` surrounding nodes
    /// and their weights, or `None` when a corner is not a grid node.
    pub fn interpolation_stencil(&self, x: &[f64]) -> Option<smallvec::SmallVec<[(usize, f64); 8]>> {
        let mut base = 0usize;
        let mut frac: smallvec::SmallVec<[f64; 4]> = smallvec::SmallVec::new();
        for axis in 0..self.dim {
            let s = x[axis] / self.h;
            let fl = s.floor();
            let i = fl as i64 - self.origin[axis];
            if i < 0 || (i + 1) as usize >= self.shape[axis] {
                return None;
            }
            base += i as usize * self.strides[axis];
            frac.push(s - fl);
        }
        let mut out = smallvec::SmallVec::new();
        for corner in 0..(1usize << self.dim) {
            let mut cell = base;
            let mut w = 1.0;
            for axis in 0..self.dim {
                if corner >> axis & 1 == 1 {
                    cell += self.strides[axis];
                    w *= frac[axis];
                } else {
                    w *= 1.0 - frac[axis];
                }
            }
            if w == 0.0 {
                continue;
            }
            out.push((self.node_at_cell(cell)?, w));
        }
        Some(out)
    }

    /// Classification of a space-time point against the continuum domain.
    pub fn classify_point(&self, x: &[f64], t: f64) -> PointClass {
        self.spec.classify(x, t)
    }

    pub fn summary(&self) -> GridSummary {
        let mut histogram = BTreeMap::new();
        for node in 0..self.n_interior {
            *histogram.entry(self.stencil(node).count()).or_insert(0usize) += 1;
        }
        let symmetric = self
            .offsets
            .iter()
            .all(|o| self.offsets.binary_search(&o.iter().map(|c| -c).collect()).is_ok());
        GridSummary {
            dim: self.dim,
            h: self.h,
            eps: self.eps,
            horizon: self.horizon,
            levels: self.levels(),
            clamped: self.clamped,
            interior: self.n_interior,
            collar: self.collar_count(),
            stencil_histogram: histogram,
            symmetric_offsets: symmetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub dim: usize,
    pub h: f64,
    pub eps: f64,
    pub horizon: f64,
    pub levels: usize,
    pub clamped: bool,
    pub interior: usize,
    pub collar: usize,
    pub stencil_histogram: BTreeMap<usize, usize>,
    pub symmetric_offsets: bool,
}

impl GridSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dimension        {}", self.dim);
        let _ = writeln!(s, "h                {}", self.h);
        let _ = writeln!(s, "eps              {}", self.eps);
        let _ = writeln!(s, "horizon          {}", self.horizon);
        let _ = writeln!(
            s,
            "time levels      {}{}",
            self.levels + 1,
            if self.clamped { " (top level clamped to horizon)" } else { "" }
        );
        let _ = writeln!(s, "interior nodes   {}", self.interior);
        let _ = writeln!(s, "collar nodes     {}", self.collar);
        let _ = writeln!(s, "symmetric ball   {}", self.symmetric_offsets);
        let _ = writeln!(s, "stencil size histogram (interior nodes):");
        for (size, count) in &self.stencil_histogram {
            let _ = writeln!(s, "  {size:>6} nodes: {count}");
        }
        s
    }
}

/// Integer offsets `d` with `|d| <= radius`, sorted lexicographically.
fn ball_offsets(dim: usize, radius: f64) -> Vec<Vec<i64>> {
    let r = radius.floor() as i64 + 1;
    let limit = radius * radius * (1.0 + TIE_SLACK);
    let mut out = Vec::new();
    let mut cur = vec![-r; dim];
    loop {
        let n2: i64 = cur.iter().map(|c| c * c).sum();
        if (n2 as f64) <= limit {
            out.push(cur.clone());
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                out.sort();
                return out;
            }
            axis -= 1;
            if cur[axis] < r {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -r;
        }
    }
}

/// Groups offsets sharing all but the last coordinate into contiguous runs.
fn stencil_runs(offsets: &[Vec<i64>], strides: &[usize]) -> Vec<StencilRun> {
    let dim = strides.len();
    let mut groups: BTreeMap<Vec<i64>, (i64, i64)> = BTreeMap::new();
    for o in offsets {
        let key = o[..dim - 1].to_vec();
        let last = o[dim - 1];
        let e = groups.entry(key).or_insert((last, last));
        e.0 = e.0.min(last);
        e.1 = e.1.max(last);
    }
    groups
        .into_iter()
        .map(|(key, (a, b))| {
            debug_assert_eq!(a, -b);
            let base = key
                .iter()
                .zip(strides)
                .map(|(d, s)| *d as isize * *s as isize)
                .sum();
            StencilRun {
                base,
                half: b as usize,
            }
        })
        .collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn unit(a: &[f64]) -> Point {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}
