//! On-disk formats: the binary field pack, per-level CSVs, result tables
//! and JSONL traces.
//!
//! Field pack layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "TOWPDE1\0"
//! N        u32
//! h, eps, K, T, C   f64 × 5
//! M        u64      index of the last level
//! nodes    u64
//! coords   f64 × nodes·N
//! times    f64 × (M+1)
//! classes  u8  × nodes      (0 interior, 1 collar)
//! then per level 0..=M: u block (f64 × nodes), v block (f64 × nodes)
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::analysis::{ConvergenceTable, ResidualReport};
use crate::dpp::ValuePair;
use crate::error::{Error, Result};
use crate::game::{Estimate, GameState, TraceRecord};
use crate::geometry::{NodeClass, SpaceTimeGrid};

pub const MAGIC: &[u8; 8] = b"TOWPDE1\0";
const HEADER_LEN: u64 = 8 + 4 + 5 * 8 + 8 + 8;

/// Contents of a field pack.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPack {
    pub dim: usize,
    pub h: f64,
    pub eps: f64,
    pub k: f64,
    pub horizon: f64,
    pub bound: f64,
    pub coords: Vec<f64>,
    pub times: Vec<f64>,
    pub classes: Vec<u8>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl FieldPack {
    pub fn from_pair(pair: &ValuePair, grid: &SpaceTimeGrid) -> Self {
        FieldPack {
            dim: grid.dim(),
            h: pair.h,
            eps: pair.eps,
            k: pair.k,
            horizon: grid.horizon(),
            bound: pair.bound,
            coords: grid.coords().to_vec(),
            times: pair.times.clone(),
            classes: (0..grid.node_count()).map(|n| grid.class(n) as u8).collect(),
            u: pair.u.clone(),
            v: pair.v.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.classes.len()
    }

    /// The fields as a [`ValuePair`] (without solver diagnostics).
    pub fn into_pair(self) -> ValuePair {
        ValuePair {
            u: self.u,
            v: self.v,
            eps: self.eps,
            h: self.h,
            k: self.k,
            times: self.times,
            bound: self.bound,
            slices: Vec::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let nodes = self.node_count();
        let mut out = Vec::with_capacity(expected_len(self.dim as u64, self.times.len() as u64 - 1, nodes as u64) as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in [self.h, self.eps, self.k, self.horizon, self.bound] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&((self.times.len() - 1) as u64).to_le_bytes());
        out.extend_from_slice(&(nodes as u64).to_le_bytes());
        let floats = |out: &mut Vec<u8>, xs: &[f64]| {
            for x in xs {
                out.extend_from_slice(&x.to_le_bytes());
            }
        };
        floats(&mut out, &self.coords);
        floats(&mut out, &self.times);
        out.extend_from_slice(&self.classes);
        for (u, v) in self.u.iter().zip(&self.v) {
            floats(&mut out, u);
            floats(&mut out, v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, at: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            if magic.starts_with(b"TOWPDE") {
                return Err(r.error(0, "unsupported field pack version"));
            }
            return Err(r.error(0, "bad magic, not a field pack"));
        }
        let dim = r.u32()? as u64;
        let h = r.f64()?;
        let eps = r.f64()?;
        let k = r.f64()?;
        let horizon = r.f64()?;
        let bound = r.f64()?;
        let m = r.u64()?;
        let nodes = r.u64()?;
        if dim == 0 {
            return Err(r.error(8, "dimension must be positive"));
        }
        let want = expected_len(dim, m, nodes);
        if want != bytes.len() as u64 {
            return Err(r.error(
                bytes.len() as u64,
                &format!("size mismatch: header implies {want} bytes, file has {}", bytes.len()),
            ));
        }
        let (dim, m, nodes) = (dim as usize, m as usize, nodes as usize);
        let coords = r.f64s(nodes * dim)?;
        let times = r.f64s(m + 1)?;
        let classes = r.take(nodes)?.to_vec();
        if let Some(i) = classes.iter().position(|&c| c > 1) {
            return Err(r.error(r.at - nodes as u64 + i as u64, "node class must be 0 or 1"));
        }
        let mut u = Vec::with_capacity(m + 1);
        let mut v = Vec::with_capacity(m + 1);
        for _ in 0..=m {
            u.push(r.f64s(nodes)?);
            v.push(r.f64s(nodes)?);
        }
        Ok(FieldPack {
            dim,
            h,
            eps,
            k,
            horizon,
            bound,
            coords,
            times,
            classes,
            u,
            v,
        })
    }
}

fn expected_len(dim: u64, m: u64, nodes: u64) -> u64 {
    let levels = m.saturating_add(1);
    HEADER_LEN
        .saturating_add(nodes.saturating_mul(dim).saturating_mul(8))
        .saturating_add(levels.saturating_mul(8))
        .saturating_add(nodes)
        .saturating_add(levels.saturating_mul(nodes).saturating_mul(16))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: u64,
}

impl<'a> Cursor<'a> {
    fn error(&self, offset: u64, message: &str) -> Error {
        Error::Format {
            offset,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let start = self.at as usize;
        if self.bytes.len() < start + n {
            return Err(self.error(self.bytes.len() as u64, &format!("truncated: needed {n} bytes at offset {start}")));
        }
        self.at += n as u64;
        Ok(&self.bytes[start..start + n])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn write_field_pack(pair: &ValuePair, grid: &SpaceTimeGrid, path: &Path) -> Result<()> {
    let bytes = FieldPack::from_pair(pair, grid).to_bytes();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_field_pack(path: &Path) -> Result<FieldPack> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    FieldPack::from_bytes(&bytes)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn axis_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// One CSV per level: `level_0000.csv`, ... with columns
/// `x1..xN, class, u, v`.
pub fn write_level_csvs(pair: &ValuePair, grid: &SpaceTimeGrid, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for m in 0..pair.u.len() {
        let path = dir.join(format!("level_{m:04}.csv"));
        let mut w = csv_writer(&path)?;
        let mut header = axis_names(grid.dim());
        header.extend(["class", "u", "v"].map(String::from));
        w.write_record(&header).map_err(|e| csv_err(&path, e))?;
        for n in 0..grid.node_count() {
            let mut row: Vec<String> = grid.coord(n).iter().map(|x| x.to_string()).collect();
            row.push(match grid.class(n) {
                NodeClass::Interior => "interior".into(),
                NodeClass::Collar => "collar".into(),
            });
            row.push(pair.u[m][n].to_string());
            row.push(pair.v[m][n].to_string());
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// One row per start state.
pub fn write_estimates_csv(rows: &[(GameState, Estimate)], path: &Path) -> Result<()> {
    let dim = rows.first().map_or(0, |(s, _)| s.x.len());
    let mut w = csv_writer(path)?;
    let mut header = axis_names(dim);
    header.extend(
        [
            "t",
            "board",
            "mean",
            "stderr",
            "n",
            "mean_steps",
            "stderr_steps",
            "lateral_exits",
            "time_exits",
            "exits_on_board_two",
            "min_payoff",
            "max_payoff",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (s, e) in rows {
        let mut row: Vec<String> = s.x.iter().map(|x| x.to_string()).collect();
        row.extend([
            s.t.to_string(),
            s.board.index().to_string(),
            e.mean.to_string(),
            e.stderr.to_string(),
            e.n.to_string(),
            e.mean_steps.to_string(),
            e.stderr_steps.to_string(),
            e.lateral_exits.to_string(),
            e.time_exits.to_string(),
            e.exits_on_board_two.to_string(),
            e.min_payoff.to_string(),
            e.max_payoff.to_string(),
        ]);
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns `level, t, x1..xN, parabolic, elliptic`; masked parabolic
/// entries are empty.
pub fn write_residuals_csv(report: &ResidualReport, grid: &SpaceTimeGrid, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["level".to_string(), "t".to_string()];
    header.extend(axis_names(grid.dim()));
    header.extend(["parabolic", "elliptic"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for p in &report.points {
        let mut row = vec![p.level.to_string(), grid.times()[p.level].to_string()];
        row.extend(grid.coord(p.node).iter().map(|x| x.to_string()));
        row.push(p.parabolic.map_or(String::new(), |x| x.to_string()));
        row.push(p.elliptic.to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Wall time is left out so reruns produce identical files; it goes in
/// the run report instead.
pub fn write_convergence_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "eps",
        "h",
        "levels",
        "interior_nodes",
        "iterations",
        "dist_to_reference",
        "dist_to_next",
        "parabolic_sup",
        "parabolic_mean",
        "elliptic_sup",
        "elliptic_mean",
        "masked_fraction",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in &table.rows {
        w.write_record([
            r.eps.to_string(),
            r.h.to_string(),
            r.levels.to_string(),
            r.interior_nodes.to_string(),
            r.iterations.to_string(),
            r.dist_to_reference.to_string(),
            r.dist_to_next.map_or(String::new(), |d| d.to_string()),
            r.parabolic.sup.to_string(),
            r.parabolic.mean.to_string(),
            r.elliptic.sup.to_string(),
            r.elliptic.mean.to_string(),
            r.masked_fraction.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_traces_jsonl(records: &[TraceRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataFn, ProblemData};
    use crate::dpp::{solve_dpp, SolverOptions};
    use crate::geometry::DomainSpec;

    fn solved() -> (ValuePair, SpaceTimeGrid) {
        let domain = DomainSpec::ball(&[0.0, 0.0], 0.5);
        let data = ProblemData::uniform(domain.clone(), DataFn::bump(&[0.1, 0.0], 0.4, 1.0), 0.2, 0.12);
        let grid = SpaceTimeGrid::build(domain, 0.05, 0.2, 0.12).unwrap();
        (solve_dpp(&data, &grid, &SolverOptions::default()).unwrap(), grid)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (pair, grid) = solved();
        let pack = FieldPack::from_pair(&pair, &grid);
        let back = FieldPack::from_bytes(&pack.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), pack.to_bytes());
        for (a, b) in pair.u.iter().flatten().zip(back.u.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let restored = back.into_pair();
        assert_eq!(restored.v, pair.v);
        assert_eq!(restored.times, pair.times);
    }

    #[test]
    fn truncation_is_a_size_mismatch() {
        let (pair, grid) = solved();
        let bytes = FieldPack::from_pair(&pair, &grid).to_bytes();
        let err = FieldPack::from_bytes(&bytes[..bytes.len() - 8]).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, bytes.len() as u64 - 8);
                assert!(message.contains("size mismatch"));
            }
            e => panic!("{e:?}"),
        }
        let err = FieldPack::from_bytes(&bytes[..20]).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 20, .. }));
    }

    #[test]
    fn bad_magic_and_version() {
        let (pair, grid) = solved();
        let mut bytes = FieldPack::from_pair(&pair, &grid).to_bytes();
        bytes[6] = b'2';
        assert!(FieldPack::from_bytes(&bytes).unwrap_err().to_string().contains("version"));
        bytes[0] = b'X';
        assert!(matches!(FieldPack::from_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn single_level_pack() {
        let pack = FieldPack {
            dim: 1,
            h: 0.1,
            eps: 0.4,
            k: 1.0,
            horizon: 0.16,
            bound: 1.0,
            coords: vec![-0.1, 0.0, 0.1],
            times: vec![0.0],
            classes: vec![1, 0, 1],
            u: vec![vec![1.0, 2.0, 3.0]],
            v: vec![vec![1.0, 2.0, 3.0]],
        };
        let bytes = pack.to_bytes();
        assert_eq!(bytes.len() as u64, expected_len(1, 0, 3));
        assert_eq!(FieldPack::from_bytes(&bytes).unwrap(), pack);
    }

    #[test]
    fn files_on_disk() {
        let (pair, grid) = solved();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.pack");
        write_field_pack(&pair, &grid, &path).unwrap();
        assert_eq!(read_field_pack(&path).unwrap().u, pair.u);
        let csvs = write_level_csvs(&pair, &grid, dir.path()).unwrap();
        assert_eq!(csvs.len(), pair.u.len());
        let text = std::fs::read_to_string(&csvs[1]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,class,u,v");
        assert_eq!(lines.count(), grid.node_count());
        assert!(matches!(read_field_pack(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
