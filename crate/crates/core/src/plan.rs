//! Two-district plans and the `.pbm1` plan-list format.
//!
//! A `.pbm1` file starts with `#pbm1 n=<n> graph=<id>` and then holds one
//! plan per line: the set of district-0 units as a bitmask (bit `i` is unit
//! `i`), written as exactly `ceil(n/4)` lowercase hex digits, most
//! significant digit first.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::graph::DualGraph;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("plan file is for n={file_n} graph={file_graph}, expected n={n} graph={graph}")]
    GraphMismatch {
        file_n: usize,
        file_graph: String,
        n: usize,
        graph: String,
    },
    #[error("plan is not a valid contiguous bipartition of this graph")]
    Invalid,
}

/// Bipartition of graph nodes. Bit `i` is the district (0 or 1) of unit `i`.
///
/// Plans produced by enumeration and sampling are canonical: unit 0 is in
/// district 0. Arbitrary orientations can still be constructed; use
/// [`Plan::canonical`] before comparing plans for identity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plan {
    n: usize,
    words: Box<[u64]>,
}

impl Plan {
    /// Plan with every unit in district 0.
    pub fn empty(n: usize) -> Self {
        Plan {
            n,
            words: vec![0; n.div_ceil(64).max(1)].into_boxed_slice(),
        }
    }

    pub fn from_districts(districts: &[u8]) -> Self {
        let mut p = Plan::empty(districts.len());
        for (i, &d) in districts.iter().enumerate() {
            if d != 0 {
                p.set(i, 1);
            }
        }
        p
    }

    /// Plan whose district 1 is exactly `members`.
    pub fn from_district1(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Plan::empty(n);
        for i in members {
            p.set(i, 1);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn district(&self, i: usize) -> u8 {
        ((self.words[i / 64] >> (i % 64)) & 1) as u8
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, d: u8) {
        let mask = 1u64 << (i % 64);
        if d == 0 {
            self.words[i / 64] &= !mask;
        } else {
            self.words[i / 64] |= mask;
        }
    }

    pub fn districts(&self) -> Vec<u8> {
        (0..self.n).map(|i| self.district(i)).collect()
    }

    pub fn members(&self, district: u8) -> Vec<usize> {
        (0..self.n).filter(|&i| self.district(i) == district).collect()
    }

    pub fn size(&self, district: u8) -> usize {
        let ones: usize = self.words.iter().map(|w| w.count_ones() as usize).sum();
        if district == 1 {
            ones
        } else {
            self.n - ones
        }
    }

    /// Same partition with the district labels swapped.
    pub fn flipped(&self) -> Self {
        let mut p = self.clone();
        for (i, w) in p.words.iter_mut().enumerate() {
            *w = !*w;
            let hi = self.n.saturating_sub(i * 64);
            if hi < 64 {
                *w &= (1u64 << hi) - 1;
            }
        }
        p
    }

    pub fn is_canonical(&self) -> bool {
        self.n == 0 || self.district(0) == 0
    }

    pub fn canonical(&self) -> Self {
        if self.is_canonical() {
            self.clone()
        } else {
            self.flipped()
        }
    }

    /// Both districts non-empty and each induces a connected subgraph.
    pub fn is_valid_for(&self, g: &DualGraph) -> bool {
        self.n == g.n()
            && self.size(0) > 0
            && self.size(1) > 0
            && district_connected(g, self, 0)
            && district_connected(g, self, 1)
    }

    /// Hex bitmask of district-0 units, `ceil(n/4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.n.div_ceil(4).max(1);
        let d0 = self.flipped();
        let mut s = String::with_capacity(digits);
        for k in (0..digits).rev() {
            let bit = 4 * k;
            let nibble = (d0.words[bit / 64] >> (bit % 64)) & 0xf;
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }

    pub fn from_hex(n: usize, hex: &str) -> Option<Self> {
        let digits = n.div_ceil(4).max(1);
        if hex.len() != digits {
            return None;
        }
        let mut d0 = Plan::empty(n);
        for (k, ch) in hex.chars().rev().enumerate() {
            let nibble = ch.to_digit(16)? as u64;
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let i = 4 * k + b;
                    if i >= n {
                        return None;
                    }
                    d0.set(i, 1);
                }
            }
        }
        Some(d0.flipped())
    }
}

impl fmt::Debug for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Plan(")?;
        for i in 0..self.n {
            write!(f, "{}", self.district(i))?;
        }
        write!(f, ")")
    }
}

fn district_connected(g: &DualGraph, p: &Plan, d: u8) -> bool {
    let Some(start) = (0..p.n).find(|&i| p.district(i) == d) else {
        return false;
    };
    let mut seen = vec![false; p.n];
    seen[start] = true;
    let mut count = 1;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if !seen[w] && p.district(w) == d {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == p.size(d)
}

/// Serialised as its `.pbm1` hex mask.
impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

pub fn pbm1_header(n: usize, graph_id: &str) -> String {
    format!("#pbm1 n={n} graph={graph_id}")
}

/// Streaming `.pbm1` writer.
pub struct Pbm1Writer<W: Write> {
    out: W,
    n: usize,
    written: u64,
}

impl<W: Write> Pbm1Writer<W> {
    pub fn new(mut out: W, n: usize, graph_id: &str) -> std::io::Result<Self> {
        writeln!(out, "{}", pbm1_header(n, graph_id))?;
        Ok(Pbm1Writer { out, n, written: 0 })
    }

    pub fn write(&mut self, plan: &Plan) -> std::io::Result<()> {
        debug_assert_eq!(plan.n(), self.n);
        writeln!(self.out, "{}", plan.to_hex())?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parsed `.pbm1` contents.
#[derive(Clone, Debug)]
pub struct PlanFile {
    pub n: usize,
    pub graph_id: String,
    pub plans: Vec<Plan>,
}

pub fn read_pbm1<R: BufRead>(reader: R) -> Result<PlanFile, PlanError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or(PlanError::Format {
        line: 1,
        reason: "missing header".into(),
    })?;
    let bad_header = || PlanError::Format {
        line: 1,
        reason: format!("expected `#pbm1 n=<n> graph=<id>`, got `{header}`"),
    };
    let mut parts = header.split_whitespace();
    if parts.next() != Some("#pbm1") {
        return Err(bad_header());
    }
    let n: usize = parts
        .next()
        .and_then(|s| s.strip_prefix("n="))
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad_header)?;
    let graph_id = parts
        .next()
        .and_then(|s| s.strip_prefix("graph="))
        .ok_or_else(bad_header)?
        .to_string();

    let mut plans = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let plan = Plan::from_hex(n, line).ok_or_else(|| PlanError::Format {
            line: i + 2,
            reason: format!("bad plan mask `{line}`"),
        })?;
        plans.push(plan);
    }
    Ok(PlanFile { n, graph_id, plans })
}

impl PlanFile {
    /// Checks the file belongs to `g` and every plan is a valid bipartition.
    pub fn validate_against(&self, g: &DualGraph) -> Result<(), PlanError> {
        if self.n != g.n() || self.graph_id != g.id() {
            return Err(PlanError::GraphMismatch {
                file_n: self.n,
                file_graph: self.graph_id.clone(),
                n: g.n(),
                graph: g.id().to_string(),
            });
        }
        if self.plans.iter().all(|p| p.is_valid_for(g)) {
            Ok(())
        } else {
            Err(PlanError::Invalid)
        }
    }
}

/// Reads a `unit_id,district` assignment table (districts 0/1, or any two
/// distinct labels; the label of the first row becomes district 0 before
/// canonicalisation).
pub fn read_assignment_csv<R: std::io::Read>(g: &DualGraph, reader: R) -> Result<Plan, PlanError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let fmt_err = |line: usize, reason: String| PlanError::Format { line, reason };
    let headers = rdr
        .headers()
        .map_err(|e| fmt_err(1, e.to_string()))?
        .clone();
    let uid = headers
        .iter()
        .position(|h| h == "unit_id")
        .ok_or_else(|| fmt_err(1, "missing column `unit_id`".into()))?;
    let dcol = headers
        .iter()
        .position(|h| h == "district")
        .ok_or_else(|| fmt_err(1, "missing column `district`".into()))?;
    let mut labels: Vec<String> = Vec::new();
    let mut assigned = vec![None; g.n()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt_err(i + 2, e.to_string()))?;
        let unit = rec.get(uid).unwrap_or("");
        let label = rec.get(dcol).unwrap_or("").to_string();
        let idx = g
            .unit_index(unit)
            .ok_or_else(|| fmt_err(i + 2, format!("unknown unit `{unit}`")))?;
        let d = match labels.iter().position(|l| *l == label) {
            Some(d) => d,
            None if labels.len() < 2 => {
                labels.push(label);
                labels.len() - 1
            }
            None => return Err(fmt_err(i + 2, "more than two district labels".into())),
        };
        assigned[idx] = Some(d as u8);
    }
    if let Some(missing) = assigned.iter().position(|a| a.is_none()) {
        return Err(fmt_err(
            0,
            format!("unit `{}` has no district", g.units()[missing].unit_id),
        ));
    }
    let districts: Vec<u8> = assigned.into_iter().map(|a| a.unwrap()).collect();
    Ok(Plan::from_districts(&districts).canonical())
}
