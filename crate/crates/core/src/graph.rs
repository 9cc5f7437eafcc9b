//! Unit/adjacency ingestion and the county dual graph.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("duplicate unit id `{0}`")]
    DuplicateUnit(String),
    #[error("unit `{unit}`: {reason}")]
    InvalidUnit { unit: String, reason: String },
    #[error("adjacency references unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("invalid adjacency record {a}-{b}: {reason}")]
    InvalidAdjacency { a: String, b: String, reason: String },
    #[error("graph is not connected")]
    Disconnected,
    #[error("pruning disconnects the graph; separated units: {}", fmt_groups(.separated))]
    PruneDisconnects { separated: Vec<Vec<String>> },
}

fn fmt_groups(groups: &[Vec<String>]) -> String {
    groups
        .iter()
        .map(|g| format!("{{{}}}", g.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Vote counts of one contest in one unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Votes {
    pub dem: u64,
    pub rep: u64,
    pub ind: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit_id: String,
    pub population: u64,
    /// km²
    pub area: f64,
    /// km
    pub perimeter: f64,
    /// `(min_x, min_y, max_x, max_y)` in projected km.
    pub bbox: [f64; 4],
    /// contest id → votes
    pub votes: BTreeMap<String, Votes>,
}

impl UnitRecord {
    fn validate(&self) -> Result<(), GeoError> {
        let bad = |reason: &str| GeoError::InvalidUnit {
            unit: self.unit_id.clone(),
            reason: reason.to_string(),
        };
        if !(self.area > 0.0) {
            return Err(bad("area must be positive"));
        }
        if !(self.perimeter > 0.0) {
            return Err(bad("perimeter must be positive"));
        }
        let [x0, y0, x1, y1] = self.bbox;
        if !(x0 < x1 && y0 < y1) {
            return Err(bad("bbox must satisfy min < max on both axes"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyRecord {
    pub unit_a: String,
    pub unit_b: String,
    /// km
    pub shared_perimeter: f64,
}

/// An undirected edge between two unit indices, `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub shared_perimeter: f64,
}

/// County dual graph.
///
/// `edges` is the contiguity graph used for plan validity and may be pruned.
/// `borders` always holds every physical shared border that was loaded and
/// is what district perimeters are computed from.
#[derive(Clone, Debug)]
pub struct DualGraph {
    units: Vec<UnitRecord>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    borders: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    connected: bool,
    id: String,
}

const UNIT_COLUMNS: [&str; 8] = [
    "unit_id",
    "population",
    "area_km2",
    "perimeter_km",
    "bbox_minx",
    "bbox_miny",
    "bbox_maxx",
    "bbox_maxy",
];

fn open(path: &Path) -> Result<File, GeoError> {
    File::open(path).map_err(|source| GeoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, GeoError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| GeoError::MissingColumn(name.to_string()))
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    row: usize,
    name: &str,
) -> Result<T, GeoError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| GeoError::Parse {
        row,
        column: name.to_string(),
        value: raw.to_string(),
    })
}

/// Contest ids for which all of `<c>_dem`, `<c>_rep`, `<c>_ind` columns are
/// present. `_ind` may be omitted, in which case it reads as zero.
fn vote_columns(headers: &csv::StringRecord) -> VoteColumns {
    let mut out = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        if let Some(contest) = h.strip_suffix("_dem") {
            let rep = column(headers, &format!("{contest}_rep")).ok();
            let ind = column(headers, &format!("{contest}_ind")).ok();
            if let Some(rep) = rep {
                out.push((contest.to_string(), i, rep, ind));
            }
        }
    }
    out
}

type VoteColumns = Vec<(String, usize, usize, Option<usize>)>;

fn parse_votes(
    rec: &csv::StringRecord,
    contests: &VoteColumns,
    row: usize,
) -> Result<BTreeMap<String, Votes>, GeoError> {
    let mut votes = BTreeMap::new();
    for (contest, d, r, ind) in contests {
        let v = Votes {
            dem: parse_field(rec, *d, row, &format!("{contest}_dem"))?,
            rep: parse_field(rec, *r, row, &format!("{contest}_rep"))?,
            ind: match ind {
                Some(c) => parse_field(rec, *c, row, &format!("{contest}_ind"))?,
                None => 0,
            },
        };
        votes.insert(contest.clone(), v);
    }
    Ok(votes)
}

/// Reads `units.csv`.
///
/// Row numbers in parse errors are 1-based data rows (the header is row 0).
pub fn load_units(path: impl AsRef<Path>) -> Result<Vec<UnitRecord>, GeoError> {
    read_units(open(path.as_ref())?)
}

pub fn read_units<R: Read>(reader: R) -> Result<Vec<UnitRecord>, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = UNIT_COLUMNS
        .iter()
        .map(|name| column(&headers, name))
        .collect::<Result<Vec<_>, _>>()?;
    let contests = vote_columns(&headers);

    let mut units: Vec<UnitRecord> = Vec::new();
    let mut seen = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let unit_id = rec.get(cols[0]).unwrap_or("").trim().to_string();
        let votes = parse_votes(&rec, &contests, row)?;
        let unit = UnitRecord {
            population: parse_field(&rec, cols[1], row, UNIT_COLUMNS[1])?,
            area: parse_field(&rec, cols[2], row, UNIT_COLUMNS[2])?,
            perimeter: parse_field(&rec, cols[3], row, UNIT_COLUMNS[3])?,
            bbox: [
                parse_field(&rec, cols[4], row, UNIT_COLUMNS[4])?,
                parse_field(&rec, cols[5], row, UNIT_COLUMNS[5])?,
                parse_field(&rec, cols[6], row, UNIT_COLUMNS[6])?,
                parse_field(&rec, cols[7], row, UNIT_COLUMNS[7])?,
            ],
            unit_id,
            votes,
        };
        unit.validate()?;
        if seen.insert(unit.unit_id.clone(), units.len()).is_some() {
            return Err(GeoError::DuplicateUnit(unit.unit_id));
        }
        units.push(unit);
    }
    Ok(units)
}

/// Per-unit votes keyed by unit id, for use with [`DualGraph::attach_votes`].
pub type VoteTable = HashMap<String, BTreeMap<String, Votes>>;

/// Reads a vote table: `unit_id` plus `<contest>_dem,<contest>_rep[,<contest>_ind]`
/// column groups.
pub fn load_votes(path: impl AsRef<Path>) -> Result<VoteTable, GeoError> {
    read_votes(open(path.as_ref())?)
}

pub fn read_votes<R: Read>(reader: R) -> Result<VoteTable, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let uid = column(&headers, "unit_id")?;
    let contests = vote_columns(&headers);
    let mut out = VoteTable::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let unit_id = rec.get(uid).unwrap_or("").trim().to_string();
        let votes = parse_votes(&rec, &contests, row)?;
        if out.insert(unit_id.clone(), votes).is_some() {
            return Err(GeoError::DuplicateUnit(unit_id));
        }
    }
    Ok(out)
}

/// Same schema as `units.csv`, read from the `properties` of a GeoJSON
/// FeatureCollection. Geometry is ignored.
pub fn load_units_geojson(path: impl AsRef<Path>) -> Result<Vec<UnitRecord>, GeoError> {
    let value: serde_json::Value = serde_json::from_reader(open(path.as_ref())?)?;
    let features = value
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| GeoError::MissingColumn("features".into()))?;

    // Flatten properties into CSV text so both inputs share one parser.
    let mut keys: Vec<String> = Vec::new();
    for f in features {
        if let Some(props) = f.get("properties").and_then(|p| p.as_object()) {
            for k in props.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(&keys)?;
    for f in features {
        let props = f.get("properties").and_then(|p| p.as_object());
        let row: Vec<String> = keys
            .iter()
            .map(|k| match props.and_then(|p| p.get(k)) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Null) | None => String::new(),
                Some(v) => v.to_string(),
            })
            .collect();
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| GeoError::Io {
        path: path.as_ref().display().to_string(),
        source: e.into_error(),
    })?;
    read_units(bytes.as_slice())
}

/// Reads `adjacency.csv` (`unit_a,unit_b,shared_perimeter_km`).
pub fn load_adjacency(path: impl AsRef<Path>) -> Result<Vec<AdjacencyRecord>, GeoError> {
    read_adjacency(open(path.as_ref())?)
}

pub fn read_adjacency<R: Read>(reader: R) -> Result<Vec<AdjacencyRecord>, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let a = column(&headers, "unit_a")?;
    let b = column(&headers, "unit_b")?;
    let s = column(&headers, "shared_perimeter_km")?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        out.push(AdjacencyRecord {
            unit_a: rec.get(a).unwrap_or("").trim().to_string(),
            unit_b: rec.get(b).unwrap_or("").trim().to_string(),
            shared_perimeter: parse_field(&rec, s, i + 1, "shared_perimeter_km")?,
        });
    }
    Ok(out)
}

/// Builds the dual graph. A disconnected result is returned with
/// [`DualGraph::is_connected`] false rather than as an error.
pub fn build_graph(
    units: Vec<UnitRecord>,
    adjacency: &[AdjacencyRecord],
) -> Result<DualGraph, GeoError> {
    let mut index = HashMap::with_capacity(units.len());
    for (i, u) in units.iter().enumerate() {
        u.validate()?;
        if index.insert(u.unit_id.clone(), i).is_some() {
            return Err(GeoError::DuplicateUnit(u.unit_id.clone()));
        }
    }
    let mut seen = HashMap::new();
    let mut edges = Vec::with_capacity(adjacency.len());
    for rec in adjacency {
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| GeoError::UnknownUnit(name.to_string()))
        };
        let ia = lookup(&rec.unit_a)?;
        let ib = lookup(&rec.unit_b)?;
        let invalid = |reason: &str| GeoError::InvalidAdjacency {
            a: rec.unit_a.clone(),
            b: rec.unit_b.clone(),
            reason: reason.to_string(),
        };
        if ia == ib {
            return Err(invalid("self loop"));
        }
        if !(rec.shared_perimeter > 0.0) {
            return Err(invalid("shared perimeter must be positive"));
        }
        let (a, b) = (ia.min(ib), ia.max(ib));
        if seen.insert((a, b), ()).is_some() {
            return Err(invalid("duplicate record for this pair"));
        }
        edges.push(Edge {
            a,
            b,
            shared_perimeter: rec.shared_perimeter,
        });
    }
    Ok(DualGraph::assemble(units, index, edges.clone(), edges))
}

impl DualGraph {
    fn assemble(
        units: Vec<UnitRecord>,
        index: HashMap<String, usize>,
        edges: Vec<Edge>,
        borders: Vec<Edge>,
    ) -> Self {
        let n = units.len();
        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            neighbors[e.a].push(e.b);
            neighbors[e.b].push(e.a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let connected = n > 0 && components(&neighbors, n).len() == 1;

        let mut hasher = Sha256::new();
        for u in &units {
            hasher.update(u.unit_id.as_bytes());
            hasher.update([0u8]);
        }
        let mut pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.a, e.b)).collect();
        pairs.sort_unstable();
        for (a, b) in pairs {
            hasher.update((a as u64).to_le_bytes());
            hasher.update((b as u64).to_le_bytes());
        }
        let digest = hasher.finalize();
        let id = digest[..8].iter().map(|b| format!("{b:02x}")).collect();

        DualGraph {
            units,
            index,
            edges,
            borders,
            neighbors,
            connected,
            id,
        }
    }

    /// Synthetic graph with the given populations and edges. Every unit is a
    /// unit square at the origin with no border geometry; handy for
    /// structural work (counting, trees, chains) on toy graphs.
    pub fn from_edges(populations: &[u64], edges: &[(usize, usize)]) -> Result<Self, GeoError> {
        let units: Vec<UnitRecord> = populations
            .iter()
            .enumerate()
            .map(|(i, &p)| UnitRecord {
                unit_id: format!("u{i}"),
                population: p,
                area: 1.0,
                perimeter: 4.0,
                bbox: [0.0, 0.0, 1.0, 1.0],
                votes: BTreeMap::new(),
            })
            .collect();
        let adjacency: Vec<AdjacencyRecord> = edges
            .iter()
            .map(|&(a, b)| {
                let name = |i: usize| {
                    units
                        .get(i)
                        .map(|u| u.unit_id.clone())
                        .unwrap_or_else(|| format!("u{i}"))
                };
                AdjacencyRecord {
                    unit_a: name(a),
                    unit_b: name(b),
                    shared_perimeter: 1.0,
                }
            })
            .collect();
        build_graph(units, &adjacency)
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn unit_index(&self, unit_id: &str) -> Option<usize> {
        self.index.get(unit_id).copied()
    }

    /// Contiguity edges.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Every loaded shared border, including pruned ones.
    pub fn borders(&self) -> &[Edge] {
        &self.borders
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Short content hash of unit ids and contiguity edges.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn populations(&self) -> Vec<u64> {
        self.units.iter().map(|u| u.population).collect()
    }

    pub fn total_population(&self) -> u64 {
        self.units.iter().map(|u| u.population).sum()
    }

    /// Contest ids present on every unit.
    pub fn contests(&self) -> Vec<String> {
        let Some(first) = self.units.first() else {
            return Vec::new();
        };
        first
            .votes
            .keys()
            .filter(|c| self.units.iter().all(|u| u.votes.contains_key(*c)))
            .cloned()
            .collect()
    }

    /// Attaches per-unit votes loaded from a separate table, keyed by unit id.
    pub fn attach_votes(&mut self, votes: &VoteTable) -> Result<(), GeoError> {
        for (unit, contests) in votes {
            let i = self
                .unit_index(unit)
                .ok_or_else(|| GeoError::UnknownUnit(unit.clone()))?;
            for (c, v) in contests {
                self.units[i].votes.insert(c.clone(), *v);
            }
        }
        Ok(())
    }

    /// Removes every contiguity edge whose shared border is shorter than
    /// `min_length` km and is less than `min_fraction` of the perimeter of
    /// both endpoint units. Border geometry is kept.
    pub fn prune_short_borders(&self, min_length: f64, min_fraction: f64) -> Result<Self, GeoError> {
        if !self.connected {
            return Err(GeoError::Disconnected);
        }
        let kept: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| !self.is_short_border(e, min_length, min_fraction))
            .copied()
            .collect();
        let pruned = DualGraph::assemble(
            self.units.clone(),
            self.index.clone(),
            kept,
            self.borders.clone(),
        );
        if !pruned.connected {
            let comps = components(&pruned.neighbors, pruned.n());
            let separated = comps
                .into_iter()
                .filter(|c| !c.contains(&0))
                .map(|c| c.into_iter().map(|i| self.units[i].unit_id.clone()).collect())
                .collect();
            return Err(GeoError::PruneDisconnects { separated });
        }
        Ok(pruned)
    }

    fn is_short_border(&self, e: &Edge, min_length: f64, min_fraction: f64) -> bool {
        let s = e.shared_perimeter;
        s < min_length
            && s / self.units[e.a].perimeter < min_fraction
            && s / self.units[e.b].perimeter < min_fraction
    }

    /// Subgraph induced by `nodes` as neighbor lists over positions in `nodes`.
    pub(crate) fn induced_neighbors(&self, nodes: &[usize]) -> Vec<Vec<usize>> {
        let mut pos = vec![usize::MAX; self.n()];
        for (i, &v) in nodes.iter().enumerate() {
            pos[v] = i;
        }
        nodes
            .iter()
            .map(|&v| {
                self.neighbors[v]
                    .iter()
                    .filter_map(|&w| (pos[w] != usize::MAX).then_some(pos[w]))
                    .collect()
            })
            .collect()
    }
}

/// Connected components of a neighbor-list graph, each sorted.
pub(crate) fn components(neighbors: &[Vec<usize>], n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
