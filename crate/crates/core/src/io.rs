//! Text file formats.
//!
//! * `embeddings.csv`: `id,f0,...,f{d-1}`
//! * `triplets.csv`: `query,ref1,ref2,chosen`
//! * `trials8.csv`: `query,ref1,...,ref8,chosen1,chosen2`
//! * `report.csv`: `fold,family,k,split,accuracy,mean_ll,epochs`
//! * `*.tam`: `key = value` header followed by `[name count]` blocks of one
//!   real per line. Reals are written in shortest round-trip exponent form,
//!   so a reload is bit-exact.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{Choice, EmbeddingTable, RankedTrial, TripletConstraint, TripletDataset};
use crate::error::{Error, Result};
use crate::model::{Family, WeightModel};
use crate::pca::PcaProjection;

pub const FORMAT_VERSION: u32 = 1;

fn parse_err(path: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

/// Header plus `(line number, record)` for each data row; the header is
/// checked with `check_header`.
fn read_rows(
    path: &Path,
    check_header: impl Fn(&csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<(csv::StringRecord, Vec<(u64, csv::StringRecord)>)> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    let mut header = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if header.is_none() {
            check_header(&rec).map_err(|r| parse_err(path, line, r))?;
            header = Some(rec);
            continue;
        }
        rows.push((line, rec));
    }
    let header = header.ok_or_else(|| parse_err(path, 1, "missing header row"))?;
    Ok((header, rows))
}

fn expect_header(rec: &csv::StringRecord, want: &[String]) -> std::result::Result<(), String> {
    let got: Vec<&str> = rec.iter().map(str::trim).collect();
    if got != want {
        return Err(format!(
            "expected header `{}`, found `{}`",
            want.join(","),
            got.join(",")
        ));
    }
    Ok(())
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path, |h| {
        if h.len() < 2 || h[0].trim() != "id" {
            return Err("expected header `id,f0,...`".to_string());
        }
        let want: Vec<String> = std::iter::once("id".to_string())
            .chain((0..h.len() - 1).map(|j| format!("f{j}")))
            .collect();
        expect_header(h, &want)
    })?;
    let dim = header.len() - 1;
    let mut ids = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * dim);
    let mut seen = std::collections::HashMap::new();
    for (line, rec) in rows {
        if rec.len() != dim + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", dim + 1, rec.len()),
            ));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty id"));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate id {id:?} (first seen on line {first})"),
            ));
        }
        for cell in rec.iter().skip(1) {
            data.push(parse_real(cell).map_err(|r| parse_err(path, line, r))?);
        }
        ids.push(id);
    }
    EmbeddingTable::new(ids, dim, data)
}

pub fn load_triplets(path: impl AsRef<Path>) -> Result<TripletDataset> {
    let path = path.as_ref();
    let want: Vec<String> = ["query", "ref1", "ref2", "chosen"]
        .map(String::from)
        .to_vec();
    let (_, rows) = read_rows(path, |h| expect_header(h, &want))?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if rec.len() != 4 {
            return Err(parse_err(
                path,
                line,
                format!("expected 4 fields, found {}", rec.len()),
            ));
        }
        let chosen = rec[3]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(Choice::from_index)
            .ok_or_else(|| {
                parse_err(
                    path,
                    line,
                    format!("chosen must be 1 or 2, found {:?}", &rec[3]),
                )
            })?;
        let c = TripletConstraint::new(rec[0].trim(), rec[1].trim(), rec[2].trim(), chosen)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(c);
    }
    Ok(TripletDataset::new(out))
}

fn trials_header() -> Vec<String> {
    std::iter::once("query".to_string())
        .chain((1..=8).map(|i| format!("ref{i}")))
        .chain(["chosen1".to_string(), "chosen2".to_string()])
        .collect()
}

pub fn load_ranked_trials(path: impl AsRef<Path>) -> Result<Vec<RankedTrial>> {
    let path = path.as_ref();
    let want = trials_header();
    let (_, rows) = read_rows(path, |h| expect_header(h, &want))?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if rec.len() != 11 {
            return Err(parse_err(
                path,
                line,
                format!("expected 11 fields, found {}", rec.len()),
            ));
        }
        let f: Vec<String> = rec.iter().map(|s| s.trim().to_string()).collect();
        let refs: [String; 8] = std::array::from_fn(|i| f[i + 1].clone());
        let trial = RankedTrial::new(f[0].clone(), refs, [f[9].clone(), f[10].clone()])
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(trial);
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn finish(path: &Path, w: BufWriter<File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "id").map_err(io)?;
    for j in 0..table.dim() {
        write!(w, ",f{j}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (id, row) in table.ids().iter().zip(table.rows()) {
        write!(w, "{id}").map_err(io)?;
        for x in row {
            write!(w, ",{x:e}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish(path, w)
}

pub fn write_triplets(dataset: &TripletDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "query,ref1,ref2,chosen").map_err(io)?;
    for c in &dataset.constraints {
        writeln!(w, "{},{},{},{}", c.query, c.ref1, c.ref2, c.chosen.index()).map_err(io)?;
    }
    finish(path, w)
}

pub fn write_ranked_trials(trials: &[RankedTrial], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", trials_header().join(",")).map_err(io)?;
    for t in trials {
        let fields: Vec<&str> = std::iter::once(t.query())
            .chain(t.references().iter().map(String::as_str))
            .chain(t.chosen().iter().map(String::as_str))
            .collect();
        writeln!(w, "{}", fields.join(",")).map_err(io)?;
    }
    finish(path, w)
}

// ---------------------------------------------------------------------------
// .tam files
// ---------------------------------------------------------------------------

/// A trained model as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: WeightModel,
    pub pca: Option<PcaProjection>,
    /// Free-form `meta.*` entries: seed, training configuration echo, etc.
    pub metadata: BTreeMap<String, String>,
}

struct TamDoc {
    header: BTreeMap<String, String>,
    blocks: BTreeMap<String, Vec<f64>>,
}

impl TamDoc {
    fn new() -> Self {
        TamDoc {
            header: BTreeMap::new(),
            blocks: BTreeMap::new(),
        }
    }

    fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.header.insert(key.to_string(), value.to_string());
    }

    fn write(&self, path: &Path, order: &[&str]) -> Result<()> {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "format_version = {FORMAT_VERSION}").map_err(io)?;
        for (k, v) in &self.header {
            writeln!(w, "{k} = {v}").map_err(io)?;
        }
        for name in order {
            if let Some(values) = self.blocks.get(*name) {
                writeln!(w, "[{name} {}]", values.len()).map_err(io)?;
                for x in values {
                    writeln!(w, "{x:e}").map_err(io)?;
                }
            }
        }
        finish(path, w)
    }

    fn read(path: &Path) -> Result<TamDoc> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut doc = TamDoc::new();
        let mut current: Option<(String, usize)> = None;
        let mut version: Option<String> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let (name, count) = inner
                    .split_once(' ')
                    .and_then(|(n, c)| c.trim().parse::<usize>().ok().map(|c| (n.to_string(), c)))
                    .ok_or_else(|| {
                        parse_err(path, line_no, format!("malformed block header {line:?}"))
                    })?;
                doc.blocks
                    .insert(name.clone(), Vec::with_capacity(count.min(1 << 24)));
                current = Some((name, count));
                continue;
            }
            match &current {
                Some((name, _)) => {
                    let v = parse_real(line).map_err(|r| parse_err(path, line_no, r))?;
                    doc.blocks.get_mut(name).expect("block registered").push(v);
                }
                None => {
                    let (k, v) = line.split_once('=').ok_or_else(|| {
                        parse_err(
                            path,
                            line_no,
                            format!("expected `key = value`, found {line:?}"),
                        )
                    })?;
                    let (k, v) = (k.trim(), v.trim());
                    if k == "format_version" {
                        version = Some(v.to_string());
                    } else {
                        doc.header.insert(k.to_string(), v.to_string());
                    }
                }
            }
        }
        match version.as_deref() {
            Some("1") => {}
            Some(other) => {
                return Err(Error::VersionMismatch {
                    path: path.to_path_buf(),
                    found: other.to_string(),
                })
            }
            None => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: "missing format_version".into(),
                })
            }
        }
        Ok(doc)
    }

    fn get<T: FromStr>(&self, path: &Path, key: &str) -> Result<T> {
        let raw = self.header.get(key).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: format!("missing key {key:?}"),
        })?;
        raw.parse().map_err(|_| Error::Format {
            path: path.to_path_buf(),
            reason: format!("bad value {raw:?} for key {key:?}"),
        })
    }

    fn block(&self, path: &Path, name: &str) -> Result<&[f64]> {
        self.blocks
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                reason: format!("missing block [{name}]"),
            })
    }

    fn put_pca(&mut self, pca: &PcaProjection) {
        self.set("pca.k", pca.k());
        self.set("pca.d", pca.input_dim());
        self.set("pca.centered", pca.centered_projection);
        self.blocks.insert("pca.mean".into(), pca.mean().to_vec());
        self.blocks
            .insert("pca.variances".into(), pca.variances().to_vec());
        self.blocks
            .insert("pca.components".into(), pca.components().to_vec());
    }

    fn take_pca(&self, path: &Path) -> Result<PcaProjection> {
        let fmt_err = |e: Error| Error::Format {
            path: path.to_path_buf(),
            reason: format!("embedded projection: {e}"),
        };
        PcaProjection::from_parts(
            self.get(path, "pca.k")?,
            self.get(path, "pca.d")?,
            self.block(path, "pca.components")?.to_vec(),
            self.block(path, "pca.mean")?.to_vec(),
            self.block(path, "pca.variances")?.to_vec(),
            self.get(path, "pca.centered")?,
        )
        .map_err(fmt_err)
    }

    fn check_blocks(&self, path: &Path, declared: &BTreeMap<String, usize>) -> Result<()> {
        for (name, values) in &self.blocks {
            if let Some(&want) = declared.get(name) {
                if values.len() != want {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        reason: format!(
                            "block [{name}] declares {want} values but holds {}",
                            values.len()
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

const PCA_BLOCKS: [&str; 3] = ["pca.mean", "pca.variances", "pca.components"];

fn declared_counts(path: &Path) -> Result<BTreeMap<String, usize>> {
    // second pass over block headers only, to catch truncated blocks
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(inner) = line
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
        {
            if let Some((n, c)) = inner.split_once(' ') {
                if let Ok(c) = c.trim().parse() {
                    out.insert(n.to_string(), c);
                }
            }
        }
    }
    Ok(out)
}

pub fn save_model(
    model: &WeightModel,
    pca: Option<&PcaProjection>,
    metadata: &BTreeMap<String, String>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut doc = TamDoc::new();
    doc.set("kind", "model");
    doc.set("family", model.family());
    doc.set("k", model.k());
    doc.set("lambda", format!("{:e}", model.lambda()));
    doc.set("pca", if pca.is_some() { "embedded" } else { "none" });
    for (k, v) in metadata {
        doc.set(&format!("meta.{k}"), v);
    }
    doc.blocks.insert("params".into(), model.params().to_vec());
    if let Some(p) = pca {
        doc.put_pca(p);
    }
    let mut order = vec!["params"];
    order.extend(PCA_BLOCKS);
    doc.write(path.as_ref(), &order)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let doc = TamDoc::read(path)?;
    let kind: String = doc.get(path, "kind")?;
    if kind != "model" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected kind = model, found {kind:?}"),
        });
    }
    let family: Family = doc
        .header
        .get("family")
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: "missing key \"family\"".into(),
        })?
        .parse()?;
    let k: usize = doc.get(path, "k")?;
    let lambda: f64 = doc.get(path, "lambda")?;
    let params = doc.block(path, "params")?.to_vec();
    let expected = family.stored_len(k);
    if params.len() != expected {
        return Err(Error::ParamCount {
            path: path.to_path_buf(),
            family,
            k,
            expected,
            found: params.len(),
        });
    }
    doc.check_blocks(path, &declared_counts(path)?)?;
    let model = WeightModel::from_params(family, k, params, lambda).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let pca_mode: String = doc.get(path, "pca")?;
    let pca = match pca_mode.as_str() {
        "none" => None,
        "embedded" => {
            let p = doc.take_pca(path)?;
            if p.k() != k {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("embedded projection has k={} but model has k={k}", p.k()),
                });
            }
            Some(p)
        }
        other => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("pca must be `none` or `embedded`, found {other:?}"),
            })
        }
    };
    let metadata = doc
        .header
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.clone())))
        .collect();
    Ok(ModelFile {
        model,
        pca,
        metadata,
    })
}

pub fn save_pca(pca: &PcaProjection, path: impl AsRef<Path>) -> Result<()> {
    let mut doc = TamDoc::new();
    doc.set("kind", "pca");
    doc.put_pca(pca);
    doc.write(path.as_ref(), &PCA_BLOCKS)
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaProjection> {
    let path = path.as_ref();
    let doc = TamDoc::read(path)?;
    let kind: String = doc.get(path, "kind")?;
    if kind != "pca" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected kind = pca, found {kind:?}"),
        });
    }
    doc.check_blocks(path, &declared_counts(path)?)?;
    doc.take_pca(path)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl serde::Serialize for Split {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            _ => Err(Error::invalid(
                "split",
                format!("{s:?} is not train or validation"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub fold: usize,
    pub family: Family,
    pub k: usize,
    pub split: Split,
    pub accuracy: f64,
    pub mean_ll: f64,
    pub epochs: usize,
}

impl ReportRow {
    pub const HEADER: &'static str = "fold,family,k,split,accuracy,mean_ll,epochs";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.fold, self.family, self.k, self.split, self.accuracy, self.mean_ll, self.epochs
        )
    }
}

/// Aggregate over folds for one `(family, k, split)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub family: Family,
    pub k: usize,
    pub split: Split,
    pub folds: usize,
    pub mean_accuracy: f64,
    pub sem_accuracy: f64,
    pub mean_ll: f64,
    pub sem_ll: f64,
    pub mean_epochs: f64,
}

impl SummaryRow {
    pub const HEADER: &'static str =
        "family,k,split,folds,mean_accuracy,sem_accuracy,mean_ll,sem_ll,mean_epochs";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.family,
            self.k,
            self.split,
            self.folds,
            self.mean_accuracy,
            self.sem_accuracy,
            self.mean_ll,
            self.sem_ll,
            self.mean_epochs
        )
    }
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for l in lines {
        writeln!(w, "{l}").map_err(io)?;
    }
    finish(path, w)
}

pub fn write_report(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    write_lines(
        path.as_ref(),
        ReportRow::HEADER,
        rows.iter().map(ReportRow::to_csv_line),
    )
}

pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    write_lines(
        path.as_ref(),
        SummaryRow::HEADER,
        rows.iter().map(SummaryRow::to_csv_line),
    )
}

pub fn load_report(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let want: Vec<String> = ReportRow::HEADER.split(',').map(String::from).collect();
    let (_, rows) = read_rows(path, |h| expect_header(h, &want))?;
    rows.into_iter()
        .map(|(line, r)| {
            let e = |reason: String| parse_err(path, line, reason);
            if r.len() != 7 {
                return Err(e(format!("expected 7 fields, found {}", r.len())));
            }
            let int = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| e(format!("{s:?} is not an integer")))
            };
            Ok(ReportRow {
                fold: int(&r[0])?,
                family: r[1].trim().parse()?,
                k: int(&r[2])?,
                split: r[3].trim().parse()?,
                accuracy: parse_real(&r[4]).map_err(e)?,
                mean_ll: parse_real(&r[5]).map_err(e)?,
                epochs: int(&r[6])?,
            })
        })
        .collect()
}

/// `path` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}
