//! Expression / drug-response tables and the leave-one-out pseudo-ground-truth
//! pipeline.
//!
//! File formats:
//!
//! * expression CSV: header `cell_line,<gene_id>,...`, an optional second
//!   line `#scale=raw` or `#scale=log2` (default `log2`; raw values are
//!   stored as `log2(v + 1)`), then one row per cell line;
//! * response CSV: header `cell_line,drug,log_ic50`, one record per line;
//! * gene filter: one gene id per line;
//! * pseudo-ground-truth cache: one CSV per drug named after the drug, header
//!   `cell_line,lambda_min,center,<gene_id>...`. A `cell_line` of `*` marks a
//!   fit on all cell lines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, WeightVector};
use crate::elicitation::TargetCase;
use crate::error::{Error, Result};
use crate::regression::{cv_select_lambda, fit_lasso, CvOptions, LassoConfig};
use crate::seed;

/// Cache key for a fit that used every cell line.
pub const ALL_CELL_LINES: &str = "*";

/// Cell lines (other than the held-out one) a pseudo-ground-truth fit needs.
pub const MIN_TRAINING_CELL_LINES: usize = 12;

fn parse_error(source_name: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn read_records<R: Read>(reader: R, source_name: &str) -> Result<Vec<csv::StringRecord>> {
    csv_reader(reader)
        .records()
        .map(|r| {
            r.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_error(source_name, line, e.to_string())
            })
        })
        .collect()
}

fn parse_value(field: &str, source_name: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(source_name, line, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(source_name, line, format!("'{field}' is not finite")));
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTable {
    cell_line_ids: Vec<String>,
    gene_ids: Vec<String>,
    /// log2-scale expression, one row per cell line.
    values: Array2<f64>,
    row_of: HashMap<String, usize>,
}

impl ExpressionTable {
    pub fn new(cell_line_ids: Vec<String>, gene_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (cell_line_ids.len(), gene_ids.len()) {
            return Err(Error::invalid(format!(
                "expression matrix is {:?} but there are {} cell lines and {} genes",
                values.dim(),
                cell_line_ids.len(),
                gene_ids.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("expression matrix contains non-finite values"));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = gene_ids.iter().find(|g| !seen.insert(g.as_str())) {
            return Err(Error::invalid(format!("duplicate gene id '{dup}'")));
        }
        let mut row_of = HashMap::with_capacity(cell_line_ids.len());
        for (i, id) in cell_line_ids.iter().enumerate() {
            if row_of.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate cell line '{id}'")));
            }
        }
        Ok(ExpressionTable {
            cell_line_ids,
            gene_ids,
            values,
            row_of,
        })
    }

    pub fn cell_line_ids(&self) -> &[String] {
        &self.cell_line_ids
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row_index(&self, cell_line: &str) -> Option<usize> {
        self.row_of.get(cell_line).copied()
    }

    pub fn row(&self, cell_line: &str) -> Option<Array1<f64>> {
        self.row_index(cell_line).map(|i| self.values.row(i).to_owned())
    }

    /// Keeps only the listed genes, in table order. Listed genes missing from
    /// the table are ignored with a warning.
    pub fn restrict_genes(&self, genes: &[String]) -> Result<ExpressionTable> {
        let wanted: BTreeSet<&str> = genes.iter().map(String::as_str).collect();
        let keep: Vec<usize> = (0..self.gene_ids.len())
            .filter(|&j| wanted.contains(self.gene_ids[j].as_str()))
            .collect();
        let missing = wanted.len() - keep.len();
        if missing > 0 {
            log::warn!("{missing} filtered gene ids are not in the expression table");
        }
        if keep.is_empty() {
            return Err(Error::invalid("gene filter leaves no genes"));
        }
        ExpressionTable::new(
            self.cell_line_ids.clone(),
            keep.iter().map(|&j| self.gene_ids[j].clone()).collect(),
            self.values.select(Axis(1), &keep),
        )
    }
}

pub fn parse_expression<R: Read>(reader: R, source_name: &str) -> Result<ExpressionTable> {
    let records = read_records(reader, source_name)?;
    let mut iter = records.into_iter().peekable();
    let header = iter
        .next()
        .ok_or_else(|| parse_error(source_name, 1, "empty expression file"))?;
    if header.get(0) != Some("cell_line") {
        return Err(parse_error(source_name, record_line(&header), "header must start with 'cell_line'"));
    }
    let gene_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if gene_ids.is_empty() {
        return Err(parse_error(source_name, record_line(&header), "header lists no genes"));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = gene_ids.iter().find(|g| !seen.insert(g.as_str())) {
        return Err(parse_error(source_name, record_line(&header), format!("duplicate gene id '{dup}'")));
    }

    let mut raw_scale = false;
    if let Some(first) = iter.peek() {
        if let Some(directive) = first.get(0).filter(|f| f.starts_with('#')) {
            raw_scale = match directive {
                "#scale=raw" => true,
                "#scale=log2" => false,
                other => {
                    return Err(parse_error(
                        source_name,
                        record_line(first),
                        format!("unknown directive '{other}', expected #scale=raw or #scale=log2"),
                    ))
                }
            };
            iter.next();
        }
    }

    let mut cell_line_ids = Vec::new();
    let mut seen_cells = BTreeSet::new();
    let mut flat = Vec::new();
    for record in iter {
        let line = record_line(&record);
        if record.len() != gene_ids.len() + 1 {
            return Err(parse_error(
                source_name,
                line,
                format!("expected {} fields, found {}", gene_ids.len() + 1, record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(parse_error(source_name, line, "empty cell line id"));
        }
        if !seen_cells.insert(id.clone()) {
            return Err(parse_error(source_name, line, format!("duplicate cell line '{id}'")));
        }
        for field in record.iter().skip(1) {
            let v = parse_value(field, source_name, line)?;
            if raw_scale {
                if v < 0.0 {
                    return Err(parse_error(source_name, line, format!("raw count {v} is negative")));
                }
                flat.push((v + 1.0).log2());
            } else {
                flat.push(v);
            }
        }
        cell_line_ids.push(id);
    }
    let values = Array2::from_shape_vec((cell_line_ids.len(), gene_ids.len()), flat)
        .expect("row lengths were checked");
    ExpressionTable::new(cell_line_ids, gene_ids, values)
}

pub fn load_expression(path: &Path) -> Result<ExpressionTable> {
    parse_expression(File::open(path)?, &path.display().to_string())
}

/// Writes the table on the log2 scale; `parse_expression` reads it back
/// bit-exactly.
pub fn write_expression<W: Write>(table: &ExpressionTable, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header = vec!["cell_line".to_string()];
    header.extend(table.gene_ids.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    w.write_record(["#scale=log2"]).map_err(csv_error)?;
    for (id, row) in table.cell_line_ids.iter().zip(table.values.rows()) {
        let mut record = vec![id.clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRecord {
    pub cell_line: String,
    pub drug: String,
    pub log_ic50: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResponseTable {
    records: Vec<ResponseRecord>,
    index: HashMap<(String, String), usize>,
}

impl ResponseTable {
    pub fn new(records: Vec<ResponseRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !r.log_ic50.is_finite() {
                return Err(Error::invalid(format!("non-finite response for ({}, {})", r.cell_line, r.drug)));
            }
            if index.insert((r.cell_line.clone(), r.drug.clone()), i).is_some() {
                return Err(Error::invalid(format!("duplicate response for ({}, {})", r.cell_line, r.drug)));
            }
        }
        Ok(ResponseTable { records, index })
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, cell_line: &str, drug: &str) -> Option<f64> {
        self.index
            .get(&(cell_line.to_string(), drug.to_string()))
            .map(|&i| self.records[i].log_ic50)
    }

    /// Distinct drug ids, sorted.
    pub fn drugs(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.drug.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }
}

pub fn parse_responses<R: Read>(reader: R, source_name: &str) -> Result<ResponseTable> {
    let records = read_records(reader, source_name)?;
    let mut iter = records.into_iter();
    let header = iter
        .next()
        .ok_or_else(|| parse_error(source_name, 1, "empty response file"))?;
    if header.iter().collect::<Vec<_>>() != ["cell_line", "drug", "log_ic50"] {
        return Err(parse_error(
            source_name,
            record_line(&header),
            "header must be 'cell_line,drug,log_ic50'",
        ));
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for record in iter {
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(parse_error(source_name, line, format!("expected 3 fields, found {}", record.len())));
        }
        let (cell_line, drug) = (record[0].to_string(), record[1].to_string());
        if cell_line.is_empty() || drug.is_empty() {
            return Err(parse_error(source_name, line, "empty cell line or drug id"));
        }
        if !seen.insert((cell_line.clone(), drug.clone())) {
            return Err(parse_error(
                source_name,
                line,
                format!("duplicate response for ({cell_line}, {drug})"),
            ));
        }
        let log_ic50 = parse_value(&record[2], source_name, line)?;
        out.push(ResponseRecord {
            cell_line,
            drug,
            log_ic50,
        });
    }
    ResponseTable::new(out)
}

pub fn load_responses(path: &Path) -> Result<ResponseTable> {
    parse_responses(File::open(path)?, &path.display().to_string())
}

pub fn write_responses<W: Write>(table: &ResponseTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_line", "drug", "log_ic50"]).map_err(csv_error)?;
    for r in &table.records {
        w.write_record([r.cell_line.as_str(), r.drug.as_str(), &r.log_ic50.to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One gene id per line; blank lines and `#` comments are ignored.
pub fn load_gene_filter(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut genes = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() && !id.starts_with('#') {
            genes.push(id.to_string());
        }
    }
    Ok(genes)
}

/// Cell lines with both expression and a response for `drug`, in expression
/// table order, minus `exclude`.
pub fn responsive_cell_lines(expr: &ExpressionTable, resp: &ResponseTable, drug: &str, exclude: Option<&str>) -> Vec<String> {
    expr.cell_line_ids
        .iter()
        .filter(|c| Some(c.as_str()) != exclude)
        .filter(|c| resp.get(c, drug).is_some())
        .cloned()
        .collect()
}

/// Builds a dataset from the listed cell lines with responses centered on
/// their mean. Returns the dataset and the center.
pub fn centered_dataset(
    expr: &ExpressionTable,
    resp: &ResponseTable,
    drug: &str,
    cell_lines: &[String],
) -> Result<(Dataset, f64)> {
    let rows: Vec<usize> = cell_lines
        .iter()
        .map(|c| {
            expr.row_index(c)
                .ok_or_else(|| Error::invalid(format!("cell line '{c}' has no expression row")))
        })
        .collect::<Result<_>>()?;
    let y: Vec<f64> = cell_lines
        .iter()
        .map(|c| {
            resp.get(c, drug)
                .ok_or_else(|| Error::invalid(format!("cell line '{c}' has no response to '{drug}'")))
        })
        .collect::<Result<_>>()?;
    let center = y.iter().sum::<f64>() / y.len() as f64;
    let responses: Array1<f64> = y.iter().map(|v| v - center).collect();
    let data = Dataset::new(expr.values.select(Axis(0), &rows), responses)?
        .with_feature_names(expr.gene_ids.clone())?;
    Ok((data, center))
}

/// Draws `n` distinct training cell lines for `drug`, never `exclude`.
pub fn sample_training_set(
    expr: &ExpressionTable,
    resp: &ResponseTable,
    drug: &str,
    exclude: &str,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let mut candidates = responsive_cell_lines(expr, resp, drug, Some(exclude));
    if candidates.len() < n {
        return Err(Error::invalid(format!(
            "drug '{drug}' has {} usable training cell lines, {n} requested",
            candidates.len()
        )));
    }
    candidates.shuffle(rng);
    candidates.truncate(n);
    Ok(centered_dataset(expr, resp, drug, &candidates)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub drug: String,
    /// The held-out cell line, or [`ALL_CELL_LINES`].
    pub held_out: String,
    pub weights: WeightVector,
    pub lambda_min: f64,
    /// Mean response subtracted before fitting.
    pub center: f64,
}

fn learn_entry(
    expr: &ExpressionTable,
    resp: &ResponseTable,
    drug: &str,
    held_out: Option<&str>,
    seed: u64,
) -> Result<GroundTruthEntry> {
    if !resp.records.iter().any(|r| r.drug == drug) {
        return Err(Error::invalid(format!("drug '{drug}' has no responses")));
    }
    if let Some(cell) = held_out {
        if expr.row_index(cell).is_none() {
            return Err(Error::invalid(format!("held-out cell line '{cell}' has no expression row")));
        }
        if resp.get(cell, drug).is_none() {
            return Err(Error::invalid(format!("held-out cell line '{cell}' has no response to '{drug}'")));
        }
    }
    let training = responsive_cell_lines(expr, resp, drug, held_out);
    let skipped = expr.cell_line_ids.len() - training.len() - usize::from(held_out.is_some());
    if skipped > 0 {
        log::warn!("drug '{drug}': {skipped} cell lines without a response were skipped");
    }
    if training.len() < MIN_TRAINING_CELL_LINES {
        return Err(Error::invalid(format!(
            "drug '{drug}' has {} training cell lines, at least {MIN_TRAINING_CELL_LINES} are needed",
            training.len()
        )));
    }
    let (data, center) = centered_dataset(expr, resp, drug, &training)?;
    let fit_config = LassoConfig {
        standardize: true,
        ..LassoConfig::default()
    };
    let cv = cv_select_lambda(
        &data,
        &CvOptions {
            alpha: 1.0,
            folds: 10,
            grid_size: 100,
            seed,
            fit: fit_config.clone(),
        },
    )
    .map_err(|e| match e {
        Error::DegenerateResponse => Error::Numerical(format!("drug '{drug}': responses carry no signal")),
        other => other,
    })?;
    let fit = fit_lasso(
        &data,
        &LassoConfig {
            lambda: cv.lambda_min,
            ..fit_config
        },
    )?;
    Ok(GroundTruthEntry {
        drug: drug.to_string(),
        held_out: held_out.unwrap_or(ALL_CELL_LINES).to_string(),
        weights: fit.weights,
        lambda_min: cv.lambda_min,
        center,
    })
}

/// Lasso weights for `drug` learned from every cell line except `held_out`,
/// with the penalty chosen by 10-fold cross-validation over 100 values.
pub fn learn_pseudo_ground_truth(
    expr: &ExpressionTable,
    resp: &ResponseTable,
    drug: &str,
    held_out: &str,
    seed: u64,
) -> Result<GroundTruthEntry> {
    learn_entry(expr, resp, drug, Some(held_out), seed)
}

/// As [`learn_pseudo_ground_truth`] but using every cell line.
pub fn learn_per_drug_ground_truth(
    expr: &ExpressionTable,
    resp: &ResponseTable,
    drug: &str,
    seed: u64,
) -> Result<GroundTruthEntry> {
    learn_entry(expr, resp, drug, None, seed)
}

/// Pseudo-ground-truth weights keyed by `(drug, held-out cell line)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGroundTruth {
    gene_ids: Vec<String>,
    entries: BTreeMap<(String, String), GroundTruthEntry>,
}

impl PseudoGroundTruth {
    pub fn new(gene_ids: Vec<String>) -> Self {
        PseudoGroundTruth {
            gene_ids,
            entries: BTreeMap::new(),
        }
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn insert(&mut self, entry: GroundTruthEntry) -> Result<()> {
        if entry.weights.len() != self.gene_ids.len() {
            return Err(Error::dims("pseudo-ground-truth weights", self.gene_ids.len(), entry.weights.len()));
        }
        self.entries
            .insert((entry.drug.clone(), entry.held_out.clone()), entry);
        Ok(())
    }

    /// The entry for `(drug, cell_line)`, falling back to the drug's
    /// all-cell-line fit.
    pub fn get(&self, drug: &str, cell_line: &str) -> Option<&GroundTruthEntry> {
        self.entries
            .get(&(drug.to_string(), cell_line.to_string()))
            .or_else(|| self.entries.get(&(drug.to_string(), ALL_CELL_LINES.to_string())))
    }

    pub fn entries(&self) -> impl Iterator<Item = &GroundTruthEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn drugs(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.keys().map(|(d, _)| d.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Held-out cell lines with an entry for `drug` (excluding the
    /// all-cell-line fit).
    pub fn cell_lines(&self, drug: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|(d, c)| d == drug && c != ALL_CELL_LINES)
            .map(|(_, c)| c.clone())
            .collect()
    }
}

/// Learns every requested `(drug, cell line)` entry, in parallel. With
/// `per_drug`, one all-cell-line fit per drug is learned instead and `cells`
/// is ignored. Each fit is seeded from `seed` and its own identifiers.
pub fn learn_all(
    expr: &ExpressionTable,
    resp: &ResponseTable,
    drugs: &[String],
    cells: &[String],
    per_drug: bool,
    seed: u64,
) -> Result<PseudoGroundTruth> {
    let jobs: Vec<(String, Option<String>)> = if per_drug {
        drugs.iter().map(|d| (d.clone(), None)).collect()
    } else {
        drugs
            .iter()
            .flat_map(|d| cells.iter().map(move |c| (d.clone(), Some(c.clone()))))
            .collect()
    };
    let entries: Vec<GroundTruthEntry> = jobs
        .par_iter()
        .map(|(drug, cell)| {
            let cell_id = cell.as_deref().unwrap_or(ALL_CELL_LINES);
            let s = seed::derive_seed(seed, &[seed::str_id(drug), seed::str_id(cell_id)]);
            learn_entry(expr, resp, drug, cell.as_deref(), s)
        })
        .collect::<Result<_>>()?;
    let mut pgt = PseudoGroundTruth::new(expr.gene_ids.clone());
    for e in entries {
        pgt.insert(e)?;
    }
    Ok(pgt)
}

/// One target per `(drug, cell line)` pair: the cell line's expression row
/// and the weights learned with that cell line held out.
pub fn build_target_cases(
    pgt: &PseudoGroundTruth,
    expr: &ExpressionTable,
    drugs: &[String],
    cells: &[String],
) -> Result<Vec<TargetCase>> {
    if pgt.gene_ids != expr.gene_ids {
        return Err(Error::invalid(
            "pseudo-ground-truth genes do not match the expression table (was a different gene filter used?)",
        ));
    }
    let mut out = Vec::with_capacity(drugs.len() * cells.len());
    for drug in drugs {
        for cell in cells {
            let entry = pgt.get(drug, cell).ok_or_else(|| {
                Error::invalid(format!("no pseudo-ground truth for drug '{drug}' and cell line '{cell}'"))
            })?;
            let x = expr
                .row(cell)
                .ok_or_else(|| Error::invalid(format!("cell line '{cell}' has no expression row")))?;
            out.push(TargetCase::new(x, entry.weights.clone())?);
        }
    }
    Ok(out)
}

fn encode_file_stem(drug: &str) -> String {
    let mut out = String::with_capacity(drug.len());
    for b in drug.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.' && !out.is_empty() {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn decode_file_stem(stem: &str) -> Option<String> {
    let bytes = stem.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = stem.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

pub fn cache_path(dir: &Path, drug: &str) -> PathBuf {
    dir.join(format!("{}.csv", encode_file_stem(drug)))
}

/// Writes one CSV per drug into `dir`, creating it if needed.
pub fn write_cache(dir: &Path, pgt: &PseudoGroundTruth) -> Result<()> {
    fs::create_dir_all(dir)?;
    for drug in pgt.drugs() {
        let mut w = csv::Writer::from_writer(File::create(cache_path(dir, &drug))?);
        let mut header = vec!["cell_line".to_string(), "lambda_min".to_string(), "center".to_string()];
        header.extend(pgt.gene_ids.iter().cloned());
        w.write_record(&header).map_err(csv_error)?;
        for e in pgt.entries().filter(|e| e.drug == drug) {
            let mut record = vec![e.held_out.clone(), e.lambda_min.to_string(), e.center.to_string()];
            record.extend(e.weights.as_array().iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Reads every `*.csv` in `dir`. All files must list the same genes.
pub fn read_cache(dir: &Path) -> Result<PseudoGroundTruth> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("pseudo-ground-truth cache '{}' not found", dir.display()),
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    let mut pgt: Option<PseudoGroundTruth> = None;
    for path in paths {
        let name = path.display().to_string();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let drug = decode_file_stem(stem)
            .ok_or_else(|| parse_error(&name, 0, "cache file name is not a valid drug id"))?;
        let records = read_records(File::open(&path)?, &name)?;
        let mut iter = records.into_iter();
        let header = iter.next().ok_or_else(|| parse_error(&name, 1, "empty cache file"))?;
        let fixed: Vec<&str> = header.iter().take(3).collect();
        if fixed != ["cell_line", "lambda_min", "center"] {
            return Err(parse_error(&name, 1, "header must start with 'cell_line,lambda_min,center'"));
        }
        let genes: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let table = pgt.get_or_insert_with(|| PseudoGroundTruth::new(genes.clone()));
        if table.gene_ids != genes {
            return Err(parse_error(&name, 1, "gene list differs from other cache files"));
        }
        for record in iter {
            let line = record_line(&record);
            if record.len() != genes.len() + 3 {
                return Err(parse_error(
                    &name,
                    line,
                    format!("expected {} fields, found {}", genes.len() + 3, record.len()),
                ));
            }
            let weights: Vec<f64> = record
                .iter()
                .skip(3)
                .map(|f| parse_value(f, &name, line))
                .collect::<Result<_>>()?;
            table.insert(GroundTruthEntry {
                drug: drug.clone(),
                held_out: record[0].to_string(),
                weights: WeightVector::from_vec(weights)?,
                lambda_min: parse_value(&record[1], &name, line)?,
                center: parse_value(&record[2], &name, line)?,
            })?;
        }
    }
    pgt.ok_or_else(|| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("pseudo-ground-truth cache '{}' holds no CSV files", dir.display()),
        ))
    })
}

/// Shape of a synthetic table pair in the layout of a drug-screening
/// dataset, for demos and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub cell_lines: usize,
    pub genes: usize,
    pub drugs: usize,
    /// Genes with a nonzero effect on each drug's response.
    pub active_genes: usize,
    /// Standard deviation of the response noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            cell_lines: 60,
            genes: 40,
            drugs: 3,
            active_genes: 3,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

/// Log2-scale expression around 5, and per drug a response that is an
/// offset plus a sparse linear function of expression plus noise. Returns
/// the tables and the planted weights of each drug.
pub fn planted_fixture(spec: &FixtureSpec) -> Result<(ExpressionTable, ResponseTable, Vec<WeightVector>)> {
    if spec.active_genes > spec.genes || spec.cell_lines == 0 || spec.drugs == 0 {
        return Err(Error::invalid(format!("infeasible fixture {spec:?}")));
    }
    let mut rng = seed::rng(spec.seed);
    let cells: Vec<String> = (1..=spec.cell_lines).map(|i| format!("CL{i:04}")).collect();
    let genes: Vec<String> = (1..=spec.genes).map(|i| format!("G{i:03}")).collect();
    let values = Array2::from_shape_simple_fn((spec.cell_lines, spec.genes), || {
        5.0 + rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let expr = ExpressionTable::new(cells.clone(), genes, values)?;
    let mut planted = Vec::with_capacity(spec.drugs);
    let mut records = Vec::with_capacity(spec.drugs * spec.cell_lines);
    for d in 1..=spec.drugs {
        let mut order: Vec<usize> = (0..spec.genes).collect();
        order.shuffle(&mut rng);
        let mut theta = Array1::zeros(spec.genes);
        for &g in &order[..spec.active_genes] {
            let magnitude = rng.random_range(0.5..1.5);
            theta[g] = if rng.random::<bool>() { magnitude } else { -magnitude };
        }
        let offset = rng.random_range(-2.0..2.0);
        for (i, cell) in cells.iter().enumerate() {
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            records.push(ResponseRecord {
                cell_line: cell.clone(),
                drug: format!("DRUG{d:02}"),
                log_ic50: offset + expr.values.row(i).dot(&theta) + spec.noise_sd * noise,
            });
        }
        planted.push(WeightVector::new(theta)?);
    }
    Ok((expr, ResponseTable::new(records)?, planted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_expression_table() {
        let t = parse_expression("cell_line,g1,g2\nA,1.5,2\nB,0,-1\n".as_bytes(), "x").unwrap();
        assert_eq!(t.values().dim(), (2, 2));
        assert_eq!(t.gene_ids(), ["g1", "g2"]);
        assert_eq!(t.row("B").unwrap().to_vec(), vec![0.0, -1.0]);
    }

    #[test]
    fn raw_scale_is_log_transformed() {
        let t = parse_expression("cell_line,g1\n#scale=raw\nA,3\n".as_bytes(), "x").unwrap();
        assert_eq!(t.values()[[0, 0]], 2.0);
        let t = parse_expression("cell_line,g1\n#scale=log2\nA,3\n".as_bytes(), "x").unwrap();
        assert_eq!(t.values()[[0, 0]], 3.0);
        assert!(parse_expression("cell_line,g1\n#scale=ln\nA,3\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn expression_errors_name_the_line() {
        let err = parse_expression("cell_line,g1\nA,1\nB,2\nA,3\n".as_bytes(), "e.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = parse_expression("cell_line,g1\nA,x\n".as_bytes(), "e.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_expression("cell_line,g1,g2\nA,1\n".as_bytes(), "e.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_expression("gene,g1\n".as_bytes(), "e.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn responses() {
        let t = parse_responses("cell_line,drug,log_ic50\nA,d1,0.5\nB,d1,-1.25\n".as_bytes(), "r").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("B", "d1"), Some(-1.25));
        assert_eq!(t.get("B", "d2"), None);
        let err = parse_responses("cell_line,drug,log_ic50\nA,d1,0.5\nA,d1,1\n".as_bytes(), "r").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let empty = parse_responses("cell_line,drug,log_ic50\n".as_bytes(), "r").unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn tables_round_trip() {
        let t = parse_expression(
            "cell_line,g1,g2\n#scale=raw\nA,3,0.1\nB,1e3,7\n".as_bytes(),
            "x",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_expression(&t, &mut buf).unwrap();
        assert_eq!(parse_expression(buf.as_slice(), "y").unwrap(), t);

        let r = parse_responses("cell_line,drug,log_ic50\nA,d,0.1\nB,d,-3.3333333333333335\n".as_bytes(), "r")
            .unwrap();
        let mut buf = Vec::new();
        write_responses(&r, &mut buf).unwrap();
        assert_eq!(parse_responses(buf.as_slice(), "r").unwrap(), r);
    }

    #[test]
    fn file_stems_round_trip() {
        for drug in ["Nutlin-3a", "AZD 6244", "17-AAG", "a/b", ".x", "ä"] {
            let stem = encode_file_stem(drug);
            assert!(!stem.contains('/') && !stem.starts_with('.'));
            assert_eq!(decode_file_stem(&stem).unwrap(), drug);
        }
    }

    #[test]
    fn gene_filter_keeps_table_order() {
        let t = parse_expression("cell_line,g1,g2,g3\nA,1,2,3\n".as_bytes(), "x").unwrap();
        let f = t.restrict_genes(&["g3".into(), "g1".into(), "zz".into()]).unwrap();
        assert_eq!(f.gene_ids(), ["g1", "g3"]);
        assert_eq!(f.values()[[0, 1]], 3.0);
        assert!(t.restrict_genes(&["zz".into()]).is_err());
    }
}
