//! CSV formats shared by the pipeline stages.
//!
//! * cross-section: `person_id,<component...>,age,sex,window`
//! * rates: `person_id,r1..rn,bioage1..bioagen,age`
//! * outcomes: `person_id,outcome_id,first_diagnosis_month`
//! * costs: `person_id,cost_type,year_offset,amount`
//!
//! Floats are written with the shortest representation that round-trips.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{AssociationResult, ClusterModel, CostMode, CostRecord, CostReport, OutcomeEvent};
use crate::select::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::ingest::CrossSection;
use crate::matrix::Matrix;
use crate::month::Month;
use crate::vae::RateMatrix;

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{field}`")))
}

pub fn write_cross_section<W: Write>(writer: W, cs: &CrossSection) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["person_id".to_string()];
    header.extend(cs.component_ids.iter().cloned());
    header.extend(["age", "sex", "window"].map(String::from));
    w.write_record(&header)?;
    for i in 0..cs.n_persons() {
        let mut rec = vec![cs.person_ids[i].clone()];
        rec.extend(cs.values.row(i).iter().map(f64::to_string));
        rec.push(cs.age[i].to_string());
        rec.push(cs.sex[i].to_string());
        rec.push(cs.window[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cross_section<R: Read>(reader: R) -> Result<CrossSection> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let m = header.len();
    if m < 5 || header[0] != "person_id" || header[m - 3..] != ["age", "sex", "window"] {
        return Err(Error::Parse(
            "cross-section header must be person_id,<components>,age,sex,window".into(),
        ));
    }
    let component_ids = header[1..m - 3].to_vec();
    let (mut ids, mut values, mut age, mut sex, mut window) = (vec![], vec![], vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        for j in 1..m - 3 {
            values.push(parse_f64(&rec[j], "value")?);
        }
        age.push(parse_f64(&rec[m - 3], "age")?);
        sex.push(
            rec[m - 2]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad sex `{}`", &rec[m - 2])))?,
        );
        window.push(rec[m - 1].parse::<Month>()?);
    }
    let n = ids.len();
    CrossSection::new(ids, component_ids.clone(), Matrix::from_vec(n, component_ids.len(), values)?, age, sex, window)
}

pub fn write_rates<W: Write>(writer: W, rates: &RateMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = rates.n_dims();
    let mut header = vec!["person_id".to_string()];
    header.extend((1..=d).map(|k| format!("r{k}")));
    header.extend((1..=d).map(|k| format!("bioage{k}")));
    header.push("age".into());
    w.write_record(&header)?;
    for i in 0..rates.n_persons() {
        let mut rec = vec![rates.person_ids[i].clone()];
        rec.extend(rates.rates.row(i).iter().map(f64::to_string));
        rec.extend(rates.biological_age.row(i).iter().map(f64::to_string));
        rec.push(rates.age[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rates<R: Read>(reader: R) -> Result<RateMatrix> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let d = header.iter().filter(|h| h.starts_with('r') && h[1..].parse::<usize>().is_ok()).count();
    if d == 0 || header.len() != 2 * d + 2 || header[0] != "person_id" {
        return Err(Error::Parse(
            "rates header must be person_id,r1..rn,bioage1..bioagen,age".into(),
        ));
    }
    let (mut ids, mut values, mut age) = (vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        for k in 0..d {
            values.push(parse_f64(&rec[1 + k], "rate")?);
        }
        age.push(parse_f64(&rec[2 * d + 1], "age")?);
    }
    let n = ids.len();
    RateMatrix::new(ids, Matrix::from_vec(n, d, values)?, age)
}

pub fn read_outcomes<R: Read>(reader: R) -> Result<Vec<OutcomeEvent>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_outcomes<W: Write>(writer: W, events: &[OutcomeEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_costs<R: Read>(reader: R) -> Result<Vec<CostRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_costs<W: Write>(writer: W, costs: &[CostRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for c in costs {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_clusters<W: Write>(writer: W, person_ids: &[String], model: &ClusterModel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["person_id", "cluster"])?;
    for (p, c) in person_ids.iter().zip(&model.assignments) {
        w.write_record([p.as_str(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_association_table<W: Write>(writer: W, results: &[AssociationResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "outcome", "covariate", "coefficient", "std_error", "odds_ratio", "or_low", "or_high", "p_value",
    ])?;
    for r in results {
        let f = &r.fit;
        for j in 0..f.names.len() {
            w.write_record([
                r.outcome_id.clone(),
                f.names[j].clone(),
                f.coefficients[j].to_string(),
                f.std_errors[j].to_string(),
                f.odds_ratios[j].to_string(),
                f.or_low[j].to_string(),
                f.or_high[j].to_string(),
                f.p_values[j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serde name of a unit enum variant.
fn variant_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// A cost report labelled with the cost type it was computed on.
pub type LabelledReport<'a> = (&'a str, &'a CostReport);

pub fn write_test_report<W: Write>(writer: W, reports: &[LabelledReport<'_>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "cost_type", "mode", "test", "group_a", "group_b", "alternative", "statistic", "p_value", "adjusted_p",
        "significant",
    ])?;
    for (cost_type, report) in reports {
        let mode = variant_name(&report.mode);
        for t in &report.tests {
            w.write_record([
                cost_type.to_string(),
                mode.clone(),
                variant_name(&t.test),
                t.group_a.clone(),
                t.group_b.clone(),
                t.alternative.as_ref().map(variant_name).unwrap_or_default(),
                t.statistic.to_string(),
                t.p_value.to_string(),
                t.adjusted_p.map(|p| p.to_string()).unwrap_or_default(),
                t.significant.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummaryRow {
    pub cost_type: String,
    pub mode: CostMode,
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

pub fn write_group_summary<W: Write>(writer: W, reports: &[LabelledReport<'_>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (cost_type, report) in reports {
        for g in &report.groups {
            w.serialize(GroupSummaryRow {
                cost_type: cost_type.to_string(),
                mode: report.mode,
                group: g.label.clone(),
                n: g.n,
                mean: g.mean,
                median: g.median,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_group_summary<R: Read>(reader: R) -> Result<Vec<GroupSummaryRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// `person_id,r1..rn` without biological ages.
pub fn write_true_rates<W: Write>(writer: W, person_ids: &[String], rates: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["person_id".to_string()];
    header.extend((1..=rates.cols()).map(|k| format!("r{k}")));
    w.write_record(&header)?;
    for (i, p) in person_ids.iter().enumerate() {
        let mut rec = vec![p.clone()];
        rec.extend(rates.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonOutcome {
    pub person_id: String,
    pub outcome: u8,
    pub cost: f64,
}

/// `person_id,outcome,cost` with the outcome as 0/1.
pub fn write_person_outcomes<W: Write>(writer: W, person_ids: &[String], outcome: &[bool], cost: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for ((p, y), c) in person_ids.iter().zip(outcome).zip(cost) {
        w.serialize(PersonOutcome {
            person_id: p.clone(),
            outcome: u8::from(*y),
            cost: *c,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Cluster labels keyed by person, in file order.
pub fn read_clusters<R: Read>(reader: R) -> Result<Vec<(String, usize)>> {
    #[derive(Deserialize)]
    struct Row {
        person_id: String,
        cluster: usize,
    }
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r: std::result::Result<Row, csv::Error>| r.map(|r| (r.person_id, r.cluster)).map_err(Error::from))
        .collect()
}

/// Feature-by-dimension correlations: `component,r1..rn`.
pub fn write_correlations<W: Write>(writer: W, c: &CorrelationMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["component".to_string()];
    header.extend((1..=c.dim_count).map(|k| format!("r{k}")));
    w.write_record(&header)?;
    for (j, id) in c.component_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(c.values.row(j).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Row labels, column labels and values of a correlation table.
pub fn read_correlations<R: Read>(reader: R) -> Result<(Vec<String>, Vec<String>, Matrix)> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 2 || header[0] != "component" {
        return Err(Error::Parse("correlation table needs `component,<dims...>` header".into()));
    }
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse("ragged correlation table".into()));
        }
        rows.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            values.push(parse_f64(field, "correlation")?);
        }
    }
    let n = rows.len();
    Ok((rows, header[1..].to_vec(), Matrix::from_vec(n, header.len() - 1, values)?))
}
