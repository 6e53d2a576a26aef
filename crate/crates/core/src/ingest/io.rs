//! Readers and writers for the raw cleaning inputs.
//!
//! * observations: `person_id,component_id,value,unit,date` (date `YYYY-MM-DD`)
//! * component specs: `component_id,unit,critical_low,critical_high,normal_low,normal_high,zero_allowed[,conversions]`
//!   with empty cells for absent ranges and `conversions` as `unit=factor;unit=factor`
//! * demographics: `person_id,birth_date,sex`

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ComponentSpec, Demographics, LabObservation, UnitConversion};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRecord {
    person_id: String,
    component_id: String,
    value: f64,
    unit: String,
    date: NaiveDate,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecRecord {
    component_id: String,
    unit: String,
    critical_low: Option<f64>,
    critical_high: Option<f64>,
    normal_low: Option<f64>,
    normal_high: Option<f64>,
    zero_allowed: bool,
    #[serde(default)]
    conversions: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemographicsRecord {
    person_id: String,
    birth_date: NaiveDate,
    sex: u8,
}

fn parse_conversions(text: &str) -> Result<Vec<UnitConversion>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (unit, factor) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad conversion `{item}`")))?;
            let factor: f64 = factor
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad conversion factor in `{item}`")))?;
            Ok(UnitConversion {
                from_unit: unit.trim().to_string(),
                factor,
            })
        })
        .collect()
}

pub fn read_specs<R: Read>(reader: R) -> Result<Vec<ComponentSpec>> {
    let mut out = Vec::new();
    for record in csv::Reader::from_reader(reader).deserialize() {
        let r: SpecRecord = record?;
        let spec = ComponentSpec {
            component_id: r.component_id,
            unit: r.unit,
            critical_low: r.critical_low,
            critical_high: r.critical_high,
            normal_low: r.normal_low,
            normal_high: r.normal_high,
            zero_allowed: r.zero_allowed,
            conversions: parse_conversions(r.conversions.as_deref().unwrap_or(""))?,
        };
        spec.validate()?;
        out.push(spec);
    }
    Ok(out)
}

pub fn write_specs<W: Write>(writer: W, specs: &[ComponentSpec]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in specs {
        let conversions = s
            .conversions
            .iter()
            .map(|c| format!("{}={}", c.from_unit, c.factor))
            .collect::<Vec<_>>()
            .join(";");
        w.serialize(SpecRecord {
            component_id: s.component_id.clone(),
            unit: s.unit.clone(),
            critical_low: s.critical_low,
            critical_high: s.critical_high,
            normal_low: s.normal_low,
            normal_high: s.normal_high,
            zero_allowed: s.zero_allowed,
            conversions: Some(conversions),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads observations, converting each value into its component's
/// standard unit.
pub fn read_observations<R: Read>(
    reader: R,
    specs: &HashMap<String, ComponentSpec>,
) -> Result<Vec<LabObservation>> {
    let mut out = Vec::new();
    for (line, record) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let r: ObservationRecord = record?;
        let spec = specs
            .get(&r.component_id)
            .ok_or_else(|| Error::UnknownComponent(r.component_id.clone()))?;
        if !r.value.is_finite() {
            return Err(Error::NonFinite(format!("observation on data line {}", line + 1)));
        }
        out.push(LabObservation {
            value: spec.to_standard_unit(r.value, &r.unit)?,
            person_id: r.person_id,
            component_id: r.component_id,
            observed_at: r.date,
        });
    }
    Ok(out)
}

pub fn write_observations<W: Write>(
    writer: W,
    obs: &[LabObservation],
    units: &HashMap<String, String>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in obs {
        w.serialize(ObservationRecord {
            person_id: o.person_id.clone(),
            component_id: o.component_id.clone(),
            value: o.value,
            unit: units.get(&o.component_id).cloned().unwrap_or_default(),
            date: o.observed_at,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_demographics<R: Read>(reader: R) -> Result<HashMap<String, Demographics>> {
    let mut out = HashMap::new();
    for record in csv::Reader::from_reader(reader).deserialize() {
        let r: DemographicsRecord = record?;
        if r.sex > 1 {
            return Err(Error::InvalidInput(format!(
                "person `{}`: sex must be 0 or 1",
                r.person_id
            )));
        }
        out.insert(
            r.person_id,
            Demographics {
                birth_date: r.birth_date,
                sex: r.sex,
            },
        );
    }
    Ok(out)
}

pub fn write_demographics<W: Write>(writer: W, demos: &[(String, Demographics)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (person_id, d) in demos {
        w.serialize(DemographicsRecord {
            person_id: person_id.clone(),
            birth_date: d.birth_date,
            sex: d.sex,
        })?;
    }
    w.flush()?;
    Ok(())
}
