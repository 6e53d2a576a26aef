use std::collections::BTreeSet;
use std::path::PathBuf;

use agingrates_core::cohort::{cost_compare, cumulative_costs, CostMode, CostReport};
use agingrates_core::io::{read_costs, write_group_summary, write_test_report, LabelledReport};
use serde::{Deserialize, Serialize};

use super::{required, to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

/// Label for costs summed over every type.
pub const TOTAL: &str = "total";

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Rates CSV from `rates`.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Cost records CSV: person_id,cost_type,year_offset,amount.
    #[arg(long)]
    pub costs: Option<PathBuf>,
    /// Cost types to compare, comma separated (default: every type plus total).
    #[arg(long, value_delimiter = ',')]
    pub cost_types: Option<Vec<String>>,
    #[arg(long)]
    pub hi_pct: Option<f64>,
    #[arg(long)]
    pub lo_pct: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub rates: Option<PathBuf>,
    pub costs: Option<PathBuf>,
    pub cost_types: Option<Vec<String>>,
    pub hi_pct: f64,
    pub lo_pct: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rates: None,
            costs: None,
            cost_types: None,
            hi_pct: 90.0,
            lo_pct: 10.0,
        }
    }
}

#[derive(Serialize)]
struct Labelled {
    cost_type: String,
    report: CostReport,
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let rates = ctx.read_rates(required(&s.rates, "rates")?)?;
    let records = read_costs(ctx.read(required(&s.costs, "costs")?)?.as_slice())?;
    let types: Vec<String> = match &s.cost_types {
        Some(t) => t.clone(),
        None => {
            let mut t: Vec<String> = records
                .iter()
                .map(|r| r.cost_type.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            t.push(TOTAL.to_string());
            t
        }
    };
    if types.is_empty() {
        return Err(invalid("no cost types to compare"));
    }

    let mut out = Outputs::default();
    let mut reports = Vec::new();
    for t in &types {
        let filter = (t != TOTAL).then_some(t.as_str());
        let costs = cumulative_costs(&records, filter, &rates.person_ids);
        for mode in [CostMode::FastVsSlow, CostMode::AcrossDims] {
            if mode == CostMode::AcrossDims && rates.n_dims() < 2 {
                continue;
            }
            match cost_compare(&rates, &costs, mode, s.hi_pct, s.lo_pct) {
                Ok(report) => {
                    for (what, n) in &report.exclusions {
                        if *n > 0 {
                            out.warn(format!("{t}: {what} excluded {n} persons"));
                        }
                    }
                    reports.push(Labelled {
                        cost_type: t.clone(),
                        report,
                    });
                }
                Err(e) if e.is_validation() && mode == CostMode::AcrossDims => {
                    out.warn(format!("{t}: comparison across dimensions skipped: {e}"));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let labelled: Vec<LabelledReport<'_>> = reports.iter().map(|r| (r.cost_type.as_str(), &r.report)).collect();
    out.add("cost_tests.csv", to_bytes(|w| write_test_report(w, &labelled))?);
    out.add("cost_groups.csv", to_bytes(|w| write_group_summary(w, &labelled))?);
    out.add_json("cost_analysis.json", &reports)?;
    Ok(out)
}
