use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use agingrates_core::cohort::CostMode;
use agingrates_core::io::{read_clusters, read_correlations, read_group_summary, read_rates, GroupSummaryRow};
use agingrates_core::numeric::quantile_sorted;
use agingrates_core::{Matrix, RateMatrix};
use serde::{Deserialize, Serialize};

use super::{required, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;
use crate::svg::{diverging, nice_max, Svg, PALETTE};

pub const CORRELATIONS: &str = "correlations.csv";
pub const COST_GROUPS: &str = "cost_groups.csv";
pub const RATES: &str = "rates.csv";
pub const CLUSTERS: &str = "clusters.csv";

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory holding analysis tables (searched together with its
    /// immediate subdirectories).
    #[arg(long)]
    pub analysis_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub analysis_dir: Option<PathBuf>,
}

/// First match of `name` in `dir`, then in its subdirectories by name.
fn locate(dir: &Path, name: &str) -> CliResult<Option<PathBuf>> {
    let direct = dir.join(name);
    if direct.is_file() {
        return Ok(Some(direct));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| invalid(format!("analysis dir {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    Ok(subdirs.into_iter().map(|d| d.join(name)).find(|p| p.is_file()))
}

pub fn heatmap(rows: &[String], cols: &[String], values: &Matrix) -> Vec<u8> {
    let cell = 28.0;
    let left = 12.0 + 7.0 * rows.iter().map(String::len).max().unwrap_or(1) as f64;
    let top = 40.0;
    let width = left + cell * cols.len() as f64 + 90.0;
    let height = top + cell * rows.len() as f64 + 20.0;
    let mut svg = Svg::new(width, height);
    svg.text(left, 18.0, 13.0, "start", "Feature correlation with aging rates");
    for (k, c) in cols.iter().enumerate() {
        svg.text(left + cell * (k as f64 + 0.5), top - 6.0, 11.0, "middle", c);
    }
    for (j, r) in rows.iter().enumerate() {
        let y = top + cell * j as f64;
        svg.text(left - 6.0, y + cell * 0.65, 11.0, "end", r);
        for (k, c) in cols.iter().enumerate() {
            let v = values.get(j, k);
            svg.rect(
                left + cell * k as f64,
                y,
                cell,
                cell,
                &diverging(v),
                Some("cell"),
                Some(&format!("{r} {c}: {v:.3}")),
            );
        }
    }
    let lx = left + cell * cols.len() as f64 + 20.0;
    for i in 0..=10 {
        let v = 1.0 - 0.2 * i as f64;
        svg.rect(lx, top + 10.0 * i as f64, 14.0, 10.0, &diverging(v), None, None);
    }
    svg.text(lx + 18.0, top + 9.0, 10.0, "start", "+1");
    svg.text(lx + 18.0, top + 109.0, 10.0, "start", "-1");
    svg.finish()
}

/// Bars of mean cumulative cost per group, one panel per cost type.
pub fn cost_bars(rows: &[GroupSummaryRow]) -> Vec<u8> {
    let mut panels: BTreeMap<&str, Vec<&GroupSummaryRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.mode == CostMode::FastVsSlow) {
        panels.entry(r.cost_type.as_str()).or_default().push(r);
    }
    let bar = 22.0;
    let max_bars = panels.values().map(Vec::len).max().unwrap_or(1).max(1);
    let panel_w = 70.0 + bar * 1.5 * max_bars as f64;
    let panel_h = 220.0;
    let mut svg = Svg::new(20.0 + panel_w * panels.len().max(1) as f64, panel_h + 80.0);
    svg.text(20.0, 18.0, 13.0, "start", "Mean cumulative cost by ager group");
    for (p, (cost_type, groups)) in panels.iter().enumerate() {
        let x0 = 20.0 + panel_w * p as f64 + 50.0;
        let (y0, h) = (40.0, panel_h - 40.0);
        let top = nice_max(groups.iter().map(|g| g.mean).fold(0.0, f64::max));
        svg.text(x0, y0 - 6.0, 12.0, "start", cost_type);
        svg.line(x0, y0, x0, y0 + h, "black");
        svg.line(x0, y0 + h, x0 + bar * 1.5 * groups.len() as f64, y0 + h, "black");
        svg.text(x0 - 4.0, y0 + 4.0, 10.0, "end", &format!("{top}"));
        svg.text(x0 - 4.0, y0 + h, 10.0, "end", "0");
        for (i, g) in groups.iter().enumerate() {
            let bh = if g.mean.is_finite() { h * (g.mean / top).max(0.0) } else { 0.0 };
            let x = x0 + bar * (0.25 + 1.5 * i as f64);
            let dim = g.group.rsplit('_').next().unwrap_or("");
            let colour_index = dim.trim_start_matches('r').parse::<usize>().unwrap_or(1).saturating_sub(1);
            let fill = if g.group.starts_with("slow") { "#bab0ac" } else { PALETTE[colour_index % PALETTE.len()] };
            svg.rect(x, y0 + h - bh, bar, bh, fill, Some("bar"), Some(&format!("{}: mean {:.2}, n {}", g.group, g.mean, g.n)));
            svg.vtext(x + bar * 0.65, y0 + h + 6.0, 10.0, &g.group);
        }
    }
    svg.finish()
}

/// Box plots of each rate dimension per cluster (whiskers at the 5th and
/// 95th percentiles).
pub fn rate_boxes(rates: &RateMatrix, assignments: &[usize], k: usize) -> Vec<u8> {
    let d = rates.n_dims();
    let box_w = 18.0;
    let panel_w = 60.0 + box_w * 1.6 * k as f64;
    let (y0, h) = (40.0, 200.0);
    let mut svg = Svg::new(20.0 + panel_w * d as f64, y0 + h + 40.0);
    svg.text(20.0, 18.0, 13.0, "start", "Aging rates by cluster");
    let lo = rates.rates.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.rates.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let y_of = |v: f64| y0 + h - h * (v - lo) / span;
    for dim in 0..d {
        let x0 = 20.0 + panel_w * dim as f64 + 40.0;
        svg.text(x0, y0 - 6.0, 12.0, "start", &format!("r{}", dim + 1));
        svg.line(x0, y0, x0, y0 + h, "black");
        svg.text(x0 - 4.0, y0 + 4.0, 10.0, "end", &format!("{hi:.2}"));
        svg.text(x0 - 4.0, y0 + h, 10.0, "end", &format!("{lo:.2}"));
        for c in 0..k {
            let mut v: Vec<f64> = (0..rates.n_persons())
                .filter(|i| assignments[*i] == c)
                .map(|i| rates.rates.get(i, dim))
                .collect();
            let x = x0 + box_w * (0.3 + 1.6 * c as f64);
            svg.text(x + box_w / 2.0, y0 + h + 14.0, 10.0, "middle", &format!("{}", c + 1));
            if v.is_empty() {
                continue;
            }
            v.sort_by(f64::total_cmp);
            let q = |p: f64| quantile_sorted(&v, p);
            let (w_lo, q1, med, q3, w_hi) = (q(0.05), q(0.25), q(0.5), q(0.75), q(0.95));
            let fill = PALETTE[c % PALETTE.len()];
            let mid = x + box_w / 2.0;
            svg.line(mid, y_of(w_hi), mid, y_of(q3), "black");
            svg.line(mid, y_of(q1), mid, y_of(w_lo), "black");
            svg.rect(
                x,
                y_of(q3),
                box_w,
                (y_of(q1) - y_of(q3)).max(0.5),
                fill,
                Some("box"),
                Some(&format!("cluster {} r{}: median {med:.3}, n {}", c + 1, dim + 1, v.len())),
            );
            svg.line(x, y_of(med), x + box_w, y_of(med), "black");
        }
    }
    svg.finish()
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let dir = required(&s.analysis_dir, "analysis-dir")?;
    if !dir.is_dir() {
        return Err(invalid(format!("analysis dir {} does not exist", dir.display())));
    }
    let need = |name: &str| -> CliResult<PathBuf> {
        locate(dir, name)?.ok_or_else(|| invalid(format!("missing input table {name} under {}", dir.display())))
    };
    let corr_path = need(CORRELATIONS)?;
    let groups_path = need(COST_GROUPS)?;
    let (rows, cols, values) = read_correlations(ctx.read(&corr_path)?.as_slice())?;
    let groups = read_group_summary(ctx.read(&groups_path)?.as_slice())?;

    let mut out = Outputs::default();
    out.add("correlation_heatmap.svg", heatmap(&rows, &cols, &values));
    if groups.iter().any(|g| g.mode == CostMode::FastVsSlow) {
        out.add("cost_means.svg", cost_bars(&groups));
    } else {
        out.warn("no fast-vs-slow cost groups; cost figure skipped");
    }

    let clusters_path = locate(dir, CLUSTERS)?;
    let rates_path = locate(dir, RATES)?;
    match (clusters_path, rates_path) {
        (Some(cp), Some(rp)) => {
            let labels = read_clusters(ctx.read(&cp)?.as_slice())?;
            let rates = read_rates(ctx.read(&rp)?.as_slice())?;
            if labels.is_empty() {
                out.warn("cluster table is empty; cluster figure skipped");
            } else {
                let index: std::collections::HashMap<&str, usize> =
                    labels.iter().map(|(p, c)| (p.as_str(), *c)).collect();
                let assignments = rates
                    .person_ids
                    .iter()
                    .map(|p| {
                        index
                            .get(p.as_str())
                            .copied()
                            .ok_or_else(|| invalid(format!("person `{p}` has rates but no cluster label")))
                    })
                    .collect::<CliResult<Vec<usize>>>()?;
                let k = assignments.iter().max().map_or(0, |m| m + 1);
                out.add("rates_by_cluster.svg", rate_boxes(&rates, &assignments, k));
            }
        }
        _ => out.warn("no cluster assignments found; cluster figure skipped"),
    }
    Ok(out)
}
