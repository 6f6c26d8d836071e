use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use snls::experiments::{a_from_scale, fit_a_correction, fit_blowup_rate, supercritical_rate_check};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// `ln L` against `ln (T - t)`; needs columns `t`, `L`
    Rate,
    /// `a` against `1 / ln tau` over the last decade; needs `tau`, `a`
    ACorrection,
    /// `||u||_inf (2 a (T - t))^{1/(2 sigma)}`; needs `t`, `sup_norm`
    Supercritical,
}

#[derive(Debug, Clone, clap::Args)]
pub struct FitArgs {
    /// CSV with a header row (diagnostics files work as they are)
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: FitKind,
    /// Where to write the result (default: next to the input)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Only use rows with L at least this
    #[arg(long)]
    pub l_min: Option<f64>,
    /// Only use rows with L at most this
    #[arg(long)]
    pub l_max: Option<f64>,
    /// Nonlinearity exponent (supercritical check)
    #[arg(long)]
    pub sigma: Option<u32>,
    /// Limit of a (supercritical check); default: from the `tau` and `L` columns
    #[arg(long)]
    pub a_limit: Option<f64>,
    /// Blow-up time (supercritical check); default: from a rate fit of `L`
    #[arg(long)]
    pub t_blowup: Option<f64>,
}

struct Table {
    columns: HashMap<String, Vec<f64>>,
    len: usize,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            for (k, field) in record.iter().enumerate().take(headers.len()) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .with_context(|| format!("row {}: column {} is not a number", line + 2, headers[k]))?;
                cols[k].push(v);
            }
        }
        let len = cols.first().map_or(0, Vec::len);
        if len == 0 {
            bail!("{} has no data rows", path.display());
        }
        Ok(Self {
            columns: headers.into_iter().zip(cols).collect(),
            len,
        })
    }

    fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| anyhow!("missing column `{name}`"))
    }

    /// Row indices whose `L` lies in the requested window (all rows without a window).
    fn window(&self, lo: Option<f64>, hi: Option<f64>) -> Result<Vec<usize>> {
        if lo.is_none() && hi.is_none() {
            return Ok((0..self.len).collect());
        }
        let l = self.column("L")?;
        Ok((0..self.len)
            .filter(|i| lo.map_or(true, |v| l[*i] >= v) && hi.map_or(true, |v| l[*i] <= v))
            .collect())
    }
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|i| v[*i]).collect()
}

pub fn run(args: &FitArgs) -> Result<serde_json::Value> {
    let table = Table::read(&args.input)?;
    let idx = table.window(args.l_min, args.l_max)?;
    let result = match args.kind {
        FitKind::Rate => {
            let t = pick(table.column("t")?, &idx);
            let l = pick(table.column("L")?, &idx);
            serde_json::to_value(fit_blowup_rate(&t, &l)?)?
        }
        FitKind::ACorrection => {
            let tau = pick(table.column("tau")?, &idx);
            let a = pick(table.column("a")?, &idx);
            serde_json::to_value(fit_a_correction(&tau, &a)?)?
        }
        FitKind::Supercritical => {
            let sigma = args.sigma.ok_or_else(|| anyhow!("--sigma is required"))?;
            let t = pick(table.column("t")?, &idx);
            let sup = pick(table.column("sup_norm")?, &idx);
            let a_limit = match args.a_limit {
                Some(a) => a,
                None => a_from_scale(&pick(table.column("tau")?, &idx), &pick(table.column("L")?, &idx))?,
            };
            let t_blowup = match args.t_blowup {
                Some(t) => t,
                None => fit_blowup_rate(&t, &pick(table.column("L")?, &idx))?.t_blowup,
            };
            let r = supercritical_rate_check(&t, &sup, a_limit, t_blowup, sigma)?;
            serde_json::json!({
                "sigma": sigma,
                "a_limit": a_limit,
                "t_blowup": t_blowup,
                "r_last": r.iter().rev().find(|v| v.is_finite() && **v > 0.0),
                "r": r,
            })
        }
    };
    let doc = serde_json::json!({ "kind": args.kind, "input": args.input, "fit": result });
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.with_extension("fit.json"));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;
    Ok(doc)
}
