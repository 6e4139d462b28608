use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::rate::{eta_sensitivity, weak_rate, RateExperiment};
use super::report::{loglog_svg, rate_rows, singularity_rows, write_csv, write_json, CsvRow};
use super::singularity::{gate_cross_check, hoelder_dimension_gate, singularity_rate, HittingExperiment};
use super::spec::{level_potential, sampler, EtaSpec, McSpec};
use super::suite::{energy_solution_suite, SuiteConfig};
use crate::drift::{condition_report, DriftSpec};
use crate::par::Execution;
use crate::{Error, Result};

/// Keys inherited by every experiment entry that does not set them.
const SHARED: [&str; 5] = ["drift", "levels", "mc", "eta", "fs"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub drift: DriftSpec,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub delta: f64,
    pub eps: Vec<f64>,
    /// Optional Monte Carlo cross-check of the hitting probabilities.
    #[serde(default)]
    pub mc: Option<McSpec>,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default = "uniform")]
    pub eta: EtaSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

fn uniform() -> EtaSpec {
    EtaSpec::Uniform
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    WeakRate,
    EtaSensitivity,
    Singularity,
    Suite,
    Gate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub status: EntryStatus,
    pub error: Option<String>,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// SHA-256 of the configuration bytes.
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Overrides the configuration's seed.
    pub seed: Option<u64>,
    pub execution: Execution,
}

/// Seed of entry `index`, derived from the run seed unless the entry sets one.
pub fn entry_seed(run_seed: u64, index: usize) -> u64 {
    // splitmix64 step
    let mut z = run_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn typed<T: DeserializeOwned>(v: Value, at: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { at.to_string() } else { format!("{at}.{path}") };
        Error::config(field, e.into_inner().to_string())
    })
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub enum Planned {
    WeakRate(RateExperiment),
    EtaSensitivity(RateExperiment, Vec<EtaSpec>),
    Singularity(HittingExperiment),
    Suite(SuiteConfig),
    Gate(GateConfig),
}

#[derive(Debug, Clone)]
pub struct PlannedEntry {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub plan: Planned,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub seed: u64,
    pub entries: Vec<PlannedEntry>,
}

/// Parses and validates a configuration. Shared keys are copied into each
/// entry, a top-level `grid` fills in `drift.grid`, and seeds come from the
/// run seed.
pub fn parse_config(text: &str, seed: Option<u64>) -> Result<Plan> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let Value::Object(root) = root else {
        return Err(Error::config("<root>", "configuration must be a JSON object"));
    };
    let run_seed = match (seed, root.get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v.as_u64().ok_or_else(|| Error::config("seed", "must be a non-negative integer"))?,
        (None, None) => 0,
    };
    let list = match root.get("experiments") {
        None => return Err(Error::config("experiments", "missing field")),
        Some(Value::Array(a)) => a.clone(),
        Some(_) => return Err(Error::config("experiments", "must be an array")),
    };
    let mut entries = Vec::with_capacity(list.len());
    let mut names = std::collections::HashSet::new();
    for (i, raw) in list.into_iter().enumerate() {
        let at = format!("experiments[{i}]");
        let Value::Object(mut obj) = raw else {
            return Err(Error::config(at, "entry must be an object"));
        };
        let kind: ExperimentKind = typed(obj.remove("kind").ok_or_else(|| Error::config(format!("{at}.kind"), "missing field"))?, &format!("{at}.kind"))?;
        let name = match obj.remove("name") {
            Some(Value::String(s)) => s,
            None => format!("{i:02}-{}", serde_json::to_value(kind)?.as_str().unwrap_or("exp")),
            Some(_) => return Err(Error::config(format!("{at}.name"), "must be a string")),
        };
        if !names.insert(name.clone()) || name.contains(['/', '\\']) || name.is_empty() {
            return Err(Error::config(format!("{at}.name"), format!("`{name}` is duplicated or not a plain directory name")));
        }
        for key in SHARED {
            if !obj.contains_key(key) {
                if let Some(v) = root.get(key) {
                    obj.insert(key.into(), v.clone());
                }
            }
        }
        if let (Some(grid), Some(Value::Object(d))) = (root.get("grid"), obj.get_mut("drift")) {
            d.entry("grid").or_insert_with(|| grid.clone());
        }
        let seed = match obj.get("seed") {
            Some(v) => v.as_u64().ok_or_else(|| Error::config(format!("{at}.seed"), "must be a non-negative integer"))?,
            None => {
                let s = entry_seed(run_seed, i);
                obj.insert("seed".into(), Value::from(s));
                s
            }
        };
        let plan = plan_entry(kind, obj, &at)?;
        entries.push(PlannedEntry { name, kind, seed, plan });
    }
    Ok(Plan { seed: run_seed, entries })
}

/// Plans a single experiment object of the given kind. A `grid` key fills
/// in `drift.grid` and `seed` overrides the object's own seed.
pub fn plan_single(kind: ExperimentKind, text: &str, seed: Option<u64>) -> Result<PlannedEntry> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let Value::Object(mut obj) = v else {
        return Err(Error::config("<root>", "experiment must be a JSON object"));
    };
    let mut root = Map::new();
    if let Some(g) = obj.remove("grid") {
        root.insert("grid".into(), g);
    }
    obj.remove("kind");
    obj.remove("name");
    if let Some(s) = seed {
        obj.insert("seed".into(), Value::from(s));
    }
    obj.insert("kind".into(), serde_json::to_value(kind)?);
    obj.insert("name".into(), Value::from("single"));
    root.insert("experiments".into(), Value::Array(vec![Value::Object(obj)]));
    let mut plan = parse_config(&Value::Object(root).to_string(), None)?;
    let mut entry = plan.entries.remove(0);
    entry.name = serde_json::to_value(kind)?.as_str().unwrap_or("single").to_string();
    Ok(entry)
}

fn plan_entry(kind: ExperimentKind, mut obj: Map<String, Value>, at: &str) -> Result<Planned> {
    match kind {
        ExperimentKind::WeakRate => Ok(Planned::WeakRate(typed(Value::Object(obj), at)?)),
        ExperimentKind::EtaSensitivity => {
            let etas = obj.remove("etas").ok_or_else(|| Error::config(format!("{at}.etas"), "missing field"))?;
            let etas: Vec<EtaSpec> = typed(etas, &format!("{at}.etas"))?;
            Ok(Planned::EtaSensitivity(typed(Value::Object(obj), at)?, etas))
        }
        ExperimentKind::Singularity => {
            obj.remove("levels");
            Ok(Planned::Singularity(typed(Value::Object(obj), at)?))
        }
        ExperimentKind::Suite => {
            obj.remove("levels");
            obj.remove("fs");
            Ok(Planned::Suite(typed(Value::Object(obj), at)?))
        }
        ExperimentKind::Gate => {
            for k in ["levels", "fs"] {
                obj.remove(k);
            }
            Ok(Planned::Gate(typed(Value::Object(obj), at)?))
        }
    }
}

/// Sets the execution mode of a planned experiment.
pub fn set_execution(plan: &mut Planned, exec: Execution) {
    match plan {
        Planned::WeakRate(e) | Planned::EtaSensitivity(e, _) => e.execution = exec,
        Planned::Singularity(e) => e.execution = exec,
        Planned::Suite(e) => e.execution = exec,
        Planned::Gate(e) => e.execution = exec,
    }
}

fn svg(dir: &Path, file: &str, title: &str, xlabel: &str, rows: &[CsvRow], fit: Option<&crate::stats::LineFit>) -> Result<String> {
    fs::write(dir.join(file), loglog_svg(title, xlabel, rows, fit))?;
    Ok(file.to_string())
}

/// Runs one planned entry and writes its outputs into `dir`.
pub fn execute(entry: &PlannedEntry, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut out = vec!["report.json".to_string()];
    match &entry.plan {
        Planned::WeakRate(e) => {
            let r = weak_rate(e)?;
            write_json(dir.join("report.json"), &r)?;
            let rows = rate_rows(&r);
            write_csv(dir.join("levels.csv"), &rows)?;
            out.push("levels.csv".into());
            let errs: Vec<CsvRow> = rows.into_iter().filter(|r| r.series == "error").collect();
            out.push(svg(dir, "rate.svg", &format!("{}: weak error", entry.name), "n", &errs, r.fit.as_ref())?);
        }
        Planned::EtaSensitivity(e, etas) => {
            let r = eta_sensitivity(e, etas)?;
            write_json(dir.join("report.json"), &r)?;
            let rows: Vec<CsvRow> = r
                .rows
                .iter()
                .flat_map(|row| {
                    rate_rows(&row.report).into_iter().filter(|c| c.series == "error").map(|mut c| {
                        c.series = row.eta.clone();
                        c
                    })
                })
                .collect();
            write_csv(dir.join("levels.csv"), &rows)?;
            out.push("levels.csv".into());
        }
        Planned::Singularity(e) => {
            let r = singularity_rate(e)?;
            write_json(dir.join("report.json"), &r)?;
            let rows = singularity_rows(&r);
            write_csv(dir.join("eps.csv"), &rows)?;
            out.push("eps.csv".into());
            let hits: Vec<CsvRow> = rows.into_iter().filter(|c| c.series == "hit_reference").collect();
            out.push(svg(dir, "hitting.svg", &format!("{}: P(tau < T)", entry.name), "eps", &hits, r.hit_fit.as_ref())?);
        }
        Planned::Suite(c) => {
            let r = energy_solution_suite(c)?;
            write_json(dir.join("report.json"), &r)?;
        }
        Planned::Gate(c) => {
            let grid = c.drift.grid.build()?;
            let cond = condition_report(&c.drift, grid.dim());
            let alpha = c.alpha.unwrap_or(cond.alpha);
            let k = c.drift.singular_set();
            let horizon = c.mc.as_ref().map_or(1.0, |m| m.horizon);
            let mut r = hoelder_dimension_gate(&k, &grid, alpha, c.delta, &c.eps, horizon)?;
            if let Some(mc) = &c.mc {
                let a = c.drift.build_on(&grid)?;
                let a = match c.level {
                    Some(n) => level_potential(&a, n)?,
                    None => a,
                };
                let mut sim = mc.sim(c.seed);
                sim.execution = c.execution;
                gate_cross_check(&mut r, &k, &sim, &sampler(&a, mc)?, &c.eta.build(&grid)?, &c.eps)?;
            }
            write_json(dir.join("report.json"), &r)?;
        }
    }
    Ok(out)
}

fn hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Executes every entry of the configuration at `path` into `out`. A failing
/// entry is recorded and the remaining ones still run.
pub fn run_config(path: impl AsRef<Path>, out: impl AsRef<Path>, opts: &RunOptions) -> Result<Manifest> {
    let bytes = fs::read(path.as_ref())?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::config("<root>", e.to_string()))?;
    let mut plan = parse_config(&text, opts.seed)?;
    let out: PathBuf = out.as_ref().to_path_buf();
    if out.exists() && fs::read_dir(&out)?.next().is_some() {
        if !opts.force {
            return Err(Error::config("--out", format!("{} exists and is not empty; pass --force to overwrite", out.display())));
        }
    }
    fs::create_dir_all(&out)?;
    let mut entries = Vec::with_capacity(plan.entries.len());
    for e in &mut plan.entries {
        set_execution(&mut e.plan, opts.execution);
        let start = Instant::now();
        let res = execute(e, &out.join(&e.name));
        let wall_seconds = start.elapsed().as_secs_f64();
        entries.push(match res {
            Ok(files) => ManifestEntry {
                name: e.name.clone(),
                kind: e.kind,
                seed: e.seed,
                status: EntryStatus::Ok,
                error: None,
                wall_seconds,
                outputs: files.into_iter().map(|f| format!("{}/{f}", e.name)).collect(),
            },
            Err(err) => ManifestEntry {
                name: e.name.clone(),
                kind: e.kind,
                seed: e.seed,
                status: EntryStatus::Failed,
                error: Some(err.to_string()),
                wall_seconds,
                outputs: vec![],
            },
        });
    }
    let manifest = Manifest {
        config_hash: hash(&bytes),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: plan.seed,
        threads: crate::par::threads(),
        entries,
    };
    write_json(out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
