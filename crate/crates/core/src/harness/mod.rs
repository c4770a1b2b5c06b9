//! Experiment orchestration: expands a config into cells, trains and
//! evaluates them, and appends results resumably.

mod config;
mod results;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::kg::{aggregate_runs, Dataset, Proportion, SplitKind};
use crate::oracle::{self, ClosureOptions};
use crate::seed;
use crate::synth::families::{build_family_dataset, FamilySplit};
use crate::synth::properties::{build_individual_datasets, build_joint_dataset, JOINT_COMBOS};
use crate::synth::PropertyCombo;
use crate::trainer::{select, train_candidates, CellOutcome};

pub use config::{ExperimentConfig, ExperimentKind, HarnessConfig, ModelSpec, TrainOverrides};
pub use results::{
    cell_key, read_manifest, read_results, CellStatus, ResultRow, ResultWriter, MANIFEST_FILE, RESULTS_FILE,
};

/// One unit of work: a model at one rank on one dataset.
#[derive(Debug, Clone)]
pub struct Cell {
    pub experiment: usize,
    pub split: String,
    pub p: Proportion,
    pub model: ModelSpec,
    pub rank: usize,
    pub run: usize,
}

impl Cell {
    pub fn key(&self, cfg: &HarnessConfig) -> String {
        cell_key(
            &cfg.experiments[self.experiment].name,
            &self.split,
            self.p.as_f64(),
            self.model.name(),
            self.rank,
            self.run,
        )
    }
}

/// Every cell of the config, in the order results are written.
pub fn cells(cfg: &HarnessConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for (ei, e) in cfg.experiments.iter().enumerate() {
        for (split, p) in e.data_groups() {
            for run in 0..e.runs_per_group() {
                for &model in &e.models {
                    for &rank in &e.ranks {
                        out.push(Cell { experiment: ei, split: split.clone(), p, model, rank, run });
                    }
                }
            }
        }
    }
    out
}

/// Seed of the data behind `(experiment, split, p, run)`. Folds of one
/// individual run share their matrix.
pub fn data_seed(master: u64, e: &ExperimentConfig, split: &str, p: Proportion, run: usize) -> u64 {
    let run = match e.kind {
        ExperimentKind::PropertyIndividual => run / e.folds,
        _ => run,
    };
    seed::derive_keyed(master, &format!("{}/{split}/{p}/{run}", e.name))
}

/// Dataset and oracle AP for one cell.
pub fn build_data(
    master: u64,
    e: &ExperimentConfig,
    split: &str,
    p: Proportion,
    run: usize,
) -> Result<(Dataset, Option<f64>)> {
    let s = data_seed(master, e, split, p, run);
    match e.kind {
        ExperimentKind::PropertyIndividual => {
            let combo: PropertyCombo = split.parse()?;
            let data = build_individual_datasets(combo, e.entities, s)?.swap_remove(run % e.folds);
            let ap = oracle::property_oracle_ap(&data, &[combo], ClosureOptions::default()).ok();
            if combo.transitive {
                let plain = ClosureOptions { contrapositive: false, ..ClosureOptions::default() };
                if let (Some(ap), Ok(plain)) = (ap, oracle::property_oracle_ap(&data, &[combo], plain)) {
                    log::info!("{} {split} run {run}: oracle AP {ap:.4}, without contrapositive {plain:.4}", e.name);
                }
            }
            Ok((data, ap))
        }
        ExperimentKind::PropertyJoint => {
            let data = build_joint_dataset(p, e.entities, s)?;
            let ap = oracle::property_oracle_ap(&data, &JOINT_COMBOS, ClosureOptions::default()).ok();
            Ok((data, ap))
        }
        ExperimentKind::Family => {
            let kind: SplitKind = split.parse()?;
            let data = build_family_dataset(FamilySplit::new(kind, p)?, s)?;
            let ap = oracle::family_oracle_ap(&data).ok();
            Ok((data, ap))
        }
    }
}

/// Trains and evaluates one cell; failures to converge are recorded in the row.
pub fn run_cell(cfg: &HarnessConfig, cell: &Cell, exec: Execution) -> Result<ResultRow> {
    let start = Instant::now();
    let e = &cfg.experiments[cell.experiment];
    let (data, oracle_ap) = build_data(cfg.seed, e, &cell.split, cell.p, cell.run)?;
    let train_seed = seed::derive_keyed(
        data_seed(cfg.seed, e, &cell.split, cell.p, cell.run),
        &format!("{}/{}/{}", cell.model, cell.rank, cell.run),
    );
    let tcfg = e.train_config(train_seed);
    let candidates = cell.model.candidates(cell.rank, &e.lambdas);
    let trials = train_candidates(&candidates, &tcfg, &data, exec)?;
    let chosen = select(&trials).map(|i| &trials[i]);
    let status = match chosen {
        Some(_) => CellStatus::Ok,
        None if trials.iter().any(|t| matches!(t.outcome, CellOutcome::TimedOut { .. })) => CellStatus::Timeout,
        None => CellStatus::Diverged,
    };
    Ok(ResultRow {
        experiment: e.name.clone(),
        split: cell.split.clone(),
        p: cell.p.as_f64(),
        model: cell.model.name().to_owned(),
        rank: cell.rank,
        run: cell.run,
        selected: chosen.map(|t| t.model.kind.name().to_owned()),
        lambda: chosen.map(|t| t.model.lambda),
        valid_ap: chosen.and_then(|t| t.valid_ap()),
        test_ap: chosen.and_then(|t| t.test_ap()),
        oracle_ap,
        seconds: start.elapsed().as_secs_f64(),
        seed: train_seed,
        status,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub skipped: usize,
    pub completed: usize,
    pub failed: usize,
}

/// Runs every cell not already listed in `out/completed.txt`, appending to
/// `out/results.csv` in grid order.
pub fn run(cfg: &HarnessConfig, out: &Path, exec: Execution) -> Result<RunSummary> {
    cfg.validate()?;
    let done = read_manifest(out)?;
    let all = cells(cfg);
    let pending: Vec<&Cell> = all.iter().filter(|c| !done.contains(&c.key(cfg))).collect();
    let mut summary = RunSummary { total: all.len(), skipped: all.len() - pending.len(), ..Default::default() };
    if pending.is_empty() {
        return Ok(summary);
    }
    let mut writer = ResultWriter::open(out)?;
    let width = if exec.is_parallel() { rayon_width() * 2 } else { 1 };
    for batch in pending.chunks(width.max(1)) {
        let rows = exec::map(batch, exec, |c| run_cell(cfg, c, Execution::Sequential));
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        for r in &rows {
            log::info!("{} test AP {:?} ({:.1}s)", r.key(), r.test_ap, r.seconds);
            if r.status == CellStatus::Ok {
                summary.completed += 1;
            } else {
                summary.failed += 1;
            }
        }
        writer.append(&rows)?;
    }
    Ok(summary)
}

fn rayon_width() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Aggregated test AP of one (model, K) over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub model: String,
    pub rank: usize,
    pub mean_ap: Option<f64>,
    pub std_ap: Option<f64>,
    pub oracle_ap: Option<f64>,
    pub runs: usize,
}

/// `(experiment, split, p)` of a plot table.
pub type PlotKey = (String, String, String);

/// Groups `(experiment, split, p)` → points sorted by model then K.
pub fn plot_tables(rows: &[ResultRow]) -> Result<BTreeMap<PlotKey, Vec<PlotPoint>>> {
    // Later rows win so a re-run cell replaces its earlier record.
    let mut latest: HashMap<String, &ResultRow> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if latest.insert(r.key(), r).is_none() {
            order.push(r.key());
        }
    }
    let mut groups: BTreeMap<PlotKey, BTreeMap<(String, usize), Vec<&ResultRow>>> = BTreeMap::new();
    for k in &order {
        let r = latest[k];
        groups
            .entry((r.experiment.clone(), r.split.clone(), r.p.to_string()))
            .or_default()
            .entry((r.model.clone(), r.rank))
            .or_default()
            .push(r);
    }
    let mut out = BTreeMap::new();
    for (g, cells) in groups {
        let mut points = Vec::new();
        for ((model, rank), rs) in cells {
            let aps: Vec<f64> = rs.iter().filter_map(|r| r.test_ap).collect();
            let oracles: Vec<f64> = rs.iter().filter_map(|r| r.oracle_ap).collect();
            let (mean_ap, std_ap) = match aggregate_runs(&aps) {
                Ok((m, s)) => (Some(m), Some(s)),
                Err(_) => (None, None),
            };
            let oracle_ap = aggregate_runs(&oracles).ok().map(|x| x.0);
            points.push(PlotPoint { model, rank, mean_ap, std_ap, oracle_ap, runs: aps.len() });
        }
        out.insert(g, points);
    }
    Ok(out)
}

/// Writes one CSV per `(experiment, split, p)` with columns
/// `model,rank,mean_ap,std_ap,oracle_ap,runs`. When `cfg` is given, grid
/// cells with no finished run appear as blank rows and are logged.
pub fn emit_plot_data(results: &Path, out_dir: &Path, cfg: Option<&HarnessConfig>) -> Result<Vec<PathBuf>> {
    let rows = read_results(results)?;
    let mut tables = plot_tables(&rows)?;
    if let Some(cfg) = cfg {
        let mut missing = Vec::new();
        for e in &cfg.experiments {
            for (split, p) in e.data_groups() {
                let table = tables.entry((e.name.clone(), split.clone(), p.as_f64().to_string())).or_default();
                for m in &e.models {
                    for &k in &e.ranks {
                        match table.iter().find(|pt| pt.model == m.name() && pt.rank == k) {
                            Some(pt) if pt.runs > 0 => {}
                            Some(_) => missing.push(format!("{}/{split}/{p}/{m}/{k}", e.name)),
                            None => {
                                missing.push(format!("{}/{split}/{p}/{m}/{k}", e.name));
                                table.push(PlotPoint {
                                    model: m.name().to_owned(),
                                    rank: k,
                                    mean_ap: None,
                                    std_ap: None,
                                    oracle_ap: None,
                                    runs: 0,
                                });
                            }
                        }
                    }
                }
                table.sort_by(|a, b| (&a.model, a.rank).cmp(&(&b.model, b.rank)));
            }
        }
        if !missing.is_empty() {
            log::warn!("{} grid cells have no results: {}", missing.len(), missing.join(", "));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    for ((exp, split, p), points) in tables {
        let safe = |s: &str| s.replace(|c: char| !c.is_ascii_alphanumeric() && c != '.' && c != '-', "_");
        let path = out_dir.join(format!("{}__{}__p{}.csv", safe(&exp), safe(&split), safe(&p)));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_record(["model", "rank", "mean_ap", "std_ap", "oracle_ap", "runs"])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for pt in points {
            w.write_record([
                pt.model.clone(),
                pt.rank.to_string(),
                opt(pt.mean_ap),
                opt(pt.std_ap),
                opt(pt.oracle_ap),
                pt.runs.to_string(),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_grid_cardinality() {
        let cfg = HarnessConfig::from_json(
            r#"{"experiments": [{"name": "fam", "kind": "family",
                "models": ["CP", "RESCAL", "TransE", "F", "DistMult", "ComplEx"],
                "proportions": [0.8, 0.4, 0.2, 0.1], "splits": ["random"]}]}"#,
        )
        .unwrap();
        assert_eq!(cells(&cfg).len(), 2400);
    }

    #[test]
    fn individual_yields_ten_folds_per_run() {
        let cfg = HarnessConfig::from_json(
            r#"{"experiments": [{"name": "ind", "kind": "property-individual", "models": ["CP"],
                "ranks": [5], "lambdas": [0.0], "runs": 1, "combos": ["symmetric"]}]}"#,
        )
        .unwrap();
        assert_eq!(cells(&cfg).len(), 10);
        let cfg = HarnessConfig::from_json(
            r#"{"experiments": [{"name": "ind", "kind": "property-individual", "models": ["CP"],
                "ranks": [5], "lambdas": [0.0], "runs": 2, "folds": 3, "combos": ["symmetric"]}]}"#,
        )
        .unwrap();
        let cs = cells(&cfg);
        assert_eq!(cs.len(), 6);
        let e = &cfg.experiments[0];
        let p = cs[0].p;
        assert_eq!(data_seed(1, e, "symmetric", p, 2), data_seed(1, e, "symmetric", p, 0));
        assert_ne!(data_seed(1, e, "symmetric", p, 3), data_seed(1, e, "symmetric", p, 0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(HarnessConfig::from_json(r#"{"experiments": []}"#).is_err());
        assert!(HarnessConfig::from_json(
            r#"{"experiments": [{"name": "a", "kind": "family", "models": ["CP"], "proportions": [0.8], "splits": ["joint"]}]}"#
        )
        .is_err());
        assert!(HarnessConfig::from_json(
            r#"{"experiments": [{"name": "a", "kind": "property-joint", "models": ["CP"], "proportions": [0.8], "typo": 1}]}"#
        )
        .is_err());
    }

    #[test]
    fn plot_aggregates_runs() {
        let row = |run, ap| ResultRow {
            experiment: "e".into(),
            split: "s".into(),
            p: 0.8,
            model: "CP".into(),
            rank: 5,
            run,
            selected: Some("CP".into()),
            lambda: Some(0.0),
            valid_ap: Some(1.0),
            test_ap: Some(ap),
            oracle_ap: Some(1.0),
            seconds: 0.0,
            seed: 0,
            status: CellStatus::Ok,
        };
        let rows: Vec<ResultRow> = (0..10).map(|r| row(r, 1.0)).collect();
        let t = plot_tables(&rows).unwrap();
        let pts = &t[&("e".to_owned(), "s".to_owned(), "0.8".to_owned())];
        assert_eq!(pts[0].mean_ap, Some(1.0));
        assert_eq!(pts[0].std_ap, Some(0.0));
        assert_eq!(pts[0].runs, 10);
    }
}
