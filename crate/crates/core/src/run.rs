//! Run directories: every invocation persists a manifest (what ran, with
//! which resolved configuration and seeds) and a report (what came out),
//! plus ranking dumps so metrics can be recomputed offline.
//!
//! Timestamps are confined to the manifest; `report.json` depends only on
//! the configuration, seeds, and data, so reruns diff clean.

use crate::error::{Error, Result};
use crate::evalab::{render_csv, render_text_table, RunReport};
use crate::ranker::{write_rankings, Method, Ranking};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Environment variable overriding the run-directory root.
pub const RUN_ROOT_ENV: &str = "PRSEL_RUN_ROOT";
pub const DEFAULT_RUN_ROOT: &str = "runs";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    /// Fully resolved configuration tree (no unresolved defaults).
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: BTreeMap<String, String>,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Resolves the run root: explicit flag, then environment, then default.
pub fn resolve_run_root(flag: Option<&str>) -> PathBuf {
    if let Some(f) = flag {
        return PathBuf::from(f);
    }
    if let Ok(env) = std::env::var(RUN_ROOT_ENV) {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from(DEFAULT_RUN_ROOT)
}

/// A run directory being populated.
pub struct RunDir {
    pub run_id: String,
    pub path: PathBuf,
    command: String,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    artifacts: BTreeMap<String, String>,
    started: u64,
}

impl RunDir {
    /// Creates `root/<run_id>`; the id should derive from the resolved
    /// configuration so reruns land in the same place.
    pub fn create(
        root: &Path,
        run_id: &str,
        command: &str,
        config: serde_json::Value,
        seeds: BTreeMap<String, u64>,
    ) -> Result<Self> {
        let path = root.join(run_id);
        std::fs::create_dir_all(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(RunDir {
            run_id: run_id.to_string(),
            path,
            command: command.to_string(),
            config,
            seeds,
            artifacts: BTreeMap::new(),
            started: now_unix(),
        })
    }

    pub fn write_report(&mut self, report: &RunReport) -> Result<()> {
        let json_path = self.path.join("report.json");
        std::fs::write(&json_path, report.to_json()?)
            .map_err(|e| Error::io(json_path.display().to_string(), e))?;
        let text_path = self.path.join("report.txt");
        std::fs::write(&text_path, render_text_table(report))
            .map_err(|e| Error::io(text_path.display().to_string(), e))?;
        let csv_path = self.path.join("report.csv");
        std::fs::write(&csv_path, render_csv(report)?)
            .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
        self.artifacts
            .insert("report".into(), json_path.display().to_string());
        Ok(())
    }

    /// Dumps rankings for one labeled cell; the filename is derived from the
    /// label so a grid produces one dump per cell.
    pub fn write_ranking_dump(
        &mut self,
        label: &str,
        method: Method,
        rankings: &[Ranking],
    ) -> Result<PathBuf> {
        let file = format!(
            "rankings-{}.jsonl",
            label
                .chars()
                .map(|c| if c.is_alphanumeric() { c } else { '_' })
                .collect::<String>()
        );
        let path = self.path.join(file);
        write_rankings(&path, method, rankings)?;
        self.artifacts
            .insert(format!("rankings:{label}"), path.display().to_string());
        Ok(path)
    }

    /// Writes the manifest and returns the completed record.
    pub fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            run_id: self.run_id,
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            artifacts: self.artifacts,
            started: self.started,
            finished: now_unix(),
        };
        let path = self.path.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalab::GridCell;
    use crate::evalab::MetricResult;

    #[test]
    fn run_dir_persists_manifest_report_and_dumps() {
        let tmp = tempfile::tempdir().unwrap();
        let cells = vec![GridCell {
            label: "srs".into(),
            metric: MetricResult {
                name: "R20@1".into(),
                value: 50.0,
                n_instances: 2,
                config_fingerprint: "fp".into(),
            },
        }];
        let report = RunReport::from_cells(
            "abc",
            "synthetic",
            "none",
            &cells,
            BTreeMap::new(),
            BTreeMap::new(),
        );
        let mut run = RunDir::create(
            tmp.path(),
            "abc",
            "eval",
            serde_json::json!({"method": "srs"}),
            BTreeMap::from([("run".to_string(), 1u64)]),
        )
        .unwrap();
        run.write_report(&report).unwrap();
        let rankings = vec![
            Ranking {
                instance_id: "i0".into(),
                scores: vec![0.4, 0.6],
                order: vec![1, 0],
                gold_index: 1,
            },
            Ranking {
                instance_id: "i1".into(),
                scores: vec![0.7, 0.3],
                order: vec![0, 1],
                gold_index: 1,
            },
        ];
        run.write_ranking_dump("srs", Method::Srs, &rankings).unwrap();
        let manifest = run.finish().unwrap();

        assert!(tmp.path().join("abc/report.json").exists());
        assert!(tmp.path().join("abc/report.txt").exists());
        assert!(tmp.path().join("abc/report.csv").exists());
        assert!(tmp.path().join("abc/manifest.json").exists());
        assert!(tmp.path().join("abc/rankings-srs.jsonl").exists());
        assert!(manifest.artifacts.contains_key("rankings:srs"));

        // The report is recomputable from the dump alone.
        let dumped =
            crate::ranker::read_rankings(&tmp.path().join("abc/rankings-srs.jsonl")).unwrap();
        assert_eq!(crate::evalab::recount_from_dump(&dumped), 50.0);
    }

    #[test]
    fn run_root_resolution_prefers_flag() {
        assert_eq!(resolve_run_root(Some("/tmp/x")), PathBuf::from("/tmp/x"));
    }
}
