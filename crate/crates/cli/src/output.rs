//! CSV tables and the metadata record. With `--out` every table becomes
//! `<name>.csv` next to `meta.json`; otherwise tables go to stdout, each
//! after a `# <name>` line, and the metadata goes to stderr.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub struct Output {
    dir: Option<PathBuf>,
    command: &'static str,
    started: Instant,
    started_unix: u64,
    tables: Vec<String>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>, command: &'static str) -> anyhow::Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Output {
            dir,
            command,
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            tables: Vec::new(),
        })
    }

    pub fn table<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let body = w.into_inner().context("flushing CSV")?;
        match &self.dir {
            Some(d) => {
                let path = d.join(format!("{name}.csv"));
                std::fs::write(&path, &body).with_context(|| format!("writing {}", path.display()))?;
            }
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "# {name}")?;
                out.write_all(&body)?;
            }
        }
        self.tables.push(format!("{name}.csv"));
        Ok(())
    }

    /// Write the metadata record: resolved configuration, derived parameters,
    /// result summary, seed, versions and wall time.
    pub fn finish(self, cfg: &ExperimentConfig, params: Option<&hyplab::HypParams>, results: Value) -> anyhow::Result<()> {
        let meta = json!({
            "command": self.command,
            "config": cfg,
            "params": params,
            "results": results,
            "seed": cfg.sampling.seed,
            "tables": self.tables,
            "versions": {
                "hyplab": env!("CARGO_PKG_VERSION"),
            },
            "started_unix": self.started_unix,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&meta)?;
        match &self.dir {
            Some(d) => {
                let path = d.join("meta.json");
                std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            None => eprintln!("{text}"),
        }
        Ok(())
    }
}
