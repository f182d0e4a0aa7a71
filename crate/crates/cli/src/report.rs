//! JSON report envelope shared by the subcommands, and `report`, which merges
//! saved reports back into markdown tables.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use augprobe::csd::{self, CsdReport};
use augprobe::divergence::{self, DivergenceReport};
use augprobe::evalgrid::GridResult;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::Staged;
use crate::error::{CliError, CliResult};
use crate::evalgrid::EvalgridRunConfig;
use crate::probes::{CsdRunConfig, DivergenceRunConfig};

/// One report file. `kind` tells `report` how to render it.
// Read once per file; boxing the payloads buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportFile {
    Divergence {
        version: String,
        manifest: String,
        config: DivergenceRunConfig,
        report: DivergenceReport,
    },
    Csd {
        version: String,
        manifest: String,
        config: CsdRunConfig,
        report: CsdReport,
    },
    Evalgrid {
        version: String,
        config: EvalgridRunConfig,
        result: GridResult,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files written by `divergence`, `csd` or `evalgrid`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the merged markdown to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Divergence and CSD rows keep the order the files were given in.
pub fn render(files: &[ReportFile]) -> String {
    let mut div: Vec<&DivergenceReport> = Vec::new();
    let mut dec: Vec<&CsdReport> = Vec::new();
    let mut grids: Vec<&GridResult> = Vec::new();
    for f in files {
        match f {
            ReportFile::Divergence { report, .. } => div.push(report),
            ReportFile::Csd { report, .. } => dec.push(report),
            ReportFile::Evalgrid { result, .. } => grids.push(result),
        }
    }
    let mut out = String::new();
    if !div.is_empty() {
        let owned: Vec<DivergenceReport> = div.into_iter().cloned().collect();
        out.push_str("## Clean vs augmented discrimination\n\n");
        out.push_str(&divergence::markdown_table(&owned));
    }
    if !dec.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        let owned: Vec<CsdReport> = dec.into_iter().cloned().collect();
        out.push_str("## Common/specific decomposition\n\n");
        out.push_str(&csd::markdown_table(&owned));
    }
    for g in grids {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "## Accuracy under augmentation (config {})\n",
            &g.config_hash[..12]
        );
        out.push_str(&g.markdown_table());
    }
    out
}

pub fn cmd_report(args: ReportArgs) -> CliResult<String> {
    let mut files = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: ReportFile = serde_json::from_str(&text).map_err(|e| CliError::data(path, e))?;
        files.push(file);
    }
    let text = render(&files);
    if let Some(out) = args.out {
        let mut staged = Staged::default();
        staged.add(out, text.clone());
        staged.commit()?;
    }
    Ok(text)
}
