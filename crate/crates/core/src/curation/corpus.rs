use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::impulsiveness::{impulsiveness_filter, ImpulsivenessConfig, RejectReason, Verdict};
use super::removal::{curate_background, CurationConfig, CurationReport};
use crate::error::{Error, Result};
use crate::signal::{read_wav, write_audio_f32};
use crate::util::write_json_pretty;

/// Every `.wav` under `dir`, sorted by path.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::invalid_input(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|e| Error::invalid_input(format!("walking {}: {e}", dir.display())))?;
        let is_wav = entry
            .path()
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if entry.file_type().is_file() && is_wav {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

fn relative(path: &Path, root: &Path) -> PathBuf {
    path.strip_prefix(root).unwrap_or(path).to_path_buf()
}

/// Cleans every background in `input` into the same layout under `output`
/// and writes one JSON report covering all files.
pub fn curate_backgrounds_dir(
    input: &Path,
    output: &Path,
    report_path: &Path,
    cfg: &CurationConfig,
) -> Result<Vec<CurationReport>> {
    cfg.validate()?;
    let files = list_wavs(input)?;
    let reports: Vec<CurationReport> = files
        .par_iter()
        .map(|path| -> Result<CurationReport> {
            let rel = relative(path, input);
            let audio = read_wav(path)?;
            let (clean, mut report) = curate_background(&audio, cfg)?;
            report.file = Some(rel.display().to_string());
            if report.rejected.is_none() {
                let dst = output.join(&rel);
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                write_audio_f32(&dst, &clean)?;
            } else {
                log::warn!("{}: {}", rel.display(), report.rejected.as_deref().unwrap_or(""));
            }
            Ok(report)
        })
        .collect::<Result<_>>()?;
    write_json_pretty(report_path, &reports)?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub file: String,
    #[serde(flatten)]
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub accepted: Vec<String>,
    pub rejected: Vec<Rejection>,
}

/// Copies impulsive events from `input` to `output`, listing the rest in
/// `rejects_path`.
pub fn filter_impulses_dir(
    input: &Path,
    output: &Path,
    rejects_path: &Path,
    cfg: &ImpulsivenessConfig,
) -> Result<FilterSummary> {
    cfg.validate()?;
    let files = list_wavs(input)?;
    let verdicts: Vec<(String, Verdict)> = files
        .par_iter()
        .map(|path| -> Result<(String, Verdict)> {
            let rel = relative(path, input);
            let audio = read_wav(path)?;
            let verdict = impulsiveness_filter(&audio, cfg)?;
            if verdict.is_accept() {
                let dst = output.join(&rel);
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                std::fs::copy(path, &dst).map_err(|e| Error::io(&dst, e))?;
            }
            Ok((rel.display().to_string(), verdict))
        })
        .collect::<Result<_>>()?;
    let mut summary = FilterSummary::default();
    for (file, verdict) in verdicts {
        match verdict {
            Verdict::Accept => summary.accepted.push(file),
            Verdict::Reject(reason) => summary.rejected.push(Rejection { file, reason }),
        }
    }
    write_json_pretty(rejects_path, &summary.rejected)?;
    Ok(summary)
}
