use std::collections::BTreeSet;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::ScenarioError;
use crate::metrics::{compare, write_csv, MetricsReport};
use crate::render::Image;

/// Pairs found by [`compare_command`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    /// Metrics per matched relative path, in sorted order.
    pub rows: Vec<(String, MetricsReport)>,
    /// Paths present in only one of the directories.
    pub unmatched: Vec<String>,
}

fn pngs(root: &Path) -> Result<BTreeSet<String>, ScenarioError> {
    if !root.is_dir() {
        return Err(ScenarioError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut out = BTreeSet::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            ScenarioError::io(&path, e.into())
        })?;
        let p = entry.path();
        if entry.file_type().is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            let rel = p.strip_prefix(root).expect("walk stays under root");
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.insert(parts.join("/"));
        }
    }
    Ok(out)
}

fn load(root: &Path, rel: &str) -> Result<Image, ScenarioError> {
    let path: PathBuf = rel.split('/').fold(root.to_path_buf(), |p, c| p.join(c));
    Image::load_png(&path).map_err(|e| match e {
        crate::render::RenderError::Io(io) => ScenarioError::io(&path, io),
        other => ScenarioError::invalid(path.display().to_string(), other.to_string()),
    })
}

/// Aligns and scores every PNG of `dir_a` against the same relative path in
/// `dir_b`, then writes the CSV report with a mean and standard deviation
/// summary to `out`. Files without a partner are logged and skipped.
pub fn compare_command(dir_a: &Path, dir_b: &Path, out: &Path, max_shift: usize) -> Result<CompareOutcome, ScenarioError> {
    let a = pngs(dir_a)?;
    let b = pngs(dir_b)?;
    let unmatched: Vec<String> = a.symmetric_difference(&b).cloned().collect();
    for u in &unmatched {
        log::warn!("no counterpart for {u}; skipped");
    }
    let mut rows = Vec::new();
    for rel in a.intersection(&b) {
        let (ia, ib) = (load(dir_a, rel)?, load(dir_b, rel)?);
        let report = compare(&ia, &ib, max_shift)
            .map_err(|e| ScenarioError::invalid(rel.clone(), e.to_string()))?;
        rows.push((rel.clone(), report));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ScenarioError::io(parent, e))?;
    }
    let file = std::fs::File::create(out).map_err(|e| ScenarioError::io(out, e))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, &rows)?;
    w.flush().map_err(|e| ScenarioError::io(out, e))?;
    Ok(CompareOutcome { rows, unmatched })
}
