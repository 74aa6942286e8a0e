use std::path::Path;

use tacsim::scenario::{compare_command, parse_scenario_str, run_pipeline, PipelineOptions, ScenarioConfig};
use tacsim::surface::DepthMap;

fn small(out: &Path, shape: &str, phases: &str) -> ScenarioConfig {
    let text = format!(
        r#"
name = "small"
output = "{}"
[elastomer]
extent = [4.0, 4.0, 1.0]
counts = [11, 11, 6]
[indenter]
shape = "{shape}"
[capture]
raster = [24, 24]
[sensor]
spp = 2
[trajectory]
kind = "phases"
phases = [{phases}]
"#,
        out.display()
    );
    parse_scenario_str(&text).unwrap()
}

const PRESS_SLIDE: &str = "{ kind = 'press', depth = 0.1, capture = true }, \
                           { kind = 'slide', distance = 0.1, capture = true }";

fn read_depth(path: &Path) -> DepthMap {
    DepthMap::read_from(std::fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn dwell_only_shows_the_undeformed_background() {
    let dir = tempfile::tempdir().unwrap();
    let dwell = "{ kind = 'dwell', duration = 0.0005, capture = true }";
    let mut pngs = Vec::new();
    for (k, shape) in ["sphere@0.25", "cylinder@0.25"].iter().enumerate() {
        let mut cfg = small(&dir.path().join(k.to_string()), shape, dwell);
        cfg.capture.perturbation = 0.0;
        let out = run_pipeline(&cfg, &PipelineOptions::default()).unwrap();
        let files = &out.manifest.captures[0].files;
        assert!(read_depth(&out.root.join(&files[0])).values.iter().all(|v| *v == 0.0));
        pngs.push(std::fs::read(out.root.join(&files[2])).unwrap());
    }
    assert_eq!(pngs[0], pngs[1]);
}

#[test]
fn manifest_lists_every_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "sphere@0.25", PRESS_SLIDE);
    let out = run_pipeline(&cfg, &PipelineOptions::default()).unwrap();
    let m = &out.manifest;
    assert_eq!(m.captures.len(), 2);
    let listed: std::collections::BTreeSet<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for c in &m.captures {
        assert_eq!(c.files.len(), 3);
        for f in &c.files {
            assert!(listed.contains(f.as_str()), "{f}");
        }
    }
    for f in &m.files {
        let bytes = std::fs::read(out.root.join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    let press = &m.captures[0];
    assert!((press.measured.unwrap() - 0.1).abs() < 1e-9);
    let slide = &m.captures[1];
    assert!((slide.measured.unwrap() - 0.1).abs() < 1e-9);
    assert!(out.root.join("manifest.json").is_file());
}

#[test]
fn runs_are_identical_across_repeats_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for threads in [1, 1, 4] {
        let cfg = small(dir.path(), "sphere@0.25", PRESS_SLIDE);
        let _ = std::fs::remove_dir_all(cfg.output.join(&cfg.name));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run_pipeline(&cfg, &PipelineOptions::default())).unwrap();
        let files: Vec<(String, String)> = out.manifest.files.into_iter().map(|f| (f.path, f.sha256)).collect();
        hashes.push(files);
    }
    assert!(!hashes[0].is_empty());
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0], hashes[2]);
}

#[test]
fn directory_compared_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "sphere@0.25", PRESS_SLIDE);
    let out = run_pipeline(&cfg, &PipelineOptions::default()).unwrap();
    let csv = dir.path().join("self.csv");
    let c = compare_command(&out.root, &out.root, &csv, 4).unwrap();
    assert_eq!(c.rows.len(), 2);
    assert!(c.unmatched.is_empty());
    for (_, r) in &c.rows {
        assert_eq!(r.offset, [0, 0]);
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert!((r.ssim - 1.0).abs() < 1e-12);
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 + 2);
}
