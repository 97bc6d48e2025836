mod common;

use std::collections::BTreeMap;
use std::path::Path;

use atbat::pipeline::{run_compare, run_simulate, SolveRequest, TrainedModels};

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// The whole pipeline in a fresh directory; returns store files and responses.
fn run_once(seed: u64) -> (BTreeMap<String, Vec<u8>>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let mut config = common::trained_store(dir.path(), &common::small_spec(seed));
    config.simulation.at_bats = 5_000;
    let models = TrainedModels::load(&config.store).unwrap();
    let mut responses = Vec::new();
    for (p, b) in [("P1", "B1"), ("P3", "B2")] {
        let req = SolveRequest {
            pitcher_id: p.into(),
            batter_id: b.into(),
            overrides: Default::default(),
        };
        let resp = models.solve(&config, &req).unwrap();
        models.persist(&resp).unwrap();
        responses.extend(serde_json::to_vec(&resp.document()).unwrap());
        responses.extend(serde_json::to_vec(&run_simulate(&models, &config, p, b).unwrap()).unwrap());
        responses.extend(serde_json::to_vec(&run_compare(&models, &config, p, b).unwrap()).unwrap());
    }
    (files(&config.store), responses)
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let (a_files, a_resp) = run_once(21);
    let (b_files, b_resp) = run_once(21);
    assert_eq!(a_files.keys().collect::<Vec<_>>(), b_files.keys().collect::<Vec<_>>());
    for (k, v) in &a_files {
        assert!(v == &b_files[k], "{k} differs");
    }
    assert!(a_files.contains_key("solutions/P1_B1.json"));
    assert!(a_files.contains_key("comparisons/P3_B2.json"));
    assert_eq!(a_resp, b_resp);
}

#[test]
fn different_seeds_give_different_data() {
    let (a, _) = run_once(1);
    let (b, _) = run_once(2);
    assert_ne!(a["manifest.json"], b["manifest.json"]);
}
