use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use traverse_core::actions::ActionSpace;
use traverse_core::dataset::{build_dataset, map_seed, DatasetOptions, Split, SplitRatios, MANIFEST_FILE};
use traverse_core::parallel::with_workers;
use traverse_core::raster::{rasterize, read_sbt, RasterConfig, SampleTensor};
use traverse_core::robot::RobotConfig;
use traverse_core::sim::{read_labels_csv, simulate, LabelRow};
use traverse_core::terrain::{generate_map, PresetLibrary};
use traverse_core::Error;

fn labels(dir: &Path, name: &str) -> Vec<LabelRow> {
    read_labels_csv(BufReader::new(File::open(dir.join(name)).unwrap())).unwrap()
}

fn shard_samples(dir: &Path, shards: &[String]) -> Vec<SampleTensor> {
    shards.iter().flat_map(|s| read_sbt(BufReader::new(File::open(dir.join(s)).unwrap())).unwrap()).collect()
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn flat_dataset_keeps_the_safe_floor() {
    let dir = tempfile::tempdir().unwrap();
    let opts = DatasetOptions {
        n_maps: 4,
        presets: vec!["flat".into()],
        ratios: SplitRatios { train: 0.5, val: 0.25, test: 0.25 },
        min_safe: 8,
        seed: 3,
        shard_size: 2000,
        ..DatasetOptions::default()
    };
    let m = build_dataset(&opts, &PresetLibrary::builtin(), &RobotConfig::default(), dir.path()).unwrap();
    assert_eq!(m.population.failure, 0);
    assert_eq!(m.population.safe, 4 * 3042);
    assert_eq!(m.split(Split::Train).kept.safe, 8);
    assert_eq!(m.split(Split::Val).kept.safe, 8);
    assert_eq!(m.split(Split::Test).kept.safe, 3042);
    assert_eq!(m.split(Split::Test).shards, vec!["shard_test_00000.sbt", "shard_test_00001.sbt"]);

    // Recorded counts and label files match the shards on disk.
    for split in Split::ALL {
        let s = m.split(split);
        let rows = labels(dir.path(), &format!("labels_{}.csv", split.name()));
        let samples = shard_samples(dir.path(), &s.shards);
        assert_eq!(rows.len() as u64, s.kept.total());
        assert_eq!(samples.len(), rows.len());
        for (r, t) in rows.iter().zip(&samples) {
            assert_eq!((r.map_id, r.traj_id, r.label), (t.map_id, t.traj_id, t.label));
        }
        assert!(samples.iter().all(|t| t.channel(0).iter().all(|&v| v == 0.5)));
    }
    assert_eq!(labels(dir.path(), "labels_all.csv").len(), 4 * 3042);
    let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(text, m.to_text());
    assert!(text.contains("population_failure: 0"));
}

#[test]
fn balanced_labels_respect_cap_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    let opts = DatasetOptions {
        n_maps: 10,
        presets: vec!["mountains".into(), "depressions".into()],
        ratios: SplitRatios { train: 0.6, val: 0.2, test: 0.2 },
        labels_only: true,
        seed: 12,
        ..DatasetOptions::default()
    };
    let lib = PresetLibrary::builtin();
    let cfg = RobotConfig::default();
    let m = build_dataset(&opts, &lib, &cfg, dir.path()).unwrap();
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".sbt")));

    // Every map sits in exactly one split, at the requested counts.
    let counts: Vec<usize> = Split::ALL.iter().map(|&s| m.maps.iter().filter(|r| r.split == s).count()).collect();
    assert_eq!(counts, vec![6, 2, 2]);
    let mut seen = BTreeSet::new();
    for split in Split::ALL {
        let rows = labels(dir.path(), &format!("labels_{}.csv", split.name()));
        let maps: BTreeSet<u32> = rows.iter().map(|r| r.map_id).collect();
        for id in &maps {
            assert_eq!(m.maps[*id as usize].split, split);
            assert!(seen.insert(*id), "map {id} in two splits");
        }
        let s = m.split(split);
        let fails = rows.iter().filter(|r| r.label.any()).count() as u64;
        assert_eq!(fails, s.population.failure, "balancing must keep every failure");
        if split == Split::Test {
            assert_eq!(s.kept, s.population);
        } else {
            assert!(s.kept.safe <= (2 * fails).max(opts.min_safe as u64));
        }
    }

    // Spot-check about 1% of exported labels against a fresh simulation.
    let all = labels(dir.path(), "labels_all.csv");
    let space = ActionSpace::standard();
    for row in all.iter().step_by(97) {
        let rec = &m.maps[row.map_id as usize];
        assert_eq!(rec.seed, map_seed(12, row.map_id));
        let map = generate_map(&lib.get(&rec.preset).unwrap().params(rec.seed), 129, 0.0625).unwrap();
        let fresh = simulate(&cfg, &map, &space.trajectories[row.traj_id as usize]);
        assert_eq!(LabelRow::new(row.map_id, row.traj_id, &fresh), *row);
    }
}

#[test]
fn exported_tensors_match_fresh_rasterization() {
    let dir = tempfile::tempdir().unwrap();
    let opts = DatasetOptions {
        n_maps: 1,
        presets: vec!["rough".into()],
        ratios: SplitRatios { train: 1.0, val: 0.0, test: 0.0 },
        safe_cap: 0.0,
        min_safe: 0,
        seed: 5,
        ..DatasetOptions::default()
    };
    let lib = PresetLibrary::builtin();
    let cfg = RobotConfig::default();
    let m = build_dataset(&opts, &lib, &cfg, dir.path()).unwrap();
    let samples = shard_samples(dir.path(), &m.split(Split::Train).shards);
    assert!(!samples.is_empty());
    assert!(samples.iter().all(|s| s.label.any()));
    let map = generate_map(&lib.get("rough").unwrap().params(map_seed(5, 0)), 129, 0.0625).unwrap();
    let space = ActionSpace::standard();
    for s in samples.iter().step_by(7) {
        let fresh = rasterize(&cfg, &map, &space.trajectories[s.traj_id as usize], &RasterConfig::default(), 0, s.traj_id, s.label);
        assert_eq!(*s, fresh);
    }
}

#[test]
fn outputs_are_identical_across_worker_counts_and_runs() {
    let opts = DatasetOptions {
        n_maps: 3,
        presets: vec!["rough".into(), "flat".into()],
        ratios: SplitRatios { train: 0.34, val: 0.33, test: 0.33 },
        safe_cap: 0.5,
        min_safe: 4,
        seed: 8,
        ..DatasetOptions::default()
    };
    let lib = PresetLibrary::builtin();
    let cfg = RobotConfig::default();
    let run = |workers: usize| {
        let dir = tempfile::tempdir().unwrap();
        with_workers(workers, || build_dataset(&opts, &lib, &cfg, dir.path()).unwrap()).unwrap();
        dir_bytes(dir.path())
    };
    let a = run(1);
    assert!(a.keys().any(|k| k.ends_with(".sbt")));
    assert_eq!(a, run(3));
    assert_eq!(a, run(1));
}

#[test]
fn invalid_options_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let lib = PresetLibrary::builtin();
    let cfg = RobotConfig::default();
    let bad_ratios = DatasetOptions { n_maps: 1, ratios: SplitRatios { train: 0.5, val: 0.2, test: 0.2 }, ..Default::default() };
    assert!(matches!(build_dataset(&bad_ratios, &lib, &cfg, dir.path()), Err(Error::InvalidRatios(_))));
    let bad_preset = DatasetOptions { n_maps: 1, presets: vec!["lava".into()], ..Default::default() };
    assert!(matches!(build_dataset(&bad_preset, &lib, &cfg, dir.path()), Err(Error::InvalidConfig(_))));
    let bad_shard = DatasetOptions { n_maps: 1, shard_size: 5000, ..Default::default() };
    assert!(matches!(build_dataset(&bad_shard, &lib, &cfg, dir.path()), Err(Error::InvalidConfig(_))));
}
