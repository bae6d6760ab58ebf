use std::fs;

use proptest::prelude::*;
use traverse_core::actions::ActionSpace;
use traverse_core::dataset::{import_map, MapFormat};
use traverse_core::raster::{rasterize, read_sbt, write_sbt, RasterConfig};
use traverse_core::robot::RobotConfig;
use traverse_core::sim::{read_labels_csv, simulate, write_labels_csv, LabelRow};
use traverse_core::terrain::{generate_map, read_emap, write_emap, write_text_grid, ElevationMap, PresetLibrary};
use traverse_core::Error;

fn preset_map(name: &str, seed: i64) -> ElevationMap {
    let lib = PresetLibrary::builtin();
    generate_map(&lib.get(name).unwrap().params(seed), 129, 0.0625).unwrap()
}

#[test]
fn emap_write_read_write_is_byte_identical() {
    for (name, seed) in [("rough", 1), ("mountains", -9), ("depressions", 77)] {
        let map = preset_map(name, seed);
        let mut first = Vec::new();
        write_emap(&map, &mut first).unwrap();
        let back = read_emap(&first[..]).unwrap();
        assert_eq!(back, map);
        let mut second = Vec::new();
        write_emap(&back, &mut second).unwrap();
        assert_eq!(first, second);
    }
}

#[test]
fn sbt_write_read_write_is_byte_identical() {
    let map = preset_map("wavy", 5);
    let cfg = RobotConfig::default();
    let space = ActionSpace::standard();
    let samples: Vec<_> = [0usize, 84, 1000, 3041]
        .iter()
        .map(|&i| {
            let t = &space.trajectories[i];
            let label = simulate(&cfg, &map, t).label;
            rasterize(&cfg, &map, t, &RasterConfig::default(), 9, i as u32, label)
        })
        .collect();
    let first = write_sbt(Vec::new(), &samples).unwrap();
    let back = read_sbt(&first[..]).unwrap();
    assert_eq!(back, samples);
    assert_eq!(write_sbt(Vec::new(), &back).unwrap(), first);
}

#[test]
fn empty_sbt_is_header_only() {
    let bytes = write_sbt(Vec::new(), &[]).unwrap();
    assert_eq!(bytes, b"SBT1\0\0\0\0\x81\0\x03\0");
    assert!(read_sbt(&bytes[..]).unwrap().is_empty());
}

#[test]
fn text_grid_plane_resamples_exactly() {
    // Bilinear interpolation reproduces a linear field, so a coarse plane
    // resampled to 129 nodes stays on the plane.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plane.txt");
    let plane = |x: f64, y: f64| 0.05 * x - 0.02 * y + 0.3;
    let coarse = ElevationMap::from_fn(65, 0.125, (0.0, 0.0), plane).unwrap();
    let mut text = Vec::new();
    write_text_grid(&coarse, &mut text).unwrap();
    fs::write(&path, text).unwrap();

    let imported = import_map(&path, MapFormat::Text).unwrap();
    assert_eq!(imported.source_side, 65);
    assert_eq!(imported.source, path);
    let map = imported.map;
    assert_eq!(map.side_cells(), 129);
    assert_eq!(map.cell_size(), 0.0625);
    let mut worst = 0f64;
    for row in 0..129 {
        for col in 0..129 {
            let (x, y) = map.node_local(row, col);
            worst = worst.max((map.get(row, col) as f64 - plane(x, y)).abs());
        }
    }
    assert!(worst < 1e-6, "max error {worst}");
}

#[test]
fn emap_import_of_native_map_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.emap");
    let map = preset_map("smooth", 3);
    let mut bytes = Vec::new();
    write_emap(&map, &mut bytes).unwrap();
    fs::write(&path, &bytes).unwrap();
    let imported = import_map(&path, MapFormat::from_path(&path)).unwrap();
    assert_eq!(imported.map, map);
}

#[test]
fn truncated_inputs_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let map = preset_map("smooth", 3);
    let mut bytes = Vec::new();
    write_emap(&map, &mut bytes).unwrap();
    let path = dir.path().join("cut.emap");
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(import_map(&path, MapFormat::Emap), Err(Error::Parse(_))));

    let ragged = dir.path().join("ragged.txt");
    fs::write(&ragged, "1 2 3\n4 5 6\n7 8\n").unwrap();
    assert!(matches!(import_map(&ragged, MapFormat::Text), Err(Error::NonSquareGrid { .. })));

    let missing = dir.path().join("absent.emap");
    assert!(matches!(import_map(&missing, MapFormat::Emap), Err(Error::Io(_))));
}

#[test]
fn labels_csv_round_trip() {
    let map = preset_map("depressions", 11);
    let cfg = RobotConfig::default();
    let space = ActionSpace::standard();
    let rows: Vec<LabelRow> = space.trajectories[..200]
        .iter()
        .enumerate()
        .map(|(i, t)| LabelRow::new(4, i as u32, &simulate(&cfg, &map, t)))
        .collect();
    let mut buf = Vec::new();
    write_labels_csv(&mut buf, rows.iter().copied()).unwrap();
    assert_eq!(read_labels_csv(&buf[..]).unwrap(), rows);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emap_round_trip_for_any_grid(
        side in 2usize..20,
        cell in 0.01f32..2.0,
        ox in -1e3f64..1e3,
        oy in -1e3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mut state = seed;
        let cells: Vec<f32> = (0..side * side)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 40) as f32 / (1u64 << 24) as f32 - 0.5) * 10.0
            })
            .collect();
        let map = ElevationMap::new(side, cell as f64, (ox, oy), cells).unwrap();
        let mut a = Vec::new();
        write_emap(&map, &mut a).unwrap();
        let back = read_emap(&a[..]).unwrap();
        prop_assert_eq!(&back, &map);
        let mut b = Vec::new();
        write_emap(&back, &mut b).unwrap();
        prop_assert_eq!(a, b);
    }
}
