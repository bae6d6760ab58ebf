//! Dataset assembly: map generation, labelling, split by map, class
//! balancing and export to labels CSVs and SBT shards.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::actions::ActionSpace;
use crate::error::{Error, Result};
use crate::raster::{rasterize, RasterConfig, SbtWriter};
use crate::robot::RobotConfig;
use crate::sim::{simulate_all, write_labels_csv, LabelRow};
use crate::terrain::{
    generate_map, read_emap, read_text_grid, write_emap, ElevationMap, PresetLibrary, TerrainPreset,
    DEFAULT_CELL_SIZE, DEFAULT_SIDE,
};

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_SHARD_SAMPLES: usize = 4096;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const MAPS_MANIFEST_FILE: &str = "maps.txt";

/// Samples rasterized at once while streaming a shard.
const RASTER_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.9, val: 0.08, test: 0.02 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidRatios(format!("ratios must be non-negative, got {r:?}")));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Map counts per split by largest remainder, ties going to the earlier split.
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        self.validate()?;
        let exact = [self.train, self.val, self.test].map(|r| r * n as f64);
        let mut counts = exact.map(|e| (e + 1e-9).floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| (exact[b] - counts[b] as f64).total_cmp(&(exact[a] - counts[a] as f64)).then(a.cmp(&b)));
        let assigned: usize = counts.iter().sum();
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub n_maps: usize,
    /// Preset names cycled over map ids; empty selects the library's default mix.
    pub presets: Vec<String>,
    pub ratios: SplitRatios,
    pub balance: bool,
    /// Largest kept safe:failure ratio in balanced splits.
    pub safe_cap: f64,
    /// Safe samples kept per balanced split even when it holds no failures.
    pub min_safe: usize,
    pub seed: u64,
    /// Write labels and manifest only, no tensors.
    pub labels_only: bool,
    pub shard_size: usize,
    pub raster: RasterConfig,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            n_maps: 500,
            presets: Vec::new(),
            ratios: SplitRatios::default(),
            balance: true,
            safe_cap: 2.0,
            min_safe: 64,
            seed: 0,
            labels_only: false,
            shard_size: MAX_SHARD_SAMPLES,
            raster: RasterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub safe: u64,
    pub failure: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.safe + self.failure
    }

    /// Fraction of samples with no failure event.
    pub fn safe_fraction(&self) -> f64 {
        self.safe as f64 / self.total().max(1) as f64
    }

    fn add(&mut self, row: &LabelRow) {
        if row.label.any() {
            self.failure += 1;
        } else {
            self.safe += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapRecord {
    pub map_id: u32,
    pub preset: String,
    pub seed: i64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSummary {
    pub maps: usize,
    /// Before balancing.
    pub population: ClassCounts,
    /// Exported.
    pub kept: ClassCounts,
    pub shards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub options: DatasetOptions,
    pub presets: Vec<String>,
    pub maps: Vec<MapRecord>,
    pub splits: [SplitSummary; 3],
    /// Valid samples over all maps, before balancing.
    pub population: ClassCounts,
    /// Samples dropped because some placement left the map.
    pub invalid: u64,
}

impl DatasetManifest {
    pub fn split(&self, s: Split) -> &SplitSummary {
        &self.splits[s as usize]
    }

    pub fn to_text(&self) -> String {
        let o = &self.options;
        let mut s = String::new();
        let _ = writeln!(s, "format_version: {FORMAT_VERSION}");
        let _ = writeln!(s, "seed: {}", o.seed);
        let _ = writeln!(s, "n_maps: {}", o.n_maps);
        let _ = writeln!(s, "presets: {}", self.presets.join(", "));
        let _ = writeln!(s, "split_ratios: {} {} {}", o.ratios.train, o.ratios.val, o.ratios.test);
        let _ = writeln!(s, "balance: {}", o.balance);
        let _ = writeln!(s, "safe_cap: {}", o.safe_cap);
        let _ = writeln!(s, "min_safe: {}", o.min_safe);
        let _ = writeln!(s, "labels_only: {}", o.labels_only);
        let _ = writeln!(s, "raster_h_norm: {}", o.raster.h_norm);
        let _ = writeln!(s, "raster_decay: {}", o.raster.decay);
        let _ = writeln!(s, "population_safe: {}", self.population.safe);
        let _ = writeln!(s, "population_failure: {}", self.population.failure);
        let _ = writeln!(s, "population_invalid: {}", self.invalid);
        let _ = writeln!(s, "population_safe_fraction: {:.4}", self.population.safe_fraction());
        let _ = writeln!(s, "\n[splits]");
        let _ = writeln!(s, "split maps pop_safe pop_failure kept_safe kept_failure shards");
        for split in Split::ALL {
            let x = self.split(split);
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {}",
                split.name(),
                x.maps,
                x.population.safe,
                x.population.failure,
                x.kept.safe,
                x.kept.failure,
                x.shards.len()
            );
        }
        let _ = writeln!(s, "\n[maps]");
        let _ = writeln!(s, "map_id preset seed split");
        for m in &self.maps {
            let _ = writeln!(s, "{} {} {} {}", m.map_id, m.preset, m.seed, m.split.name());
        }
        s
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Terrain seed of map `map_id` under a master seed.
pub fn map_seed(master: u64, map_id: u32) -> i64 {
    splitmix64(master ^ splitmix64(map_id as u64)) as i64
}

fn rng_for(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(master.wrapping_add(stream.wrapping_mul(0x1000_0000_01B3))))
}

/// Split of every map id: a seeded shuffle cut at the split counts.
pub fn assign_splits(n_maps: usize, ratios: &SplitRatios, seed: u64) -> Result<Vec<Split>> {
    let counts = ratios.counts(n_maps)?;
    let perm = index::sample(&mut rng_for(seed, 1), n_maps, n_maps).into_vec();
    let mut out = vec![Split::Train; n_maps];
    for (rank, &map) in perm.iter().enumerate() {
        out[map] = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}

fn resolve_presets<'a>(lib: &'a PresetLibrary, names: &[String]) -> Result<Vec<&'a TerrainPreset>> {
    if names.is_empty() {
        let mix = lib.default_mix();
        if mix.is_empty() {
            return Err(Error::InvalidConfig("preset library has no default mix".into()));
        }
        return Ok(mix);
    }
    names.iter().map(|n| lib.get(n)).collect()
}

/// Which safe samples of a split survive balancing. Failures always stay;
/// safe samples are removed uniformly at random down to
/// `max(cap * failures, min_safe)`.
pub fn balance_split(rows: &[LabelRow], cap: f64, min_safe: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let safe: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].label.any()).collect();
    let failures = rows.len() - safe.len();
    let target = ((cap * failures as f64).floor() as usize).max(min_safe).min(safe.len());
    let mut keep: Vec<bool> = rows.iter().map(|r| r.label.any()).collect();
    for i in index::sample(rng, safe.len(), target) {
        keep[safe[i]] = true;
    }
    keep
}

fn write_labels_file(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_labels_csv(&mut out, rows.iter().copied())?;
    Ok(std::io::Write::flush(&mut out)?)
}

/// Generates, labels, splits, balances and exports a dataset into `out_dir`.
pub fn build_dataset(
    opts: &DatasetOptions,
    library: &PresetLibrary,
    robot: &RobotConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    opts.ratios.validate()?;
    robot.validate()?;
    if !(opts.safe_cap.is_finite() && opts.safe_cap >= 0.0) {
        return Err(Error::InvalidConfig(format!("safe cap must be non-negative, got {}", opts.safe_cap)));
    }
    if opts.shard_size == 0 || opts.shard_size > MAX_SHARD_SAMPLES {
        return Err(Error::InvalidConfig(format!("shard size must be in 1..={MAX_SHARD_SAMPLES}")));
    }
    let n_maps = u32::try_from(opts.n_maps).map_err(|_| Error::InvalidConfig("too many maps".into()))?;
    let presets = resolve_presets(library, &opts.presets)?;
    let splits = assign_splits(opts.n_maps, &opts.ratios, opts.seed)?;
    let space = ActionSpace::standard();
    fs::create_dir_all(out_dir)?;

    let records: Vec<MapRecord> = (0..n_maps)
        .map(|id| MapRecord {
            map_id: id,
            preset: presets[id as usize % presets.len()].name.clone(),
            seed: map_seed(opts.seed, id),
            split: splits[id as usize],
        })
        .collect();

    let generated: Vec<(Option<ElevationMap>, Vec<LabelRow>)> = records
        .par_iter()
        .map(|rec| -> Result<_> {
            let params = presets[rec.map_id as usize % presets.len()].params(rec.seed);
            let map = generate_map(&params, DEFAULT_SIDE, DEFAULT_CELL_SIZE)?;
            let rows = simulate_all(robot, &map, &space.trajectories)
                .iter()
                .enumerate()
                .map(|(t, r)| LabelRow::new(rec.map_id, t as u32, r))
                .collect();
            Ok(((!opts.labels_only).then_some(map), rows))
        })
        .collect::<Result<_>>()?;

    let all_rows: Vec<LabelRow> = generated.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    write_labels_file(&out_dir.join("labels_all.csv"), &all_rows)?;

    let mut population = ClassCounts::default();
    let mut invalid = 0;
    for r in &all_rows {
        if r.valid {
            population.add(r);
        } else {
            invalid += 1;
        }
    }

    let mut summaries: [SplitSummary; 3] = Default::default();
    for split in Split::ALL {
        let summary = &mut summaries[split as usize];
        let rows: Vec<LabelRow> = records
            .iter()
            .filter(|m| m.split == split)
            .flat_map(|m| generated[m.map_id as usize].1.iter().copied())
            .filter(|r| r.valid)
            .collect();
        summary.maps = records.iter().filter(|m| m.split == split).count();
        rows.iter().for_each(|r| summary.population.add(r));

        let kept: Vec<LabelRow> = if opts.balance && split != Split::Test {
            let mut rng = rng_for(opts.seed, 2 + split as u64);
            let keep = balance_split(&rows, opts.safe_cap, opts.min_safe, &mut rng);
            rows.iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| *r).collect()
        } else {
            rows
        };
        kept.iter().for_each(|r| summary.kept.add(r));
        write_labels_file(&out_dir.join(format!("labels_{}.csv", split.name())), &kept)?;

        if opts.labels_only {
            continue;
        }
        for (shard_index, chunk) in kept.chunks(opts.shard_size).enumerate() {
            let name = format!("shard_{}_{:05}.sbt", split.name(), shard_index);
            let mut writer = SbtWriter::new(BufWriter::new(File::create(out_dir.join(&name))?), chunk.len() as u32)?;
            for batch in chunk.chunks(RASTER_BATCH) {
                let tensors: Vec<_> = batch
                    .par_iter()
                    .map(|r| {
                        let map = generated[r.map_id as usize].0.as_ref().expect("maps kept for export");
                        rasterize(robot, map, &space.trajectories[r.traj_id as usize], &opts.raster, r.map_id, r.traj_id, r.label)
                    })
                    .collect();
                for t in &tensors {
                    writer.write(t)?;
                }
            }
            writer.finish()?;
            summary.shards.push(name);
        }
    }

    let manifest = DatasetManifest {
        options: opts.clone(),
        presets: presets.iter().map(|p| p.name.clone()).collect(),
        maps: records,
        splits: summaries,
        population,
        invalid,
    };
    fs::write(out_dir.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(manifest)
}

/// Writes `n` maps of one preset as `map_{i:05}.emap` plus a manifest of
/// their seeds. Returns the written paths.
pub fn generate_maps(preset: &TerrainPreset, n: usize, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let ids: Vec<u32> = (0..n as u32).collect();
    let maps: Vec<ElevationMap> = ids
        .par_iter()
        .map(|&id| generate_map(&preset.params(map_seed(seed, id)), DEFAULT_SIDE, DEFAULT_CELL_SIZE))
        .collect::<Result<_>>()?;
    let mut manifest = format!("format_version: {FORMAT_VERSION}\npreset: {}\nseed: {seed}\ncount: {n}\n\nfile map_seed\n", preset.name);
    let mut paths = Vec::with_capacity(n);
    for (id, map) in ids.iter().zip(&maps) {
        let name = format!("map_{id:05}.emap");
        let path = out_dir.join(&name);
        let mut out = BufWriter::new(File::create(&path)?);
        write_emap(map, &mut out)?;
        std::io::Write::flush(&mut out)?;
        let _ = writeln!(manifest, "{name} {}", map_seed(seed, *id));
        paths.push(path);
    }
    fs::write(out_dir.join(MAPS_MANIFEST_FILE), manifest)?;
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Emap,
    Text,
}

impl MapFormat {
    /// `.emap` files are binary, everything else is read as a text grid.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("emap") => MapFormat::Emap,
            _ => MapFormat::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedMap {
    pub map: ElevationMap,
    pub source: PathBuf,
    pub format: MapFormat,
    pub source_side: usize,
}

/// Reads an external map and resamples it to 129 nodes per side over its
/// own extent. Text grids are taken to span 8 m.
pub fn import_map(path: &Path, format: MapFormat) -> Result<ImportedMap> {
    let input = BufReader::new(File::open(path)?);
    let raw = match format {
        MapFormat::Emap => read_emap(input)?,
        MapFormat::Text => read_text_grid(input, crate::terrain::default_text_extent())?,
    };
    let source_side = raw.side_cells();
    let map = raw.resampled(DEFAULT_SIDE)?;
    Ok(ImportedMap { map, source: path.to_path_buf(), format, source_side })
}

/// The map and its three quarter-turn rotations.
pub fn augment_rotations(map: &ElevationMap) -> [ElevationMap; 4] {
    [0, 1, 2, 3].map(|k| map.rotated_quarter(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::FailureLabel;
    use proptest::prelude::*;

    #[test]
    fn split_counts() {
        let r = SplitRatios::default();
        assert_eq!(r.counts(100).unwrap(), [90, 8, 2]);
        assert_eq!(r.counts(20).unwrap(), [18, 2, 0]);
        assert_eq!(r.counts(0).unwrap(), [0, 0, 0]);
        assert_eq!(SplitRatios { train: 0.5, val: 0.25, test: 0.25 }.counts(3).unwrap(), [1, 1, 1]);
        for bad in [
            SplitRatios { train: 0.9, val: 0.1, test: 0.1 },
            SplitRatios { train: 1.1, val: -0.1, test: 0.0 },
            SplitRatios { train: f64::NAN, val: 0.5, test: 0.5 },
        ] {
            assert!(matches!(bad.counts(10), Err(Error::InvalidRatios(_))));
        }
    }

    #[test]
    fn splits_partition_maps() {
        let s = assign_splits(100, &SplitRatios::default(), 7).unwrap();
        assert_eq!(s.iter().filter(|&&x| x == Split::Train).count(), 90);
        assert_eq!(s.iter().filter(|&&x| x == Split::Val).count(), 8);
        assert_eq!(s.iter().filter(|&&x| x == Split::Test).count(), 2);
        assert_eq!(s, assign_splits(100, &SplitRatios::default(), 7).unwrap());
        assert_ne!(s, assign_splits(100, &SplitRatios::default(), 8).unwrap());
    }

    fn rows(safe: usize, fail: usize) -> Vec<LabelRow> {
        (0..safe + fail)
            .map(|i| LabelRow {
                map_id: 0,
                traj_id: i as u32,
                label: FailureLabel { step: i >= safe, ..Default::default() },
                valid: true,
            })
            .collect()
    }

    #[test]
    fn balancing_caps_safe_samples() {
        let r = rows(900, 100);
        let keep = balance_split(&r, 2.0, 10, &mut rng_for(0, 0));
        assert_eq!(keep.iter().filter(|&&k| k).count(), 300);
        assert!(keep[900..].iter().all(|&k| k));
        // All-safe split keeps only the floor.
        let keep = balance_split(&rows(500, 0), 2.0, 64, &mut rng_for(0, 0));
        assert_eq!(keep.iter().filter(|&&k| k).count(), 64);
        // Already below the cap: nothing removed.
        let keep = balance_split(&rows(50, 100), 2.0, 0, &mut rng_for(0, 0));
        assert!(keep.iter().all(|&k| k));
    }

    proptest! {
        #[test]
        fn balancing_never_drops_failures(safe in 0usize..400, fail in 0usize..200, cap in 0.0f64..4.0, floor in 0usize..50, seed: u64) {
            let r = rows(safe, fail);
            let keep = balance_split(&r, cap, floor, &mut rng_for(seed, 0));
            prop_assert!(keep[safe..].iter().all(|&k| k));
            let kept_safe = keep[..safe].iter().filter(|&&k| k).count();
            prop_assert!(kept_safe <= safe);
            prop_assert!(kept_safe as f64 <= (cap * fail as f64).max(floor as f64) + 1e-9);
        }

        #[test]
        fn split_counts_sum_to_n(n in 0usize..5000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (t, v) = (a, (1.0 - a) * b);
            let r = SplitRatios { train: t, val: v, test: 1.0 - t - v };
            let c = r.counts(n).unwrap();
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            for (k, e) in c.iter().zip([r.train, r.val, r.test]) {
                prop_assert!((*k as f64 - e * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn map_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<i64> = (0..1000).map(|i| map_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(map_seed(42, 5), map_seed(42, 5));
    }

    #[test]
    fn rotations_compose() {
        let map = ElevationMap::from_fn(17, 0.5, (0.0, 0.0), |x, y| x + 2.0 * y * y).unwrap();
        let [r0, r1, r2, r3] = augment_rotations(&map);
        assert_eq!(r0, map);
        assert_eq!(r1.rotated_quarter(1), r2);
        assert_eq!(r2.rotated_quarter(1), r3);
        assert_eq!(r3.rotated_quarter(1), map);
    }

    #[test]
    fn radial_bump_rotations_share_cells() {
        let map = ElevationMap::from_fn(33, 0.25, (0.0, 0.0), |x, y| (-(x * x + y * y)).exp()).unwrap();
        let sorted = |m: &ElevationMap| {
            let mut v = m.cells().to_vec();
            v.sort_by(f32::total_cmp);
            v
        };
        let rots = augment_rotations(&map);
        for r in &rots {
            assert_eq!(sorted(r), sorted(&map));
            assert_eq!(r.get(16, 16), map.get(16, 16));
        }
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(MapFormat::from_path(Path::new("a/b.emap")), MapFormat::Emap);
        assert_eq!(MapFormat::from_path(Path::new("a/b.EMAP")), MapFormat::Emap);
        assert_eq!(MapFormat::from_path(Path::new("a/b.txt")), MapFormat::Text);
    }
}
