//! Measurement campaigns as labeled datasets.
//!
//! A campaign walks a rectangular grid of candidate target positions. Every
//! grid bin yields a paired pair of samples over the same clutter: one with
//! the target standing at the bin's cell center, one with no target. Splits
//! are taken at bin granularity so a bin's null and target samples can never
//! straddle the train/test boundary.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{
    cir_from_sweep, features_from_cirs, DspError, FeatureLayout, FeatureMode, FeatureVector,
    Normalize,
};
use crate::geom::Point;
use crate::io::{self, IoError, PayloadReader, PayloadWriter};
use crate::seed::derive_seed;
use crate::sim::{synthesize_scene_sweeps, Scene, SimError, SweepConfig};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("grid index {index} out of range for {len}-cell grid")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error("invalid scene template: {0}")]
    BadScene(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Rectangular grid of candidate target positions, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_cols: usize,
    pub n_rows: usize,
    /// Cell side length, meters.
    pub cell_m: f64,
    /// Grid corner; cell centers start half a cell inward.
    pub origin: Point,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell center of the `index`-th bin (row-major).
    pub fn grid_to_position(&self, index: usize) -> Result<Point, DatasetError> {
        if index >= self.len() {
            return Err(DatasetError::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        let col = index % self.n_cols;
        let row = index / self.n_cols;
        Ok(Point {
            x: self.origin.x + (col as f64 + 0.5) * self.cell_m,
            y: self.origin.y + (row as f64 + 0.5) * self.cell_m,
        })
    }

    /// Bin whose cell contains `p`, or `None` outside the grid.
    pub fn position_to_grid(&self, p: Point) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.cell_m;
        let fy = (p.y - self.origin.y) / self.cell_m;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let col = fx.floor() as usize;
        let row = fy.floor() as usize;
        if col >= self.n_cols || row >= self.n_rows {
            return None;
        }
        Some(row * self.n_cols + col)
    }
}

impl Default for GridSpec {
    /// 21 x 22 cells of 0.2 m (462 bins) anchored at the room origin.
    fn default() -> Self {
        GridSpec {
            n_cols: 21,
            n_rows: 22,
            cell_m: 0.2,
            origin: Point { x: 0.0, y: 0.0 },
        }
    }
}

/// Whether a person was present when the sample was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    Null,
    Target,
}

impl Hypothesis {
    fn code(self) -> u64 {
        match self {
            Hypothesis::Null => 0,
            Hypothesis::Target => 1,
        }
    }
}

/// One labeled observation: the features of all links plus ground truth.
///
/// `grid_index` and `position_m` are present exactly for target samples.
/// `bin` ties both members of a null/target pair to their grid bin so splits
/// can keep them together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingSample {
    pub features: FeatureVector,
    pub hypothesis: Hypothesis,
    pub grid_index: Option<usize>,
    pub position_m: Option<Point>,
    pub link_ids: Vec<usize>,
    /// Noise seed this sample was synthesized with.
    pub seed: u64,
    /// Grid bin the sample belongs to (also set for null samples).
    pub bin: usize,
}

/// CIR-to-feature settings shared by every sample of a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub k_taps: usize,
    pub mode: FeatureMode,
    pub normalize: Normalize,
}

impl Default for FeatureParams {
    /// 40 taps cover ~12 m of path length at the default 1 MHz tone spacing.
    /// The longest geometrically possible path in the reference deployment
    /// (corner clutter bounce to the far receiver) lands near tap 35, so
    /// everything beyond that is noise that only dilutes the learners.
    fn default() -> Self {
        FeatureParams {
            k_taps: 40,
            mode: FeatureMode::Magnitude,
            normalize: Normalize::PerLinkMax,
        }
    }
}

/// Everything that shapes a campaign besides the scene and the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub sweep: SweepConfig,
    pub features: FeatureParams,
    /// Noise realizations per (bin, hypothesis); 1 mirrors a single
    /// measurement pass, larger values enrich the training set.
    pub augmentation: usize,
}

impl Default for CampaignConfig {
    /// The reference campaign adds complex noise of std 0.01 per tone; path
    /// amplitudes in the reference deployment are around 0.05 to 0.3, so taps
    /// stay clearly above the noise floor while repeated draws differ.
    fn default() -> Self {
        CampaignConfig {
            sweep: SweepConfig {
                noise_std: 0.01,
                ..SweepConfig::default()
            },
            features: FeatureParams::default(),
            augmentation: 1,
        }
    }
}

/// Synthesizes one sample: scene setup, sweeps, CIRs, features.
///
/// `position` must be `Some` exactly for [`Hypothesis::Target`]. The
/// template's own `target` acts as the body prototype; its position is
/// replaced by the bin's cell center.
pub fn synthesize_sample(
    template: &Scene,
    campaign: &CampaignConfig,
    hypothesis: Hypothesis,
    position: Option<Point>,
    bin: usize,
    seed: u64,
) -> Result<SensingSample, DatasetError> {
    let scene = match hypothesis {
        Hypothesis::Target => {
            let body = template.target.as_ref().ok_or_else(|| {
                DatasetError::BadScene("scene template has no target prototype".into())
            })?;
            template.with_target_at(position.expect("target needs a position"), body)
        }
        Hypothesis::Null => template.without_target(),
    }
    .with_seed(seed);
    let sweeps = synthesize_scene_sweeps(&scene, &campaign.sweep)?;
    let cirs: Vec<_> = sweeps.iter().map(cir_from_sweep).collect();
    let features = features_from_cirs(
        &cirs,
        campaign.features.k_taps,
        campaign.features.mode,
        campaign.features.normalize,
    )?;
    Ok(SensingSample {
        features,
        hypothesis,
        grid_index: (hypothesis == Hypothesis::Target).then_some(bin),
        position_m: position,
        link_ids: (0..scene.num_links()).collect(),
        seed,
        bin,
    })
}

/// Walks the grid, producing a null/target sample pair per bin.
///
/// Per-sample noise seeds derive from `(seed, bin, hypothesis, draw)`, so the
/// campaign is reproducible and every sample's noise is independent. Output
/// order is `(bin, null-first, draw)` regardless of parallelism.
pub fn generate_campaign(
    grid: &GridSpec,
    scene_template: &Scene,
    campaign: &CampaignConfig,
    seed: u64,
) -> Result<Vec<SensingSample>, DatasetError> {
    scene_template
        .validate()
        .map_err(|v| DatasetError::BadScene(v.join("; ")))?;
    let build_bin = |bin: usize| -> Result<Vec<SensingSample>, DatasetError> {
        let pos = grid.grid_to_position(bin)?;
        let mut out = Vec::with_capacity(2 * campaign.augmentation);
        for hyp in [Hypothesis::Null, Hypothesis::Target] {
            for draw in 0..campaign.augmentation {
                let s = derive_seed(seed, &[bin as u64, hyp.code(), draw as u64]);
                let position = (hyp == Hypothesis::Target).then_some(pos);
                out.push(synthesize_sample(scene_template, campaign, hyp, position, bin, s)?);
            }
        }
        Ok(out)
    };

    let bins: Vec<usize> = (0..grid.len()).collect();
    #[cfg(feature = "parallel")]
    let per_bin: Result<Vec<_>, _> = bins.par_iter().map(|&b| build_bin(b)).collect();
    #[cfg(not(feature = "parallel"))]
    let per_bin: Result<Vec<_>, _> = bins.iter().map(|&b| build_bin(b)).collect();

    Ok(per_bin?.into_iter().flatten().collect())
}

/// Bin-level partition of the grid into train and test, with a validation
/// fraction carved out of the train bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Sorted, deduplicated train bin indices.
    pub train_bins: Vec<usize>,
    /// Sorted, deduplicated test bin indices.
    pub test_bins: Vec<usize>,
    /// Fraction of train bins moved to validation, in `[0, 1)`.
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// Random bin split: `n_train` bins train, the rest test.
    pub fn random(grid_len: usize, n_train: usize, val_fraction: f64, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut bins: Vec<usize> = (0..grid_len).collect();
        let mut rng = crate::seed::rng(derive_seed(seed, &[0x73706c6974]));
        bins.shuffle(&mut rng);
        let n_train = n_train.min(grid_len);
        let mut train_bins: Vec<usize> = bins[..n_train].to_vec();
        let mut test_bins: Vec<usize> = bins[n_train..].to_vec();
        train_bins.sort_unstable();
        test_bins.sort_unstable();
        SplitSpec {
            train_bins,
            test_bins,
            val_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (name, bins) in [("train", &self.train_bins), ("test", &self.test_bins)] {
            if !bins.windows(2).all(|w| w[0] < w[1]) {
                return Err(DatasetError::BadSplit(format!(
                    "{name} bins not sorted/unique"
                )));
            }
        }
        let train: BTreeSet<_> = self.train_bins.iter().collect();
        let overlap: Vec<_> = self.test_bins.iter().filter(|b| train.contains(b)).collect();
        if !overlap.is_empty() {
            return Err(DatasetError::BadSplit(format!(
                "{} bins in both train and test (first: {})",
                overlap.len(),
                overlap[0]
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(DatasetError::BadSplit(format!(
                "val_fraction {} outside [0, 1)",
                self.val_fraction
            )));
        }
        Ok(())
    }

    /// The validation bins: `floor(val_fraction * |train|)` of the train
    /// bins, chosen by seeded shuffle.
    pub fn val_bins(&self) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let n_val = (self.val_fraction * self.train_bins.len() as f64).floor() as usize;
        let mut bins = self.train_bins.clone();
        let mut rng = crate::seed::rng(derive_seed(self.seed, &[0x76616c]));
        bins.shuffle(&mut rng);
        let mut val: Vec<usize> = bins[..n_val].to_vec();
        val.sort_unstable();
        val
    }
}

/// A campaign partitioned by [`SplitSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<SensingSample>,
    pub val: Vec<SensingSample>,
    pub test: Vec<SensingSample>,
}

/// Routes every sample to train, val or test by its bin.
///
/// Fails if the spec overlaps, or if a sample's bin is in neither set.
pub fn split_campaign(
    samples: &[SensingSample],
    spec: &SplitSpec,
) -> Result<SplitDataset, DatasetError> {
    spec.validate()?;
    let val: BTreeSet<usize> = spec.val_bins().into_iter().collect();
    let train: BTreeSet<usize> = spec.train_bins.iter().copied().collect();
    let test: BTreeSet<usize> = spec.test_bins.iter().copied().collect();
    let mut out = SplitDataset {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for s in samples {
        if test.contains(&s.bin) {
            out.test.push(s.clone());
        } else if val.contains(&s.bin) {
            out.val.push(s.clone());
        } else if train.contains(&s.bin) {
            out.train.push(s.clone());
        } else {
            return Err(DatasetError::BadSplit(format!(
                "sample bin {} in neither train nor test set",
                s.bin
            )));
        }
    }
    Ok(out)
}

/// A generated campaign with the settings that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub grid: GridSpec,
    pub campaign: CampaignConfig,
    pub seed: u64,
    pub samples: Vec<SensingSample>,
}

impl Dataset {
    pub fn generate(
        grid: GridSpec,
        scene_template: &Scene,
        campaign: CampaignConfig,
        seed: u64,
    ) -> Result<Self, DatasetError> {
        let samples = generate_campaign(&grid, scene_template, &campaign, seed)?;
        Ok(Dataset {
            grid,
            campaign,
            seed,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        save_dataset(self, path)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        load_dataset(path)
    }
}

fn mode_code(mode: FeatureMode) -> u8 {
    match mode {
        FeatureMode::Magnitude => 0,
        FeatureMode::RealImag => 1,
    }
}

fn normalize_code(n: Normalize) -> u8 {
    match n {
        Normalize::PerLinkMax => 0,
        Normalize::None => 1,
    }
}

/// Serializes a dataset into the framed `CIRD` binary format.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let mut w = PayloadWriter::new();
    w.put_u32(ds.grid.n_cols as u32);
    w.put_u32(ds.grid.n_rows as u32);
    w.put_f64(ds.grid.cell_m);
    w.put_f64(ds.grid.origin.x);
    w.put_f64(ds.grid.origin.y);
    let sw = &ds.campaign.sweep;
    w.put_f64(sw.center_frequency_hz);
    w.put_f64(sw.bandwidth_hz);
    w.put_u64(sw.num_points as u64);
    w.put_f64(sw.noise_std);
    w.put_f64(sw.calibration_delay_s);
    let ft = &ds.campaign.features;
    w.put_u64(ft.k_taps as u64);
    w.put_u8(mode_code(ft.mode));
    w.put_u8(normalize_code(ft.normalize));
    w.put_u64(ds.campaign.augmentation as u64);
    w.put_u64(ds.seed);
    w.put_u64(ds.samples.len() as u64);
    for s in &ds.samples {
        w.put_u8(s.hypothesis.code() as u8);
        w.put_u64(s.bin as u64);
        if let Some(p) = s.position_m {
            w.put_f64(p.x);
            w.put_f64(p.y);
        }
        w.put_u32(s.link_ids.len() as u32);
        for &l in &s.link_ids {
            w.put_u32(l as u32);
        }
        w.put_u64(s.seed);
        w.put_f64_slice(&s.features.values);
    }
    io::write_framed(path, io::DATASET_MAGIC, &w.into_bytes())?;
    Ok(())
}

/// Reads back a framed `CIRD` file written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let payload = io::read_framed(path, io::DATASET_MAGIC)?;
    let mut r = PayloadReader::new(&payload);
    let grid = GridSpec {
        n_cols: r.get_u32()? as usize,
        n_rows: r.get_u32()? as usize,
        cell_m: r.get_f64()?,
        origin: Point {
            x: r.get_f64()?,
            y: r.get_f64()?,
        },
    };
    let sweep = SweepConfig {
        center_frequency_hz: r.get_f64()?,
        bandwidth_hz: r.get_f64()?,
        num_points: r.get_u64()? as usize,
        noise_std: r.get_f64()?,
        calibration_delay_s: r.get_f64()?,
    };
    let k_taps = r.get_u64()? as usize;
    let mode = match r.get_u8()? {
        0 => FeatureMode::Magnitude,
        1 => FeatureMode::RealImag,
        m => return Err(r.malformed(format!("unknown feature mode {m}")).into()),
    };
    let normalize = match r.get_u8()? {
        0 => Normalize::PerLinkMax,
        1 => Normalize::None,
        n => return Err(r.malformed(format!("unknown normalize mode {n}")).into()),
    };
    let campaign = CampaignConfig {
        sweep,
        features: FeatureParams {
            k_taps,
            mode,
            normalize,
        },
        augmentation: r.get_u64()? as usize,
    };
    let seed = r.get_u64()?;
    let n_samples = r.get_u64()? as usize;
    let mut samples = Vec::with_capacity(n_samples.min(1 << 20));
    for _ in 0..n_samples {
        let hypothesis = match r.get_u8()? {
            0 => Hypothesis::Null,
            1 => Hypothesis::Target,
            h => return Err(r.malformed(format!("unknown hypothesis {h}")).into()),
        };
        let bin = r.get_u64()? as usize;
        let position_m = if hypothesis == Hypothesis::Target {
            Some(Point {
                x: r.get_f64()?,
                y: r.get_f64()?,
            })
        } else {
            None
        };
        let n_links = r.get_u32()? as usize;
        let mut link_ids = Vec::with_capacity(n_links.min(1 << 10));
        for _ in 0..n_links {
            link_ids.push(r.get_u32()? as usize);
        }
        let sample_seed = r.get_u64()?;
        let values = r.get_f64_vec()?;
        let layout = FeatureLayout {
            num_links: link_ids.len(),
            channels_per_link: mode.channels_per_link(),
            k_taps,
            mode,
            normalize,
        };
        if values.len() != layout.len() {
            return Err(r
                .malformed(format!(
                    "feature vector has {} values, layout expects {}",
                    values.len(),
                    layout.len()
                ))
                .into());
        }
        samples.push(SensingSample {
            features: FeatureVector { values, layout },
            hypothesis,
            grid_index: (hypothesis == Hypothesis::Target).then_some(bin),
            position_m,
            link_ids,
            seed: sample_seed,
            bin,
        });
    }
    r.finish()?;
    Ok(Dataset {
        grid,
        campaign,
        seed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scatterer;
    use proptest::prelude::*;

    fn small_scene() -> Scene {
        Scene {
            tx_position: Point { x: 2.0, y: -0.5 },
            rx_positions: vec![
                Point { x: -0.5, y: 2.0 },
                Point { x: 2.0, y: 4.5 },
                Point { x: 4.5, y: 2.0 },
            ],
            clutter_points: vec![Scatterer {
                position: Point { x: 0.5, y: 0.5 },
                reflectivity: 0.8,
            }],
            target: Some(crate::sim::TargetSpec {
                position: Point { x: 0.0, y: 0.0 },
                body_radius_m: 0.3,
                reflectivity: 1.0,
                blockage_db: 20.0,
            }),
            seed: 0,
        }
    }

    fn small_campaign() -> CampaignConfig {
        CampaignConfig {
            sweep: SweepConfig {
                num_points: 32,
                noise_std: 0.01,
                ..SweepConfig::default()
            },
            features: FeatureParams {
                k_taps: 16,
                ..FeatureParams::default()
            },
            augmentation: 1,
        }
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            n_cols: 3,
            n_rows: 2,
            cell_m: 0.5,
            origin: Point { x: 1.0, y: 1.0 },
        }
    }

    #[test]
    fn first_cell_center() {
        let g = GridSpec {
            n_cols: 21,
            n_rows: 22,
            cell_m: 0.2,
            origin: Point { x: 0.0, y: 0.0 },
        };
        let p = g.grid_to_position(0).unwrap();
        assert!((p.x - 0.1).abs() < 1e-12 && (p.y - 0.1).abs() < 1e-12);
        let p = g.grid_to_position(g.n_cols).unwrap();
        assert!((p.x - 0.1).abs() < 1e-12 && (p.y - 0.3).abs() < 1e-12);
    }

    #[test]
    fn grid_round_trip_is_bijective() {
        let g = GridSpec::default();
        assert_eq!(g.len(), 462);
        for i in 0..g.len() {
            let p = g.grid_to_position(i).unwrap();
            assert_eq!(g.position_to_grid(p), Some(i));
        }
        assert!(g.grid_to_position(462).is_err());
        assert_eq!(g.position_to_grid(Point { x: -0.1, y: 0.1 }), None);
    }

    #[test]
    fn campaign_shape_and_balance() {
        let samples =
            generate_campaign(&small_grid(), &small_scene(), &small_campaign(), 42).unwrap();
        assert_eq!(samples.len(), 12);
        let targets = samples
            .iter()
            .filter(|s| s.hypothesis == Hypothesis::Target)
            .count();
        assert_eq!(targets, 6);
        for s in &samples {
            match s.hypothesis {
                Hypothesis::Target => {
                    assert_eq!(s.grid_index, Some(s.bin));
                    let expect = small_grid().grid_to_position(s.bin).unwrap();
                    assert_eq!(s.position_m, Some(expect));
                }
                Hypothesis::Null => {
                    assert_eq!(s.grid_index, None);
                    assert_eq!(s.position_m, None);
                }
            }
            assert_eq!(s.link_ids, vec![0, 1, 2]);
        }
    }

    #[test]
    fn campaign_is_deterministic() {
        let a = generate_campaign(&small_grid(), &small_scene(), &small_campaign(), 7).unwrap();
        let b = generate_campaign(&small_grid(), &small_scene(), &small_campaign(), 7).unwrap();
        assert_eq!(a, b);
        let c = generate_campaign(&small_grid(), &small_scene(), &small_campaign(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn null_features_ignore_grid_index() {
        let scene = small_scene();
        let cc = small_campaign();
        let a = synthesize_sample(&scene, &cc, Hypothesis::Null, None, 0, 1234).unwrap();
        let b = synthesize_sample(&scene, &cc, Hypothesis::Null, None, 5, 1234).unwrap();
        assert_eq!(a.features, b.features);
        assert_ne!(a.bin, b.bin);
    }

    #[test]
    fn augmentation_multiplies_draws() {
        let mut cc = small_campaign();
        cc.augmentation = 3;
        let samples = generate_campaign(&small_grid(), &small_scene(), &cc, 42).unwrap();
        assert_eq!(samples.len(), 36);
        // same bin+hypothesis, different draw: different noise, same truth
        assert_eq!(samples[0].bin, samples[1].bin);
        assert_eq!(samples[0].hypothesis, samples[1].hypothesis);
        assert_ne!(samples[0].seed, samples[1].seed);
        assert_ne!(samples[0].features, samples[1].features);
    }

    #[test]
    fn default_split_sizes() {
        let spec = SplitSpec::random(462, 337, 0.3, 9);
        spec.validate().unwrap();
        assert_eq!(spec.train_bins.len(), 337);
        assert_eq!(spec.test_bins.len(), 125);
        assert_eq!(spec.val_bins().len(), 101);
    }

    #[test]
    fn split_routes_pairs_together() {
        let grid = small_grid();
        let samples = generate_campaign(&grid, &small_scene(), &small_campaign(), 1).unwrap();
        let spec = SplitSpec::random(grid.len(), 4, 0.5, 3);
        let split = split_campaign(&samples, &spec).unwrap();
        assert_eq!(
            split.train.len() + split.val.len() + split.test.len(),
            samples.len()
        );
        let test_bins: BTreeSet<_> = split.test.iter().map(|s| s.bin).collect();
        for s in split.train.iter().chain(&split.val) {
            assert!(!test_bins.contains(&s.bin));
        }
        // each partition holds both hypotheses of its bins
        for part in [&split.train, &split.val, &split.test] {
            let bins: BTreeSet<_> = part.iter().map(|s| s.bin).collect();
            for b in bins {
                let hyps: Vec<_> = part
                    .iter()
                    .filter(|s| s.bin == b)
                    .map(|s| s.hypothesis)
                    .collect();
                assert!(hyps.contains(&Hypothesis::Null));
                assert!(hyps.contains(&Hypothesis::Target));
            }
        }
    }

    #[test]
    fn overlapping_split_rejected() {
        let spec = SplitSpec {
            train_bins: vec![0, 1, 2],
            test_bins: vec![2, 3],
            val_fraction: 0.0,
            seed: 0,
        };
        assert!(matches!(spec.validate(), Err(DatasetError::BadSplit(_))));
    }

    #[test]
    fn uncovered_bin_rejected() {
        let samples = generate_campaign(&small_grid(), &small_scene(), &small_campaign(), 1)
            .unwrap();
        let spec = SplitSpec {
            train_bins: vec![0, 1],
            test_bins: vec![2, 3],
            val_fraction: 0.0,
            seed: 0,
        };
        assert!(matches!(
            split_campaign(&samples, &spec),
            Err(DatasetError::BadSplit(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn split_never_leaks(grid_len in 2usize..60, n_train in 1usize..59, seed in any::<u64>(), vf in 0.0f64..0.99) {
            let n_train = n_train.min(grid_len - 1);
            let spec = SplitSpec::random(grid_len, n_train, vf, seed);
            prop_assert!(spec.validate().is_ok());
            prop_assert_eq!(spec.train_bins.len() + spec.test_bins.len(), grid_len);
            let train: BTreeSet<_> = spec.train_bins.iter().collect();
            prop_assert!(spec.test_bins.iter().all(|b| !train.contains(b)));
            let val = spec.val_bins();
            prop_assert_eq!(val.len(), (vf * n_train as f64).floor() as usize);
            prop_assert!(val.iter().all(|b| train.contains(b)));
        }
    }

    #[test]
    fn dataset_round_trip() {
        let grid = small_grid();
        let ds = Dataset::generate(grid, &small_scene(), small_campaign(), 11).unwrap();
        let dir = std::env::temp_dir().join("cirsense-dataset-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("roundtrip.cird");
        ds.save(&p).unwrap();
        let back = Dataset::load(&p).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = Dataset {
            grid: GridSpec::default(),
            campaign: CampaignConfig::default(),
            seed: 5,
            samples: Vec::new(),
        };
        let dir = std::env::temp_dir().join("cirsense-dataset-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("empty.cird");
        ds.save(&p).unwrap();
        assert_eq!(Dataset::load(&p).unwrap(), ds);
    }

    #[test]
    fn corrupted_file_is_a_format_error() {
        let ds = Dataset {
            grid: GridSpec::default(),
            campaign: CampaignConfig::default(),
            seed: 5,
            samples: Vec::new(),
        };
        let dir = std::env::temp_dir().join("cirsense-dataset-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("corrupt.cird");
        ds.save(&p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x55;
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(
            Dataset::load(&p),
            Err(DatasetError::Io(IoError::ChecksumMismatch))
        ));
    }
}
