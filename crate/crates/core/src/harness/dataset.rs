use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FundamentalMatrix, ImageDims};
use crate::harness::formats::{
    load_correspondences, load_fundamental, load_keypoints, write_correspondences, write_descriptors,
    write_fundamental, write_keypoints,
};
use crate::matching::{Descriptor, Keypoint, MatchSet};
use crate::seed;
use crate::synth::{generate_pair, plant_descriptors, DescriptorConfig, Rig, SceneConfig};

/// One pair entry of a dataset manifest. File paths are relative to the
/// manifest. Either `matches` or all four keypoint/descriptor files are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub id: String,
    pub dims1: ImageDims,
    pub dims2: ImageDims,
    pub fundamental: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matches: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints2: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors2: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub pairs: Vec<PairEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchSource {
    Matches(MatchSet),
    Keypoints(Vec<Keypoint>, Vec<Keypoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairInput {
    pub id: String,
    pub dims1: ImageDims,
    pub dims2: ImageDims,
    pub f_gt: FundamentalMatrix,
    pub source: MatchSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub pairs: Vec<PairInput>,
}

/// Loads a manifest and every file it references.
pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<Dataset> {
    let path = manifest.as_ref();
    let text = fs::read_to_string(path)?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::with_capacity(m.pairs.len());
    for e in &m.pairs {
        ImageDims::new(e.dims1.h, e.dims1.w)?;
        ImageDims::new(e.dims2.h, e.dims2.w)?;
        let f_gt = load_fundamental(dir.join(&e.fundamental))?;
        let source = match (&e.matches, &e.keypoints1, &e.descriptors1, &e.keypoints2, &e.descriptors2) {
            (Some(mp), None, None, None, None) => MatchSource::Matches(load_correspondences(dir.join(mp), None)?),
            (None, Some(k1), Some(d1), Some(k2), Some(d2)) => MatchSource::Keypoints(
                load_keypoints(dir.join(k1), dir.join(d1))?,
                load_keypoints(dir.join(k2), dir.join(d2))?,
            ),
            _ => {
                return Err(Error::Config(format!(
                    "pair '{}' needs either matches or keypoints1/descriptors1/keypoints2/descriptors2",
                    e.id
                )))
            }
        };
        pairs.push(PairInput {
            id: e.id.clone(),
            dims1: e.dims1,
            dims2: e.dims2,
            f_gt,
            source,
        });
    }
    Ok(Dataset { name: m.name, pairs })
}

/// Parameters of a generated synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDatasetConfig {
    pub name: String,
    pub pairs: usize,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub outlier_rate: f64,
    /// Cycled over the pairs.
    pub rigs: Vec<Rig>,
    /// Every `descriptor_every`-th pair ships keypoints and descriptors
    /// instead of matches (0 disables).
    pub descriptor_every: usize,
    pub descriptor_dim: usize,
    pub seed: u64,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            pairs: 12,
            n_points: 150,
            noise_sigma: 0.5,
            outlier_rate: 0.4,
            rigs: vec![Rig::Random, Rig::ShortBaselineForward, Rig::WideBaseline],
            descriptor_every: 4,
            descriptor_dim: 32,
            seed: 2024,
        }
    }
}

/// Writes a synthetic dataset (manifest `dataset.toml` plus data files)
/// into `dir` and returns the manifest path.
pub fn write_synthetic_dataset(dir: impl AsRef<Path>, cfg: &SynthDatasetConfig) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if cfg.rigs.is_empty() {
        return Err(Error::InvalidInput("at least one rig is required".into()));
    }
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(cfg.pairs);
    for i in 0..cfg.pairs {
        let id = format!("pair_{i:04}");
        let scene = SceneConfig {
            noise_sigma: cfg.noise_sigma,
            outlier_rate: cfg.outlier_rate,
            ..SceneConfig::new(cfg.rigs[i % cfg.rigs.len()], cfg.n_points, seed::derive(cfg.seed, &[i as u64]))
        };
        let pair = generate_pair(&scene)?;
        let fname = format!("{id}.F.txt");
        fs::write(dir.join(&fname), write_fundamental(&pair.f_gt))?;
        let mut entry = PairEntry {
            id: id.clone(),
            dims1: pair.dims,
            dims2: pair.dims,
            fundamental: fname.into(),
            matches: None,
            keypoints1: None,
            descriptors1: None,
            keypoints2: None,
            descriptors2: None,
        };
        if cfg.descriptor_every > 0 && i % cfg.descriptor_every == cfg.descriptor_every - 1 {
            let mut dcfg = DescriptorConfig::new(cfg.descriptor_dim, seed::derive(cfg.seed, &[i as u64, 1]));
            dcfg.distractors = cfg.n_points / 4;
            let kp = plant_descriptors(&pair, &dcfg);
            for (tag, kps) in [("1", &kp.image1), ("2", &kp.image2)] {
                let loc: Vec<_> = kps.iter().map(|k| k.location).collect();
                let desc: Vec<Descriptor> = kps.iter().map(|k| k.descriptor.clone()).collect();
                let kname = format!("{id}.kp{tag}.txt");
                let dname = format!("{id}.desc{tag}.bin");
                fs::write(dir.join(&kname), write_keypoints(&loc))?;
                fs::write(dir.join(&dname), write_descriptors(&desc)?)?;
                if tag == "1" {
                    entry.keypoints1 = Some(kname.into());
                    entry.descriptors1 = Some(dname.into());
                } else {
                    entry.keypoints2 = Some(kname.into());
                    entry.descriptors2 = Some(dname.into());
                }
            }
        } else {
            let mname = format!("{id}.matches.txt");
            fs::write(dir.join(&mname), write_correspondences(pair.correspondences()))?;
            entry.matches = Some(mname.into());
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        name: cfg.name.clone(),
        pairs: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join("dataset.toml");
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthDatasetConfig {
            pairs: 4,
            n_points: 40,
            ..Default::default()
        };
        let manifest = write_synthetic_dataset(dir.path(), &cfg).unwrap();
        let ds = load_dataset(&manifest).unwrap();
        assert_eq!(ds.pairs.len(), 4);
        assert!(matches!(ds.pairs[3].source, MatchSource::Keypoints(..)));
        let MatchSource::Matches(ms) = &ds.pairs[0].source else { panic!() };
        let scene = SceneConfig {
            noise_sigma: cfg.noise_sigma,
            outlier_rate: cfg.outlier_rate,
            ..SceneConfig::new(Rig::Random, 40, seed::derive(cfg.seed, &[0]))
        };
        let pair = generate_pair(&scene).unwrap();
        assert_eq!(ms.correspondences, pair.corrs.correspondences);
        assert_eq!(ds.pairs[0].f_gt, pair.f_gt);
    }
}
