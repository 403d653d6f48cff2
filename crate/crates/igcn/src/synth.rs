//! Synthetic multi-modal datasets where each class is visible in only one
//! modality.
//!
//! Node `j` has label `j mod c`, so classes are balanced. For a node of class
//! `y`, modality `informative[y]` holds a class mean plus Gaussian noise;
//! every other modality holds pure noise. Class means are drawn with
//! standard deviation `separation` per coordinate.

use std::path::{Path, PathBuf};

use igcn_core::rng::seeded;
use igcn_core::DenseMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, LoadedDataset, ModalityEntry, RawDataset};
use crate::error::{Error, Result};
use crate::formats;

fn default_separation() -> f64 {
    1.0
}

fn default_k() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub num_modalities: usize,
    /// One entry per modality, or a single entry shared by all.
    pub feature_dims: Vec<usize>,
    /// Class → modality carrying that class's signal.
    pub informative: Vec<usize>,
    pub noise_scale: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    pub seed: u64,
    /// Average degree of the similarity networks built on load.
    #[serde(default = "default_k")]
    pub k: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_classes < 2 || self.num_modalities == 0 {
            return bad("need at least 2 classes and 1 modality".into());
        }
        if self.num_nodes < self.num_classes {
            return bad(format!(
                "{} nodes cannot cover {} classes",
                self.num_nodes, self.num_classes
            ));
        }
        if self.feature_dims.len() != 1 && self.feature_dims.len() != self.num_modalities {
            return bad(format!(
                "{} feature dims for {} modalities",
                self.feature_dims.len(),
                self.num_modalities
            ));
        }
        if self.feature_dims.contains(&0) {
            return bad("feature dims must be positive".into());
        }
        if self.informative.len() != self.num_classes {
            return bad(format!(
                "informative map has {} entries for {} classes",
                self.informative.len(),
                self.num_classes
            ));
        }
        if let Some(&i) = self.informative.iter().find(|&&i| i >= self.num_modalities) {
            return bad(format!("informative modality {i} out of range"));
        }
        if !(self.noise_scale >= 0.0) || !(self.separation > 0.0) {
            return bad("noise scale must be >= 0 and separation > 0".into());
        }
        Ok(())
    }

    pub fn dim(&self, modality: usize) -> usize {
        if self.feature_dims.len() == 1 {
            self.feature_dims[0]
        } else {
            self.feature_dims[modality]
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::error::io_err(path))?;
        let spec: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws features and labels for `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<RawDataset> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let (m, c, p) = (spec.num_nodes, spec.num_classes, spec.num_modalities);

    let means: Vec<Vec<f64>> = (0..c)
        .map(|y| {
            let d = spec.dim(spec.informative[y]);
            (0..d).map(|_| spec.separation * noise.sample(&mut rng)).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..m).map(|j| j % c).collect();

    let mut features = Vec::with_capacity(p);
    for i in 0..p {
        let d = spec.dim(i);
        let mut x = DenseMatrix::zeros(m, d);
        for (j, &y) in labels.iter().enumerate() {
            let row = x.row_mut(j);
            for (t, v) in row.iter_mut().enumerate() {
                let base = if spec.informative[y] == i { means[y][t] } else { 0.0 };
                *v = base + spec.noise_scale * noise.sample(&mut rng);
            }
        }
        features.push(x);
    }

    Ok(RawDataset {
        names: (0..p).map(|i| format!("modality{i}")).collect(),
        features,
        labels,
        num_classes: c,
        fixed_split: None,
        k: spec.k,
        edge_lists: vec![None; p],
    })
}

/// Generates the dataset and assembles it with a stratified split drawn
/// with `split_seed`.
pub fn generate_synthetic(spec: &SyntheticSpec, split_seed: u64) -> Result<LoadedDataset> {
    let raw = generate(spec)?;
    let graphs = raw.graphs(None)?;
    let dataset = raw.assemble(&graphs, raw.split(split_seed)?)?;
    Ok(LoadedDataset {
        names: raw.names,
        graphs,
        dataset,
    })
}

/// Writes features, labels and a `manifest.json` (graphs built on load)
/// under `dir`. Returns the manifest path.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<PathBuf> {
    let raw = generate(spec)?;
    let mut modalities = Vec::new();
    for (name, x) in raw.names.iter().zip(&raw.features) {
        let file = PathBuf::from(format!("{name}_features.csv"));
        formats::write_features(&dir.join(&file), x)?;
        modalities.push(ModalityEntry {
            name: name.clone(),
            features: file,
            edges: None,
        });
    }
    formats::write_labels(&dir.join("labels.csv"), &raw.labels)?;
    let manifest = DatasetManifest {
        modalities,
        labels: "labels.csv".into(),
        split: None,
        k: spec.k,
        num_classes: Some(spec.num_classes),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use igcn_core::cosine_similarity_matrix;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            num_nodes: 60,
            num_classes: 3,
            num_modalities: 2,
            feature_dims: vec![8],
            informative: vec![0, 1, 0],
            noise_scale: 0.3,
            separation: 1.0,
            seed: 11,
            k: 3.0,
        }
    }

    #[test]
    fn shapes_and_balance() {
        let raw = generate(&spec()).unwrap();
        assert_eq!(raw.features.len(), 2);
        for x in &raw.features {
            assert_eq!(x.shape(), (60, 8));
        }
        for y in 0..3 {
            assert_eq!(raw.labels.iter().filter(|&&l| l == y).count(), 20);
        }
    }

    #[test]
    fn zero_noise_collapses_informative_rows() {
        let raw = generate(&SyntheticSpec {
            noise_scale: 0.0,
            ..spec()
        })
        .unwrap();
        let s = cosine_similarity_matrix(&raw.features[0]).unwrap();
        // nodes 0 and 3 are both class 0, informative in modality 0
        assert_eq!(raw.features[0].row(0), raw.features[0].row(3));
        assert!((s.get(0, 3) - 1.0).abs() < 1e-12);
        // class 1 is pure (zero) noise in modality 0
        assert!(raw.features[0].row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn files_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_synthetic(&spec(), a.path()).unwrap();
        write_synthetic(&spec(), b.path()).unwrap();
        for f in ["labels.csv", "modality0_features.csv", "modality1_features.csv"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
        let manifest = DatasetManifest::load(&a.path().join("manifest.json")).unwrap();
        let loaded = crate::dataset::load_dataset(&manifest, 3).unwrap();
        assert_eq!(loaded.dataset, generate_synthetic(&spec(), 3).unwrap().dataset);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let cases = [
            SyntheticSpec {
                informative: vec![0, 2, 0],
                ..spec()
            },
            SyntheticSpec {
                informative: vec![0, 1],
                ..spec()
            },
            SyntheticSpec {
                feature_dims: vec![8, 8, 8],
                ..spec()
            },
            SyntheticSpec {
                noise_scale: -1.0,
                ..spec()
            },
        ];
        for s in cases {
            assert!(generate(&s).is_err(), "{s:?}");
        }
    }
}
