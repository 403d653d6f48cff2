//! Dataset manifests: locating per-modality files, building or loading the
//! graphs, and assembling a [`MultiModalDataset`].

use std::path::{Path, PathBuf};

use igcn_core::{
    add_self_loops, build_similarity_network, stratified_split, sym_normalize, DenseMatrix,
    ModalityInput, MultiModalDataset, SparseAdjacency, SplitMask, ThresholdReport,
};
use serde::{Deserialize, Serialize};

use crate::error::{format_err, io_err, Error, Result};
use crate::formats;

/// Train / validation / test fractions used when no split file is given.
pub const SPLIT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

fn default_k() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityEntry {
    pub name: String,
    pub features: PathBuf,
    /// Precomputed graph; when absent a similarity network is built.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
}

/// JSON description of a dataset on disk. Relative paths resolve against
/// the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub modalities: Vec<ModalityEntry>,
    pub labels: PathBuf,
    /// Fixed split file; when absent a stratified split is drawn per run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    /// Target average degree for built similarity networks.
    #[serde(default = "default_k")]
    pub k: f64,
    /// Defaults to the largest label plus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| format_err(path, e))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        formats::write_text(path, &(text + "\n"))
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.modalities.is_empty() {
            return Err("manifest lists no modalities".into());
        }
        if !(self.k > 0.0) {
            return Err(format!("k = {} must be positive", self.k));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn has_fixed_graphs(&self) -> bool {
        self.modalities.iter().any(|m| m.edges.is_some())
    }
}

/// Everything read for a manifest, before a split is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub names: Vec<String>,
    pub features: Vec<DenseMatrix>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub fixed_split: Option<SplitMask>,
    pub k: f64,
    /// Loaded edge lists, `None` where the graph is built from features.
    pub edge_lists: Vec<Option<SparseAdjacency>>,
}

/// Graph of one modality with its unit self loops, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityGraph {
    pub adjacency: SparseAdjacency,
    /// Present when the graph was built from feature similarity.
    pub report: Option<ThresholdReport>,
}

impl ModalityGraph {
    /// Undirected edges, self loops excluded.
    pub fn edge_count(&self) -> usize {
        self.adjacency.off_diagonal_count() / 2
    }
}

impl RawDataset {
    pub fn read(manifest: &DatasetManifest) -> Result<Self> {
        let labels_path = manifest.resolve(&manifest.labels);
        let labels = formats::read_labels(&labels_path)?;
        let m = labels.len();
        let observed = labels.iter().max().map_or(0, |&l| l + 1);
        let num_classes = manifest.num_classes.unwrap_or(observed);
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(format_err(
                &labels_path,
                format!("label {bad} outside 0..{num_classes}"),
            ));
        }

        let mut names = Vec::new();
        let mut features = Vec::new();
        let mut edge_lists = Vec::new();
        for entry in &manifest.modalities {
            let path = manifest.resolve(&entry.features);
            let x = formats::read_features(&path)?;
            if x.rows() != m {
                return Err(format_err(
                    &path,
                    format!("{} rows but {m} labels", x.rows()),
                ));
            }
            let edges = match &entry.edges {
                Some(e) => Some(formats::read_edges(&manifest.resolve(e), m)?),
                None => None,
            };
            names.push(entry.name.clone());
            features.push(x);
            edge_lists.push(edges);
        }
        let fixed_split = match &manifest.split {
            Some(s) => Some(formats::read_split(&manifest.resolve(s), m)?),
            None => None,
        };
        Ok(Self {
            names,
            features,
            labels,
            num_classes,
            fixed_split,
            k: manifest.k,
            edge_lists,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Per-modality graphs: loaded edge lists as given, otherwise similarity
    /// networks at average degree `k` (the manifest's when `None`).
    pub fn graphs(&self, k: Option<f64>) -> Result<Vec<ModalityGraph>> {
        let k = k.unwrap_or(self.k);
        self.features
            .iter()
            .zip(&self.edge_lists)
            .map(|(x, edges)| match edges {
                Some(e) => Ok(ModalityGraph {
                    adjacency: add_self_loops(e)?,
                    report: None,
                }),
                None => {
                    let (adjacency, report) = build_similarity_network(x, k)?;
                    Ok(ModalityGraph {
                        adjacency,
                        report: Some(report),
                    })
                }
            })
            .collect()
    }

    /// The fixed split if there is one, else a stratified split drawn with
    /// `seed`.
    pub fn split(&self, seed: u64) -> Result<SplitMask> {
        match &self.fixed_split {
            Some(s) => Ok(s.clone()),
            None => Ok(stratified_split(&self.labels, SPLIT_RATIOS, seed)?),
        }
    }

    pub fn assemble(&self, graphs: &[ModalityGraph], masks: SplitMask) -> Result<MultiModalDataset> {
        let modalities = self
            .features
            .iter()
            .zip(graphs)
            .map(|(x, g)| ModalityInput::new(x.clone(), sym_normalize(&g.adjacency)?))
            .collect::<igcn_core::Result<Vec<_>>>()?;
        Ok(MultiModalDataset::new(
            modalities,
            self.labels.clone(),
            self.num_classes,
            masks,
        )?)
    }
}

/// A dataset ready for training, with the graphs it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub names: Vec<String>,
    pub graphs: Vec<ModalityGraph>,
    pub dataset: MultiModalDataset,
}

/// Reads every file named by `manifest`, builds or loads the graphs, adds
/// self loops, normalizes, and attaches the fixed split or a stratified
/// split drawn with `split_seed`.
pub fn load_dataset(manifest: &DatasetManifest, split_seed: u64) -> Result<LoadedDataset> {
    let raw = RawDataset::read(manifest)?;
    let graphs = raw.graphs(None)?;
    let dataset = raw.assemble(&graphs, raw.split(split_seed)?)?;
    Ok(LoadedDataset {
        names: raw.names,
        graphs,
        dataset,
    })
}

/// Writes `loaded` under `dir` as features, labels, edge lists and split
/// files plus a `manifest.json` that reloads to an equal dataset.
pub fn save_dataset(loaded: &LoadedDataset, dir: &Path) -> Result<PathBuf> {
    let ds = &loaded.dataset;
    let mut modalities = Vec::new();
    for (i, (md, g)) in ds.modalities().iter().zip(&loaded.graphs).enumerate() {
        let name = loaded.names.get(i).cloned().unwrap_or_else(|| format!("m{i}"));
        let features = PathBuf::from(format!("{name}_features.csv"));
        let edges = PathBuf::from(format!("{name}_edges.csv"));
        formats::write_features(&dir.join(&features), md.features())?;
        formats::write_edges(&dir.join(&edges), &g.adjacency)?;
        modalities.push(ModalityEntry {
            name,
            features,
            edges: Some(edges),
        });
    }
    formats::write_labels(&dir.join("labels.csv"), ds.labels())?;
    formats::write_split(&dir.join("split.csv"), ds.masks())?;
    let manifest = DatasetManifest {
        modalities,
        labels: "labels.csv".into(),
        split: Some("split.csv".into()),
        k: default_k(),
        num_classes: Some(ds.num_classes()),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Writes each modality's graph as an edge list and a CSV of threshold
/// reports to `dir`.
pub fn write_graphs(names: &[String], graphs: &[ModalityGraph], dir: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for (name, g) in names.iter().zip(graphs) {
        formats::write_edges(&dir.join(format!("{name}_edges.csv")), &g.adjacency)?;
        let (eps, deg, k) = match g.report {
            Some(r) => (
                r.epsilon.to_string(),
                r.achieved_avg_degree.to_string(),
                r.requested_k.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        rows.push(vec![name.clone(), k, eps, deg, g.edge_count().to_string()]);
    }
    formats::write_table(
        &dir.join("threshold_reports.csv"),
        &["modality", "k", "epsilon", "achieved_avg_degree", "edges"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_modality(dir: &Path, name: &str, rows: usize) {
        let data = (0..rows * 3).map(|v| ((v * 7919) % 13) as f64 - 6.0).collect();
        let x = DenseMatrix::from_vec(rows, 3, data).unwrap();
        formats::write_features(&dir.join(format!("{name}.csv")), &x).unwrap();
    }

    fn manifest(dir: &Path, rows: [usize; 2]) -> DatasetManifest {
        write_modality(dir, "a", rows[0]);
        write_modality(dir, "b", rows[1]);
        let labels: Vec<usize> = (0..10).map(|j| j % 2).collect();
        formats::write_labels(&dir.join("labels.csv"), &labels).unwrap();
        let text = r#"{
            "modalities": [
                {"name": "a", "features": "a.csv"},
                {"name": "b", "features": "b.csv"}
            ],
            "labels": "labels.csv"
        }"#;
        std::fs::write(dir.join("manifest.json"), text).unwrap();
        DatasetManifest::load(&dir.join("manifest.json")).unwrap()
    }

    #[test]
    fn shapes_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), [10, 10]);
        assert_eq!(m.k, 3.0);
        let loaded = load_dataset(&m, 0).unwrap();
        assert_eq!(loaded.dataset.num_modalities(), 2);
        assert_eq!(loaded.dataset.num_nodes(), 10);
        assert_eq!(loaded.dataset.num_classes(), 2);
        for g in &loaded.graphs {
            assert!(g.report.unwrap().achieved_avg_degree >= 3.0);
        }
    }

    #[test]
    fn row_count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), [10, 9]);
        let err = load_dataset(&m, 0).unwrap_err();
        assert!(err.to_string().contains("9 rows"), "{err}");
    }

    #[test]
    fn label_outside_declared_classes_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path(), [10, 10]);
        m.num_classes = Some(1);
        assert!(load_dataset(&m, 0).is_err());
    }

    #[test]
    fn unknown_manifest_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"modalities": [], "labels": "l.csv"}"#).unwrap();
        assert!(DatasetManifest::load(&p).is_err());
        std::fs::write(&p, r#"{"modalities": [{"name":"a","features":"a.csv"}], "labels": "l.csv", "kk": 3}"#).unwrap();
        assert!(DatasetManifest::load(&p).is_err());
    }

    #[test]
    fn edge_list_is_symmetrized_with_self_loops() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path(), [10, 10]);
        std::fs::write(dir.path().join("e.csv"), "src,dst,weight\n3,7,1\n").unwrap();
        m.modalities[0].edges = Some("e.csv".into());
        let loaded = load_dataset(&m, 0).unwrap();
        let g = &loaded.graphs[0];
        assert_eq!(g.adjacency.get(3, 7), Some(1.0));
        assert_eq!(g.adjacency.get(7, 3), Some(1.0));
        assert_eq!(g.edge_count(), 1);
        assert!(g.report.is_none());
        let norm = loaded.dataset.modalities()[0].norm_adj();
        assert_eq!(norm.get(3, 7), Some(0.5));
        assert_eq!(norm.get(0, 0), Some(1.0));
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), [10, 10]);
        let loaded = load_dataset(&m, 4).unwrap();
        let out = dir.path().join("copy");
        let path = save_dataset(&loaded, &out).unwrap();
        let again = load_dataset(&DatasetManifest::load(&path).unwrap(), 99).unwrap();
        assert_eq!(again.dataset, loaded.dataset);
        assert_eq!(again.names, loaded.names);
    }
}
