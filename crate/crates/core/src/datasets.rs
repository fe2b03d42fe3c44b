//! Synthetic graph generators and edge-list dataset loading.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ShsError};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Pa { n: usize, seed: u64 },
    Er { n: usize, p: f64, seed: u64 },
    File { path: PathBuf },
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DatasetSpec::Pa { n, .. } if n < 2 => {
                Err(ShsError::config("preferential attachment needs n >= 2"))
            }
            DatasetSpec::Er { n, p, .. } if n == 0 || !(0.0..=1.0).contains(&p) => {
                Err(ShsError::config(format!(
                    "Erdos-Renyi needs n > 0 and 0 <= p <= 1, got n={n}, p={p}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Pa { n, .. } => format!("PA({n})"),
            DatasetSpec::Er { n, p, .. } => format!("ER({n},{p})"),
            DatasetSpec::File { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    pub fn build(&self) -> Result<Graph> {
        self.validate()?;
        match self {
            DatasetSpec::Pa { n, seed } => generate_pa(*n, *seed),
            DatasetSpec::Er { n, p, seed } => generate_er(*n, *p, *seed),
            DatasetSpec::File { path } => load_edge_list(path),
        }
    }
}

/// Preferential attachment with one edge per arriving node.
///
/// Starts from the edge `{0, 1}`; node `v >= 2` attaches to an existing node
/// chosen with probability proportional to its current degree. The result
/// is a tree: connected with `n - 1` edges.
pub fn generate_pa(n: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(ShsError::config("preferential attachment needs n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    g.add_edge(0, 1)?;
    // Each node appears once per incident edge, so a uniform draw from this
    // list is a degree-proportional draw.
    let mut endpoints = Vec::with_capacity(2 * n);
    endpoints.extend_from_slice(&[0, 1]);
    for v in 2..n {
        let target = endpoints[rng.gen_range(0..endpoints.len())];
        g.add_edge(v, target)?;
        endpoints.push(v);
        endpoints.push(target);
    }
    Ok(g)
}

/// G(n, p): every unordered pair independently with probability `p`.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(ShsError::config(format!(
            "Erdos-Renyi needs n > 0 and 0 <= p <= 1, got n={n}, p={p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

/// Published sizes of the bundled real-world networks, keyed by file stem.
pub const KNOWN_DATASETS: &[(&str, usize, usize)] =
    &[("dolphins", 62, 159), ("football", 115, 613)];

/// Reads an edge-list file. Files whose stem names a known dataset must
/// match its published node and edge counts.
pub fn load_edge_list(path: &Path) -> Result<Graph> {
    let g = Graph::read_edge_list(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    if let Some(&(name, n, m)) = KNOWN_DATASETS.iter().find(|(name, ..)| *name == stem) {
        if g.node_count() != n || g.edge_count() != m {
            return Err(ShsError::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!(
                    "{name} should have {n} nodes and {m} edges, found {} and {}",
                    g.node_count(),
                    g.edge_count()
                ),
            });
        }
    }
    Ok(g)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Manifest entry describing a generated or loaded graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub spec: DatasetSpec,
    pub nodes: usize,
    pub edges: usize,
    /// SHA-256 of the canonical edge-list serialization.
    pub checksum: String,
}

impl DatasetManifest {
    pub fn describe(spec: &DatasetSpec, g: &Graph) -> Self {
        DatasetManifest {
            name: spec.name(),
            spec: spec.clone(),
            nodes: g.node_count(),
            edges: g.edge_count(),
            checksum: sha256_hex(g.to_edge_list().as_bytes()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pa_is_a_tree() {
        let g = generate_pa(2, 0).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        for n in [3, 17, 500] {
            let g = generate_pa(n, 42).unwrap();
            assert_eq!(g.edge_count(), n - 1);
            assert_eq!(g.connected_components().component_count(), 1);
        }
        assert!(generate_pa(1, 0).is_err());
    }

    #[test]
    fn pa_prefers_hubs() {
        // Node 0 and 1 start with degree 1 each and should end far above the
        // median degree.
        let g = generate_pa(2000, 5).unwrap();
        let max = (0..2000).map(|i| g.degree(i)).max().unwrap();
        assert!(max >= 20, "max degree {max}");
    }

    #[test]
    fn er_extremes() {
        assert_eq!(generate_er(30, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(generate_er(30, 1.0, 1).unwrap().edge_count(), 30 * 29 / 2);
        assert!(generate_er(30, 1.5, 1).is_err());
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        assert_eq!(
            generate_er(80, 0.1, 3).unwrap().to_edge_list(),
            generate_er(80, 0.1, 3).unwrap().to_edge_list()
        );
        assert_ne!(generate_pa(80, 3).unwrap(), generate_pa(80, 4).unwrap());
    }

    #[test]
    fn known_dataset_counts_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dolphins.txt");
        std::fs::write(&path, "n 62\n0 1\n").unwrap();
        assert!(load_edge_list(&path).is_err());
        let other = dir.path().join("toy.txt");
        std::fs::write(&other, "n 62\n0 1\n").unwrap();
        assert_eq!(load_edge_list(&other).unwrap().edge_count(), 1);
    }

    #[test]
    fn manifest_checksum_tracks_content() {
        let spec = DatasetSpec::Pa { n: 50, seed: 1 };
        let a = DatasetManifest::describe(&spec, &spec.build().unwrap());
        let b = DatasetManifest::describe(&spec, &spec.build().unwrap());
        assert_eq!(a, b);
        assert_eq!(a.checksum.len(), 64);
        assert_eq!(a.name, "PA(50)");
    }
}
