#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtkit_core::ingest::write_xyz_extended;
use qtkit_core::synthetic::{fixture_dataset, write_sumviz};

pub fn qtkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtkit")).args(args).output().expect("qtkit runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes the fixture molecules as raw `.xyz` and `.sumviz` files plus a
/// small run config; returns the config path.
pub fn toy_inputs(root: &Path) -> PathBuf {
    let ds = fixture_dataset().unwrap();
    let xyz = root.join("raw/xyz");
    let sv = root.join("raw/sumviz");
    fs::create_dir_all(&xyz).unwrap();
    fs::create_dir_all(&sv).unwrap();
    for m in &ds.molecules {
        fs::write(xyz.join(format!("{}.xyz", m.id)), write_xyz_extended(m)).unwrap();
        fs::write(sv.join(format!("{}.sumviz", m.id)), write_sumviz(m).unwrap()).unwrap();
    }
    let cfg = format!(
        r#"seed = 7

[ingest]
xyz_dir = "{xyz}"
sumviz_dir = "{sv}"

[cluster]
cutoff = 6.0
n_max = 3
l_max = 2
sigma = 0.7
max_share = 0.5
elements = [
    {{ element = "H", pca_components = 6, min_cluster_size = 15, min_samples = 5 }},
    {{ element = "C", pca_components = 6, min_cluster_size = 15, min_samples = 5 }},
    {{ element = "N", pca_components = 4, min_cluster_size = 5, min_samples = 3 }},
    {{ element = "O", pca_components = 4, min_cluster_size = 5, min_samples = 3 }},
]

[split]
seeds = [1, 2]
folds = 2

[train]
variants = ["SG-8-12", "SFC2"]
depth = 1
width = 6
epochs = 2
batch_size = 8

[experiment]
enabled = true
fractions = [0.5, 1.0]
properties = ["gap"]
depth = 1
width = 6
epochs = 2
batch_size = 8
"#,
        xyz = xyz.display(),
        sv = sv.display()
    );
    let path = root.join("run.toml");
    fs::write(&path, cfg).unwrap();
    path
}
