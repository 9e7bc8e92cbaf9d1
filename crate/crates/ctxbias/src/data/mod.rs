//! Dataset ingestion, superclass maps, feature files, and context corruption.
//!
//! Loaders are pure functions of file bytes: loading the same file twice
//! yields bit-identical datasets, and datasets are immutable after load.
//! Pixels are scaled by 1/255 into `[0, 1]` with no centering.

mod cifar;
mod ctxf;
mod idx;

pub use cifar::load_cifar100;
pub use ctxf::{load_features, save_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use idx::{load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};

use crate::error::{Error, Result};
use crate::nn::elu;
use crate::tensor::{Matrix, Rng};

/// A split of a dataset: features plus fine and coarse labels per row.
///
/// Invariants: every fine label is below `num_fine`, every coarse label below
/// `num_coarse`, and the coarse label is a deterministic function of the fine
/// label for datasets built from a [`SuperclassMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub fine_labels: Vec<usize>,
    pub coarse_labels: Vec<usize>,
    pub num_fine: usize,
    pub num_coarse: usize,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        fine_labels: Vec<usize>,
        coarse_labels: Vec<usize>,
        num_fine: usize,
        num_coarse: usize,
    ) -> Result<LabeledDataset> {
        if fine_labels.len() != features.rows() || coarse_labels.len() != features.rows() {
            return Err(Error::Parameter(format!(
                "dataset with {} rows has {} fine / {} coarse labels",
                features.rows(),
                fine_labels.len(),
                coarse_labels.len()
            )));
        }
        if let Some(&bad) = fine_labels.iter().find(|&&l| l >= num_fine) {
            return Err(Error::Parameter(format!(
                "fine label {bad} out of range for {num_fine} classes"
            )));
        }
        if let Some(&bad) = coarse_labels.iter().find(|&&l| l >= num_coarse) {
            return Err(Error::Parameter(format!(
                "coarse label {bad} out of range for {num_coarse} superclasses"
            )));
        }
        Ok(LabeledDataset {
            features,
            fine_labels,
            coarse_labels,
            num_fine,
            num_coarse,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// The first `n` samples (or all of them if `n` exceeds the length).
    pub fn take(&self, n: usize) -> LabeledDataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        LabeledDataset {
            features: self.features.select_rows(&idx).expect("in range"),
            fine_labels: self.fine_labels[..n].to_vec(),
            coarse_labels: self.coarse_labels[..n].to_vec(),
            num_fine: self.num_fine,
            num_coarse: self.num_coarse,
        }
    }

    /// Splits into the first `n` samples and the rest, e.g. to carve a test
    /// split out of one synthetic draw.
    pub fn split_at(&self, n: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        if n > self.len() {
            return Err(Error::Index {
                op: "split_at",
                index: n,
                bound: self.len(),
            });
        }
        let head = self.take(n);
        let idx: Vec<usize> = (n..self.len()).collect();
        let tail = LabeledDataset {
            features: self.features.select_rows(&idx)?,
            fine_labels: self.fine_labels[n..].to_vec(),
            coarse_labels: self.coarse_labels[n..].to_vec(),
            num_fine: self.num_fine,
            num_coarse: self.num_coarse,
        };
        Ok((head, tail))
    }
}

/// Total map from fine labels to superclasses, with names for both levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperclassMap {
    table: Vec<usize>,
    fine_names: Vec<String>,
    coarse_names: Vec<String>,
}

impl SuperclassMap {
    /// Builds a map from a fine-to-coarse table; `table[fine] = coarse`.
    pub fn new(table: Vec<usize>, fine_names: Vec<String>, coarse_names: Vec<String>) -> Result<SuperclassMap> {
        if fine_names.len() != table.len() {
            return Err(Error::Parameter(format!(
                "{} fine names for a table of {}",
                fine_names.len(),
                table.len()
            )));
        }
        if let Some(&bad) = table.iter().find(|&&c| c >= coarse_names.len()) {
            return Err(Error::Parameter(format!(
                "superclass index {bad} out of range for {} names",
                coarse_names.len()
            )));
        }
        Ok(SuperclassMap { table, fine_names, coarse_names })
    }

    pub fn num_fine(&self) -> usize {
        self.table.len()
    }

    pub fn num_coarse(&self) -> usize {
        self.coarse_names.len()
    }

    /// The superclass of a fine label.
    pub fn coarse_of(&self, fine: usize) -> Result<usize> {
        self.table.get(fine).copied().ok_or(Error::Index {
            op: "coarse_of",
            index: fine,
            bound: self.table.len(),
        })
    }

    pub fn fine_name(&self, fine: usize) -> &str {
        &self.fine_names[fine]
    }

    pub fn coarse_name(&self, coarse: usize) -> &str {
        &self.coarse_names[coarse]
    }

    /// Recovers the map recorded in a dataset's labels, verifying that the
    /// coarse label really is a function of the fine label.
    pub fn from_dataset(ds: &LabeledDataset) -> Result<SuperclassMap> {
        let mut table = vec![usize::MAX; ds.num_fine];
        for (&fine, &coarse) in ds.fine_labels.iter().zip(&ds.coarse_labels) {
            if table[fine] == usize::MAX {
                table[fine] = coarse;
            } else if table[fine] != coarse {
                return Err(Error::Parameter(format!(
                    "fine label {fine} maps to both superclass {} and {coarse}",
                    table[fine]
                )));
            }
        }
        if let Some(missing) = table.iter().position(|&c| c == usize::MAX) {
            return Err(Error::Parameter(format!(
                "fine label {missing} never appears in the dataset"
            )));
        }
        let fine_names = (0..ds.num_fine).map(|i| format!("fine-{i}")).collect();
        let coarse_names = (0..ds.num_coarse).map(|i| format!("coarse-{i}")).collect();
        SuperclassMap::new(table, fine_names, coarse_names)
    }
}

/// The Fashion-MNIST superclass grouping used throughout this crate:
/// Tops = {T-shirt/top, Pullover, Coat, Shirt}, Bottoms = {Trouser, Dress},
/// Other = {Sandal, Sneaker, Bag, Ankle boot}.
pub fn fashion_superclass_map() -> SuperclassMap {
    const TOPS: usize = 0;
    const BOTTOMS: usize = 1;
    const OTHER: usize = 2;
    let table = vec![
        TOPS,    // 0 T-shirt/top
        BOTTOMS, // 1 Trouser
        TOPS,    // 2 Pullover
        BOTTOMS, // 3 Dress
        TOPS,    // 4 Coat
        OTHER,   // 5 Sandal
        TOPS,    // 6 Shirt
        OTHER,   // 7 Sneaker
        OTHER,   // 8 Bag
        OTHER,   // 9 Ankle boot
    ];
    let fine_names = [
        "T-shirt/top",
        "Trouser",
        "Pullover",
        "Dress",
        "Coat",
        "Sandal",
        "Shirt",
        "Sneaker",
        "Bag",
        "Ankle boot",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let coarse_names = vec!["Tops".to_string(), "Bottoms".to_string(), "Other".to_string()];
    SuperclassMap::new(table, fine_names, coarse_names).expect("static map is valid")
}

/// Probability that a sample's context is replaced by a uniformly random
/// *different* superclass. `noise = 0` leaves every context intact; the
/// expected fraction of correct contexts is `1 - noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub noise: f64,
}

impl CorruptionSpec {
    pub fn new(noise: f64) -> Result<CorruptionSpec> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::Parameter(format!(
                "context noise {noise} outside [0, 1]"
            )));
        }
        Ok(CorruptionSpec { noise })
    }
}

/// Independently per sample, keeps the true superclass with probability
/// `1 - noise` or replaces it with a uniform draw over the other
/// `num_coarse - 1` superclasses.
pub fn corrupt_contexts(
    coarse_labels: &[usize],
    num_coarse: usize,
    spec: &CorruptionSpec,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if spec.noise > 0.0 && num_coarse < 2 {
        return Err(Error::Parameter(
            "cannot corrupt contexts with fewer than two superclasses".to_string(),
        ));
    }
    let mut out = Vec::with_capacity(coarse_labels.len());
    for &label in coarse_labels {
        if label >= num_coarse {
            return Err(Error::Index {
                op: "corrupt_contexts",
                index: label,
                bound: num_coarse,
            });
        }
        let corrupted = if spec.noise > 0.0 && rng.next_f64() < spec.noise {
            // Uniform over the other num_coarse - 1 labels.
            let draw = rng.next_below(num_coarse - 1);
            if draw < label {
                draw
            } else {
                draw + 1
            }
        } else {
            label
        };
        out.push(corrupted);
    }
    Ok(out)
}

/// Projects features to `out_dim` dimensions through a fixed seeded random
/// matrix followed by an ELU, as an offline stand-in for a pretrained
/// feature extractor. The projection matrix has i.i.d. uniform entries in
/// `+-sqrt(3/d)` (variance `1/d`), which approximately preserves pairwise
/// distances.
pub fn random_projection_features(
    ds: &LabeledDataset,
    out_dim: usize,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    if out_dim == 0 {
        return Err(Error::Parameter(
            "random projection needs out_dim >= 1".to_string(),
        ));
    }
    let d = ds.dim();
    let limit = (3.0 / d as f64).sqrt();
    let projection = rng.uniform(d, out_dim, -limit, limit)?;
    project_features_with(ds, &projection)
}

/// [`random_projection_features`] with an explicit projection matrix.
pub fn project_features_with(ds: &LabeledDataset, projection: &Matrix) -> Result<LabeledDataset> {
    let projected = elu(&ds.features.matmul(projection)?);
    LabeledDataset::new(
        projected,
        ds.fine_labels.clone(),
        ds.coarse_labels.clone(),
        ds.num_fine,
        ds.num_coarse,
    )
}

/// Synthetic dataset in which the fine class is a deterministic function of
/// (input cluster, context), so the context carries information the features
/// alone cannot provide.
///
/// Inputs are noisy copies of `clusters` random sign-vector centers; each
/// sample draws a cluster and a context uniformly and gets the fine label
/// `cluster * contexts + context`. A model without the context can at best
/// identify the cluster, capping its accuracy near `1 / contexts`, while a
/// context-fed model can separate all `clusters * contexts` fine classes.
pub fn synthetic_cluster_context(
    n: usize,
    clusters: usize,
    contexts: usize,
    dim: usize,
    noise_sd: f64,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    if clusters == 0 || contexts == 0 || dim == 0 {
        return Err(Error::Parameter(
            "synthetic dataset needs clusters, contexts, dim >= 1".to_string(),
        ));
    }
    let mut centers = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        let mut c = Matrix::zeros(1, dim);
        for v in c.data_mut() {
            *v = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        }
        centers.push(c);
    }
    let mut features = Matrix::zeros(n, dim);
    let mut fine = Vec::with_capacity(n);
    let mut coarse = Vec::with_capacity(n);
    for r in 0..n {
        let cluster = rng.next_below(clusters);
        let context = rng.next_below(contexts);
        let row = features.row_mut(r);
        for (j, v) in row.iter_mut().enumerate() {
            // Sum of three uniforms is close enough to Gaussian jitter here.
            let jitter = (rng.next_f64() + rng.next_f64() + rng.next_f64()) / 1.5 - 1.0;
            *v = centers[cluster].data()[j] + noise_sd * jitter;
        }
        fine.push(cluster * contexts + context);
        coarse.push(context);
    }
    LabeledDataset::new(features, fine, coarse, clusters * contexts, contexts)
}
