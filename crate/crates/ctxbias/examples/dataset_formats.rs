//! Tour of the three on-disk formats: IDX, CIFAR-100 binary, and CTXF.
//!
//! Writes miniature but structurally exact files into a temp directory,
//! loads them back, and shows the superclass wiring. This is the fixture
//! path the parser tests use; the same loaders read the official files.
//!
//! Run with: `cargo run --example dataset_formats`

use ctxbias::data::{
    fashion_superclass_map, load_cifar100, load_features, load_idx, save_features, SuperclassMap,
};
use ctxbias::tensor::Rng;

fn main() {
    let dir = std::env::temp_dir().join(format!("ctxbias-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    // --- IDX pair (Fashion-MNIST layout: big-endian headers, u8 pixels).
    let mut images = Vec::new();
    images.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    images.extend_from_slice(&3u32.to_be_bytes());
    images.extend_from_slice(&28u32.to_be_bytes());
    images.extend_from_slice(&28u32.to_be_bytes());
    for fill in [0u8, 128, 255] {
        images.extend_from_slice(&[fill; 784]);
    }
    let mut labels = Vec::new();
    labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    labels.extend_from_slice(&3u32.to_be_bytes());
    labels.extend_from_slice(&[1, 4, 8]); // Trouser, Coat, Bag

    let img_path = dir.join("images-idx3-ubyte");
    let lab_path = dir.join("labels-idx1-ubyte");
    std::fs::write(&img_path, &images).unwrap();
    std::fs::write(&lab_path, &labels).unwrap();

    let map = fashion_superclass_map();
    let ds = load_idx(&img_path, &lab_path, &map).unwrap();
    println!("IDX: {} samples x {} pixels", ds.len(), ds.dim());
    for (i, (&fine, &coarse)) in ds.fine_labels.iter().zip(&ds.coarse_labels).enumerate() {
        println!(
            "  sample {i}: {} -> {} (pixel[0] = {:.3})",
            map.fine_name(fine),
            map.coarse_name(coarse),
            ds.features.get(i, 0)
        );
    }

    // --- CIFAR-100 binary (3074-byte records: coarse, fine, 3072 pixels).
    let mut cifar = Vec::new();
    for (coarse, fine) in [(3u8, 42u8), (11, 70)] {
        cifar.push(coarse);
        cifar.push(fine);
        cifar.extend_from_slice(&[fine; 3072]);
    }
    let cifar_path = dir.join("mini.bin");
    std::fs::write(&cifar_path, &cifar).unwrap();
    let cds = load_cifar100(&cifar_path).unwrap();
    println!(
        "\nCIFAR-100: {} records, coarse {:?}, fine {:?}",
        cds.len(),
        cds.coarse_labels,
        cds.fine_labels
    );

    // --- CTXF feature container: the interface for precomputed features.
    let mut rng = Rng::from_seed(5);
    let feats = ctxbias::data::LabeledDataset::new(
        rng.uniform(4, 6, -2.0, 2.0).unwrap(),
        vec![0, 1, 2, 3],
        vec![0, 0, 1, 1],
        4,
        2,
    )
    .unwrap();
    let ctxf_path = dir.join("features.ctxf");
    save_features(&feats, &ctxf_path).unwrap();
    let loaded = load_features(&ctxf_path).unwrap();
    assert_eq!(loaded, feats);
    println!(
        "\nCTXF: {} samples x {} features round-tripped bit-exactly ({} bytes)",
        loaded.len(),
        loaded.dim(),
        std::fs::metadata(&ctxf_path).unwrap().len()
    );

    // The coarse labels in any dataset must be a function of the fine ones;
    // the map can be recovered and verified from the data itself.
    let recovered = SuperclassMap::from_dataset(&loaded).unwrap();
    println!(
        "recovered superclass map: {:?}",
        (0..4).map(|f| recovered.coarse_of(f).unwrap()).collect::<Vec<_>>()
    );

    std::fs::remove_dir_all(&dir).ok();
}
