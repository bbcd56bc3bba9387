#![allow(dead_code)]

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use quanvolute::rng::Rng64;
use quanvolute::{Circuit, GateKind, ParameterVector};

/// MNIST directory from `$QUANVOLUTE_DATA_DIR` or the workspace `data/mnist`,
/// if it holds the training images.
pub fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("QUANVOLUTE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    ["train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"]
        .iter()
        .any(|f| dir.join(f).is_file())
        .then_some(dir)
}

/// Random circuit over every gate kind; rotations get named slots.
pub fn random_circuit(n: usize, gates: usize, rng: &mut Rng64) -> (Circuit, ParameterVector) {
    const KINDS: [GateKind; 7] = [
        GateKind::Rx,
        GateKind::Rz,
        GateKind::X,
        GateKind::Crx,
        GateKind::Crz,
        GateKind::Cnot,
        GateKind::Cz,
    ];
    let mut c = Circuit::new(n).unwrap();
    let mut values = Vec::new();
    for i in 0..gates {
        let mut kind = KINDS[rng.below(KINDS.len())];
        if n == 1 && kind.is_controlled() {
            kind = GateKind::Rx;
        }
        let target = rng.below(n);
        let control = kind.is_controlled().then(|| (target + 1 + rng.below(n - 1)) % n);
        if kind.is_rotation() {
            c.push(kind, target, control, format!("t{i}")).unwrap();
            values.push(rng.uniform(-2.0 * PI, 2.0 * PI));
        } else {
            c.push(kind, target, control, 0.0).unwrap();
        }
    }
    let params = ParameterVector::for_circuit(&c, values).unwrap();
    (c, params)
}

/// Writes a `train`/`t10k` IDX pair of `n` 28×28 images per split. Each
/// class lights a distinct block so even tiny models learn something.
pub fn write_toy_mnist(dir: &Path, n_train: usize, n_test: usize) {
    for (prefix, n, seed) in [("train", n_train, 1u64), ("t10k", n_test, 2)] {
        let mut rng = Rng64::seed_from_u64(seed);
        let mut images = vec![0, 0, 8, 3];
        for d in [n as u32, 28, 28] {
            images.extend_from_slice(&d.to_be_bytes());
        }
        let mut labels = vec![0, 0, 8, 1];
        labels.extend_from_slice(&(n as u32).to_be_bytes());
        for i in 0..n {
            let label = (i % 10) as u8;
            labels.push(label);
            let (y0, x0) = ((label as usize / 5) * 14, (label as usize % 5) * 5);
            for y in 0..28 {
                for x in 0..28 {
                    let lit = (y0..y0 + 10).contains(&y) && (x0..x0 + 8).contains(&x);
                    let noise = rng.below(40) as u8;
                    images.push(if lit { 215 + noise } else { noise });
                }
            }
        }
        fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
        fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
    }
}
