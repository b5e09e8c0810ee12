//! Little-endian weight files: magic, layer shapes, then `f32` parameters in layer order.

use std::io::{Read, Write};
use std::path::Path;

use super::network::QNetwork;
use super::ARCH;
use crate::error::{ReplanError, Result};

pub const MAGIC: &[u8; 8] = b"RPLQNET1";

pub fn write_weights(net: &QNetwork<f32>, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for l in &net.layers {
        w.write_all(&(l.inputs() as u32).to_le_bytes())?;
        w.write_all(&(l.outputs() as u32).to_le_bytes())?;
    }
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn weights_to_bytes(net: &QNetwork<f32>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 8 * net.layers.len() + 4 * net.param_count());
    write_weights(net, &mut buf).expect("writing to memory");
    buf
}

/// Parses a weight file and checks it against the expected architecture.
pub fn weights_from_bytes(bytes: &[u8]) -> Result<QNetwork<f32>> {
    let bad = |m: String| ReplanError::ModelFormat(m);
    let mut cur = bytes;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(bad(format!("file truncated while reading {what}")));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    if take(MAGIC.len(), "magic")? != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let n_layers = u32_at(take(4, "layer count")?);
    if n_layers != ARCH.len() - 1 {
        return Err(bad(format!(
            "expected {} layers, header says {n_layers}",
            ARCH.len() - 1
        )));
    }
    for k in 0..n_layers {
        let i = u32_at(take(4, "layer shape")?);
        let o = u32_at(take(4, "layer shape")?);
        if (i, o) != (ARCH[k], ARCH[k + 1]) {
            return Err(bad(format!(
                "layer {k} is {i}x{o}, expected {}x{}",
                ARCH[k],
                ARCH[k + 1]
            )));
        }
    }
    let mut net = QNetwork::zeros(&ARCH);
    let count = net.param_count();
    let raw = take(4 * count, "parameters")?;
    if !cur.is_empty() {
        return Err(bad(format!("{} trailing bytes", cur.len())));
    }
    let params: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    net.set_params(&params);
    Ok(net)
}

pub fn save_weights(net: &QNetwork<f32>, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| ReplanError::io(path, e))?;
    f.write_all(&weights_to_bytes(net))
        .map_err(|e| ReplanError::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<QNetwork<f32>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| ReplanError::io(path, e))?;
    weights_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> QNetwork<f32> {
        QNetwork::random(&ARCH, &mut ChaCha8Rng::seed_from_u64(2))
    }

    #[test]
    fn round_trip_is_bitwise() {
        let n = net();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        save_weights(&n, &path).unwrap();
        let back = load_weights(&path).unwrap();
        let a: Vec<u32> = n.params().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.params().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = weights_to_bytes(&net());
        for cut in [0, 5, 12, 30, bytes.len() - 1] {
            assert!(
                matches!(
                    weights_from_bytes(&bytes[..cut]),
                    Err(ReplanError::ModelFormat(_))
                ),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn wrong_shape_header_is_rejected() {
        let mut bytes = weights_to_bytes(&net());
        // first layer's output width
        bytes[16..20].copy_from_slice(&64u32.to_le_bytes());
        assert!(matches!(
            weights_from_bytes(&bytes),
            Err(ReplanError::ModelFormat(_))
        ));
        let mut bytes = weights_to_bytes(&net());
        bytes[0] = b'X';
        assert!(matches!(
            weights_from_bytes(&bytes),
            Err(ReplanError::ModelFormat(_))
        ));
        let mut bytes = weights_to_bytes(&net());
        bytes.push(0);
        assert!(matches!(
            weights_from_bytes(&bytes),
            Err(ReplanError::ModelFormat(_))
        ));
    }
}
