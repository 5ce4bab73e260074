use covarlab_cli::cache::{decode, encode, header, CacheEvent, DecodeError, MatrixCache};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn key(rows: usize, cols: usize) -> covarlab_cli::cache::Header {
    header("s".repeat(64), "p".repeat(64), "rce".into(), rows, cols)
}

proptest! {
    #[test]
    fn round_trip_is_bit_exact(rows in 1usize..6, cols in 1usize..6, bits in proptest::collection::vec(any::<u64>(), 36)) {
        // Arbitrary bit patterns, including NaN payloads and signed zeros.
        let m = DMatrix::from_fn(rows, cols, |i, j| f64::from_bits(bits[i * 6 + j]));
        let (h, back) = decode(&encode(&key(rows, cols), &m)).unwrap();
        prop_assert_eq!(h, key(rows, cols));
        for (a, b) in m.iter().zip(back.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn any_flipped_byte_is_rejected(pos in 0usize..10_000, bit in 0u8..8) {
        let m = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.37);
        let mut bytes = encode(&key(3, 4), &m);
        let p = pos % bytes.len();
        bytes[p] ^= 1 << bit;
        prop_assert!(decode(&bytes).is_err());
    }
}

#[test]
fn layout_is_header_line_then_row_major_le() {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let bytes = encode(&key(2, 2), &m);
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let head: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    assert_eq!(head["rows"], 2);
    assert_eq!(head["endianness"], "le");
    let body = &bytes[nl + 1..];
    assert_eq!(body.len(), 4 * 8 + 8);
    assert_eq!(&body[8..16], &2.0f64.to_le_bytes());
    assert_eq!(decode(&bytes[..bytes.len() - 3]).unwrap_err(), DecodeError::Checksum {
        stored: u64::from_le_bytes(bytes[bytes.len() - 11..bytes.len() - 3].try_into().unwrap()),
        computed: decode_checksum(&bytes[..bytes.len() - 11]),
    });
}

fn decode_checksum(body: &[u8]) -> u64 {
    use sha2::{Digest, Sha256};
    u64::from_le_bytes(Sha256::digest(body)[..8].try_into().unwrap())
}

#[test]
fn corrupted_entry_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cache = MatrixCache { dir: dir.path().to_path_buf() };
    let h = key(2, 3);
    let m = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64);
    let compute = || Ok::<_, ()>(m.clone());
    assert_eq!(cache.get_or_compute(&h, compute).unwrap().1, CacheEvent::Miss);
    assert_eq!(cache.get_or_compute(&h, compute).unwrap(), (m.clone(), CacheEvent::Hit));

    let path = cache.path(&h);
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 20] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(cache.load(&h), Err(DecodeError::Checksum { .. })));
    assert_eq!(cache.get_or_compute(&h, compute).unwrap(), (m.clone(), CacheEvent::Recomputed));
    assert_eq!(cache.get_or_compute(&h, compute).unwrap().1, CacheEvent::Hit);

    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "temporary files left behind: {names:?}");
}

#[test]
fn header_mismatch_is_not_a_hit() {
    let dir = tempfile::tempdir().unwrap();
    let cache = MatrixCache { dir: dir.path().to_path_buf() };
    let h = key(1, 1);
    cache.store(&h, &DMatrix::from_element(1, 1, 1.0)).unwrap();
    let mut other = h.clone();
    other.rows = 2;
    // Same path (the key omits the shape) but a different header.
    assert_eq!(cache.path(&other), cache.path(&h));
    assert!(cache.load(&other).is_err());
}
