//! NPY interchange: byte compatibility with numpy, round trips, and the
//! finiteness contract.

use proptest::prelude::*;
use srga_core::featstore::{npy_header, sidecar_path};
use srga_core::{read_feature_file, write_feature_file, FeatureMeta, FeatureSet, SrgaError};

/// `np.save` of `np.arange(12, dtype='<f4').reshape(1, 2, 2, 3) * 0.5 - 1`.
const NUMPY_FILE: &str = "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c20277368617065273a2028312c20322c20322c2033292c207d202020202020202020202020202020202020202020202020202020202020202020202020202020202020202020202020202020200a000080bf000000bf000000000000003f0000803f0000c03f000000400000204000004040000060400000804000009040";

fn hex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn meta(id: &str) -> FeatureMeta {
    FeatureMeta {
        model_id: "toy".into(),
        dataset_id: id.into(),
        layer_tag: "conv".into(),
    }
}

#[test]
fn reads_numpy_output_and_writes_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("np.npy");
    std::fs::write(&path, hex(NUMPY_FILE)).unwrap();
    let set = read_feature_file(&path).unwrap();
    assert_eq!(set.shape(), [1, 2, 2, 3]);
    let want: Vec<f32> = (0..12).map(|i| i as f32 * 0.5 - 1.0).collect();
    assert_eq!(set.as_slice(), &want[..]);
    assert_eq!(set.meta, FeatureMeta::default());

    let out = dir.path().join("ours.npy");
    write_feature_file(&set, &out).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), hex(NUMPY_FILE));
}

#[test]
fn header_is_aligned_and_newline_terminated() {
    for shape in [[1, 1, 1, 1], [800, 32, 32, 64], [123_456, 7, 7, 1000]] {
        let h = npy_header(&shape);
        assert_eq!(h.len() % 64, 0);
        assert_eq!(*h.last().unwrap(), b'\n');
        assert_eq!(u16::from_le_bytes([h[8], h[9]]) as usize, h.len() - 10);
    }
}

#[test]
fn rejects_other_dtypes_orders_and_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let good = hex(NUMPY_FILE);
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("f8", String::from_utf8_lossy(&good).replace("<f4", "<f8").into_bytes()),
        ("be", String::from_utf8_lossy(&good).replace("<f4", ">f4").into_bytes()),
        ("fortran", {
            let mut b = good.clone();
            let h = String::from_utf8_lossy(&b[10..128]).replace("False", "True ");
            b[10..128].copy_from_slice(h.as_bytes());
            b
        }),
        ("rank3", {
            let mut b = good.clone();
            let h = String::from_utf8_lossy(&b[10..128]).replace("(1, 2, 2, 3)", "(2, 2, 3)   ");
            b[10..128].copy_from_slice(h.as_bytes());
            b
        }),
        ("magic", {
            let mut b = good.clone();
            b[1] = b'X';
            b
        }),
        ("version", {
            let mut b = good.clone();
            b[6] = 2;
            b
        }),
        ("short", good[..good.len() - 4].to_vec()),
    ];
    for (name, bytes) in cases {
        let p = dir.path().join(format!("{name}.npy"));
        std::fs::write(&p, bytes).unwrap();
        match read_feature_file(&p) {
            Err(SrgaError::Format { .. }) => {}
            other => panic!("{name}: expected format error, got {other:?}"),
        }
    }
}

#[test]
fn sidecar_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("F.npy");
    let set = FeatureSet::new([2, 1, 1, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], meta("blur2")).unwrap();
    write_feature_file(&set, &path).unwrap();
    assert_eq!(sidecar_path(&path), dir.path().join("F.npy.meta.json"));
    assert!(dir.path().join("F.npy.meta.json").exists());
    assert_eq!(read_feature_file(&path).unwrap(), set);

    std::fs::write(sidecar_path(&path), br#"{"model_id": "m"}"#).unwrap();
    let partial = read_feature_file(&path).unwrap();
    assert_eq!(partial.meta.model_id, "m");
    assert_eq!(partial.meta.dataset_id, "unknown");
}

/// What an external exporter writes: activations captured as (N, C, H, W),
/// transposed to channel-last, with a sidecar carrying extra keys.
#[test]
fn accepts_exporter_output_with_extra_sidecar_keys() {
    let (n, c, h, w) = (2, 4, 3, 5);
    let nchw: Vec<f32> = (0..n * c * h * w).map(|i| ((i / (h * w)) % c) as f32 + 1.0).collect();
    let mut nhwc = vec![0.0f32; nchw.len()];
    for i in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    nhwc[((i * h + y) * w + x) * c + ch] = nchw[((i * c + ch) * h + y) * w + x];
                }
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("export.npy");
    let mut bytes = npy_header(&[n, h, w, c]);
    bytes.extend(nhwc.iter().flat_map(|v| v.to_le_bytes()));
    std::fs::write(&path, bytes).unwrap();
    std::fs::write(
        sidecar_path(&path),
        br#"{"model_id": "toy-sr", "layer_tag": "body.last", "manifest_hash": "ab12", "dataset_id": "clean"}"#,
    )
    .unwrap();

    let set = read_feature_file(&path).unwrap();
    assert_eq!(set.shape(), [n, h, w, c]);
    assert_eq!(set.meta.layer_tag, "body.last");
    let v = set.view4();
    for i in 0..n {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    assert_eq!(v[[i, y, x, ch]], ch as f32 + 1.0);
                }
            }
        }
    }
}

#[test]
fn flattening_order_is_c_fastest_then_w_then_h() {
    let (h, w, c) = (3, 4, 5);
    let data: Vec<f32> = (0..2 * h * w * c).map(|i| i as f32).collect();
    let set = FeatureSet::new([2, h, w, c], data, FeatureMeta::default()).unwrap();
    let flat = set.flatten();
    let y = flat.view();
    for n in 0..2 {
        for hh in 0..h {
            for ww in 0..w {
                for cc in 0..c {
                    let col = hh * w * c + ww * c + cc;
                    assert_eq!(y[(n, col)], set.view4()[(n, hh, ww, cc)]);
                }
            }
        }
    }
}

fn feature_set() -> impl Strategy<Value = FeatureSet> {
    (1usize..4, 1usize..4, 1usize..4, 1usize..6).prop_flat_map(|(n, h, w, c)| {
        proptest::collection::vec(-1e30f32..1e30, n * h * w * c)
            .prop_map(move |data| FeatureSet::new([n, h, w, c], data, meta("p")).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_read_is_bit_exact(set in feature_set()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.npy");
        write_feature_file(&set, &path).unwrap();
        let back = read_feature_file(&path).unwrap();
        prop_assert_eq!(back.shape(), set.shape());
        let a: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = set.as_slice().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(back.meta, set.meta);
    }

    #[test]
    fn any_non_finite_value_is_rejected_with_its_tensor(
        set in feature_set(),
        pos in any::<prop::sample::Index>(),
        bad in prop_oneof![Just(f32::NAN), Just(f32::INFINITY), Just(f32::NEG_INFINITY)],
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.npy");
        write_feature_file(&set, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let offset = npy_header(&set.shape()).len();
        let i = pos.index(set.as_slice().len());
        bytes[offset + 4 * i..offset + 4 * i + 4].copy_from_slice(&bad.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let tensor = i / set.map_len();
        match read_feature_file(&path) {
            Err(SrgaError::Data(msg)) => prop_assert!(msg.contains(&format!("tensor {tensor}")), "{}", msg),
            other => prop_assert!(false, "expected data error, got {:?}", other),
        }
    }
}
