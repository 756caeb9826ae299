use proptest::prelude::*;
use sled_data::*;

fn map_strategy(quantized: bool) -> impl Strategy<Value = DisparityMap> {
    (1usize..20, 1usize..20).prop_flat_map(move |(w, h)| {
        let value = if quantized {
            (1u16..=65535).prop_map(|s| s as f64 / 256.0).boxed()
        } else {
            (0.0f32..1.0e4).prop_map(|v| v as f64).boxed()
        };
        prop::collection::vec((value, prop::bool::weighted(0.85)), w * h).prop_map(move |px| {
            let (values, valid): (Vec<f64>, Vec<bool>) = px.into_iter().unzip();
            DisparityMap::new(w, h, values, valid).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pfm_round_trip_is_bitwise(map in map_strategy(false), big in any::<bool>()) {
        let endian = if big { Endian::Big } else { Endian::Little };
        let back = decode_pfm(&encode_pfm(&map, endian)).unwrap();
        prop_assert_eq!(back.valid(), map.valid());
        for (a, b) in back.values().iter().zip(map.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn kitti_round_trip_is_exact(map in map_strategy(true)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        write_kitti_disp(&map, &path).unwrap();
        prop_assert_eq!(read_kitti_disp(&path).unwrap(), map);
    }
}

#[test]
fn pfm_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pfm");
    let map = DisparityMap::from_values(16, 8, (0..128).map(|i| i as f64 * 0.375).collect()).unwrap();
    write_pfm(&map, &path).unwrap();
    assert_eq!(read_pfm(&path).unwrap(), map);
}

#[test]
fn kitti_scale_and_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.png");
    let map = DisparityMap::new(2, 1, vec![1.0, 0.0], vec![true, false]).unwrap();
    write_kitti_disp(&map, &path).unwrap();
    let back = read_kitti_disp(&path).unwrap();
    assert_eq!(back.get(0, 0), Some(1.0));
    assert_eq!(back.get(1, 0), None);
}

#[test]
fn kitti_rejects_eight_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.png");
    write_mask(2, 2, &[true, false, true, false], &path).unwrap();
    assert!(matches!(read_kitti_disp(&path), Err(DataError::Unsupported(_))));
}

#[test]
fn rgb_png_round_trip_at_8_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.png");
    let img = sled_tensor::Tensor::from_fn(vec![3, 4, 5], |i| (i % 256) as f64 / 255.0);
    write_rgb(&img, &path).unwrap();
    let back = read_rgb(&path).unwrap();
    assert_eq!(back.shape(), img.shape());
    for (a, b) in back.data().iter().zip(img.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}
