//! Point cloud file reading and writing.

use proptest::prelude::*;
use reno_core::io::{
    encode_points, parse_points, read_points, write_atomic, write_points, PointFormat,
};
use reno_core::{Error, PointCloud};

/// Binary PLY with an `intensity` float between `y` and `z` and a trailing
/// `ring` ushort, built byte by byte.
fn intensity_fixture() -> (Vec<u8>, Vec<[f64; 3]>) {
    let header = "ply\nformat binary_little_endian 1.0\ncomment lidar frame\nelement vertex 3\n\
                  property float x\nproperty float y\nproperty float intensity\nproperty float z\n\
                  property ushort ring\nend_header\n";
    let rows: [([f32; 4], u16); 3] = [
        ([1.5, -2.0, 0.25, 3.0], 7),
        ([0.0, 0.0, 99.0, 0.0], 0),
        ([-1.0e3, 4.5, 0.5, 1.0e-3], 63),
    ];
    let mut bytes = header.as_bytes().to_vec();
    let mut want = Vec::new();
    for (v, ring) in rows {
        for f in v {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
        bytes.extend_from_slice(&ring.to_le_bytes());
        want.push([f64::from(v[0]), f64::from(v[1]), f64::from(v[3])]);
    }
    (bytes, want)
}

#[test]
fn binary_with_extra_properties_yields_positions() {
    let (bytes, want) = intensity_fixture();
    // Three rows of four floats and one ushort.
    let body = bytes.len()
        - bytes
            .windows(11)
            .position(|w| w == b"end_header\n")
            .unwrap()
        - 11;
    assert_eq!(body, 3 * 18);
    assert_eq!(parse_points(&bytes).unwrap().points, want);
}

#[test]
fn truncated_binary_payload_fails() {
    let (bytes, _) = intensity_fixture();
    for cut in 1..18 {
        match parse_points(&bytes[..bytes.len() - cut]) {
            Err(Error::Parse { location, .. }) => {
                assert!(location.starts_with("byte offset"), "{location}")
            }
            other => panic!("cut {cut}: {other:?}"),
        }
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(parse_points(&extra).is_err());
}

#[test]
fn truncated_ascii_payload_reports_line() {
    let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n\
                property double z\nend_header\n1 2 3\n4 5 6\n";
    match parse_points(text.as_bytes()) {
        Err(Error::Parse { location, .. }) => assert_eq!(location, "line 10"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn list_properties_and_other_elements_are_skipped() {
    let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty list uchar int idx\nproperty float x\n\
                property float y\nproperty float z\nelement face 1\nproperty list uchar int v\nend_header\n\
                2 10 11 1 2 3\n0 4 5 6\n3 0 1 1\n";
    assert_eq!(
        parse_points(text.as_bytes()).unwrap().points,
        vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
    );
}

#[test]
fn integer_positions_are_rejected() {
    let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty int y\nproperty int z\nend_header\n1 2 3\n";
    assert!(matches!(
        parse_points(text.as_bytes()),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let pc = PointCloud::new(vec![[0.125, -3.5, 1e6], [2.0, 2.0, 2.0]]);
    for (name, format) in [
        ("a.ply", PointFormat::PlyBinary),
        ("b.ply", PointFormat::PlyAscii),
        ("c.xyz", PointFormat::Xyz),
    ] {
        let path = dir.path().join(name);
        write_points(&pc, &path, format).unwrap();
        assert_eq!(read_points(&path).unwrap(), pc, "{name}");
    }
    assert_eq!(
        PointFormat::from_path(std::path::Path::new("x.txt")),
        PointFormat::Xyz
    );
    let bad = PointCloud::new(vec![[f64::NAN, 0.0, 0.0]]);
    let path = dir.path().join("bad.ply");
    assert!(write_points(&bad, &path, PointFormat::PlyBinary).is_err());
    assert!(!path.exists());
    assert!(write_atomic(dir.path().join("missing/sub/x.bin"), b"1").is_err());
}

fn f32_cloud() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-1e5f32..1e5), 0..200)
        .prop_map(|v| PointCloud::new(v.into_iter().map(|p| p.map(f64::from)).collect()))
}

fn f64_cloud() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-1e5f64..1e5), 0..200).prop_map(PointCloud::new)
}

proptest! {
    #[test]
    fn binary_round_trip_is_bit_exact(pc in f32_cloud()) {
        let bytes = encode_points(&pc, PointFormat::PlyBinary);
        let back = parse_points(&bytes).unwrap();
        prop_assert_eq!(back.len(), pc.len());
        for (a, b) in back.points.iter().zip(&pc.points) {
            prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
    }

    #[test]
    fn binary_double_round_trip_is_bit_exact(pc in f64_cloud()) {
        let back = parse_points(&encode_points(&pc, PointFormat::PlyBinary)).unwrap();
        prop_assert_eq!(back, pc);
    }

    #[test]
    fn ascii_round_trip_within_tolerance(pc in f64_cloud()) {
        for format in [PointFormat::PlyAscii, PointFormat::Xyz] {
            let back = parse_points(&encode_points(&pc, format)).unwrap();
            prop_assert_eq!(back.len(), pc.len());
            for (a, b) in back.points.iter().zip(&pc.points) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-6);
                }
            }
        }
    }
}
