use std::io::Cursor;
use std::path::Path;

use rrm_core::models::{GnnConfig, GnnModel, MlpModel, Model, PowerModel, Standardizer};
use rrm_core::netgen::{gen_dataset, DatasetMeta};
use rrm_core::oracles::OracleName;
use rrm_core::{ChannelModel, Dataset, SeedKey};
use rrm_lab::artifacts::{checksum, load_manifest, OutDir};
use rrm_lab::checkpoint::{decode_params, encode_params, load_checkpoint, save_checkpoint};
use rrm_lab::dataset_io::{load_dataset, read_dataset, save_dataset, write_dataset};
use rrm_lab::LabError;

fn round_trip(n: usize, oracle: OracleName) {
    let data = gen_dataset(n, 4, &ChannelModel::RayleighIid, oracle, SeedKey::new(3, 0)).unwrap();
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    let back = read_dataset(Cursor::new(&buf), Path::new("mem")).unwrap();
    assert_eq!(back, data);
}

#[test]
fn empty_dataset_round_trips() {
    let meta = DatasetMeta { channel_model: ChannelModel::RayleighIid, seed: SeedKey::new(0, 0), oracle: OracleName::Wmmse, note: String::new() };
    let data = Dataset::new(vec![], Some(vec![]), meta).unwrap();
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    assert_eq!(read_dataset(Cursor::new(&buf), Path::new("mem")).unwrap(), data);
}

#[test]
fn dataset_round_trips_exactly() {
    round_trip(100, OracleName::Wmmse);
    round_trip(20, OracleName::None);
}

#[test]
fn dataset_file_round_trip_and_stable_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(30, 3, &ChannelModel::geometric_default(), OracleName::Wmmse, SeedKey::new(1, 0)).unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    save_dataset(&data, &a).unwrap();
    save_dataset(&load_dataset(&a).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 31);
}

fn encoded(n: usize) -> String {
    let data = gen_dataset(n, 3, &ChannelModel::RayleighIid, OracleName::Wmmse, SeedKey::new(2, 0)).unwrap();
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn truncated_dataset_is_rejected() {
    let text = encoded(5);
    let cut: Vec<&str> = text.lines().take(4).collect();
    let err = read_dataset(Cursor::new(cut.join("\n")), Path::new("d.jsonl")).unwrap_err();
    assert!(matches!(err, LabError::Parse { .. }), "{err}");
}

#[test]
fn malformed_line_reports_its_number() {
    let text = encoded(5);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = "{\"k\": 3, \"gains\": [1.0]".into();
    let err = read_dataset(Cursor::new(lines.join("\n")), Path::new("d.jsonl")).unwrap_err();
    match err {
        LabError::Parse { line, .. } => assert_eq!(line, 4),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unknown_version_is_rejected() {
    let text = encoded(2).replacen("\"format_version\":1", "\"format_version\":9", 1);
    let err = read_dataset(Cursor::new(text), Path::new("d.jsonl")).unwrap_err();
    assert!(matches!(err, LabError::Version { found: 9, .. }), "{err}");
}

#[test]
fn params_encoding_is_bit_exact() {
    let values = [0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, 1e300, -2.5e-310];
    let back = decode_params(&encode_params(&values), values.len()).unwrap();
    for (a, b) in values.iter().zip(&back) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert!(decode_params(&encode_params(&values), 5).is_err());
    assert!(decode_params("not base64!", 1).is_err());
}

#[test]
fn checkpoints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(20, 4, &ChannelModel::RayleighIid, OracleName::None, SeedKey::new(5, 0)).unwrap();
    let mut mlp = MlpModel::new(4, &[8, 8], SeedKey::new(1, 1)).unwrap();
    mlp.set_standardizer(Standardizer::fit(&data.instances).unwrap()).unwrap();
    let gnn = GnnModel::new(GnnConfig { hidden_dim: 8, ..GnnConfig::default() }, SeedKey::new(1, 2)).unwrap();
    for (i, model) in [Model::Mlp(mlp), Model::Gnn(gnn)].into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        for inst in &data.instances {
            assert_eq!(back.forward(inst).unwrap(), model.forward(inst).unwrap());
        }
    }
}

#[test]
fn manifest_checksums_ignore_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutDir::create(dir.path().join("run")).unwrap();
    out.write_json("a.json", &serde_json::json!({"x": 1.5, "wall_time": 3.0, "inner": {"wall_time": 1.0}})).unwrap();
    let first = checksum(&out.path("a.json")).unwrap();
    std::fs::write(out.path("b.json"), r#"{"x": 1.5, "wall_time": 99.0, "inner": {"wall_time": 7.0}}"#).unwrap();
    assert_eq!(checksum(&out.path("b.json")).unwrap(), first);
    let manifest = out.finish("demo", serde_json::json!({"k": 1}), 0.5).unwrap();
    assert_eq!(load_manifest(&dir.path().join("run/manifest.json")).unwrap(), manifest);
    assert!(manifest.artifacts.contains_key("a.json"));
}
