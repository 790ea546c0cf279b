//! File formats: datasets, reports and saved indexes.

use std::fs;

use subspace_core::{
    generate, load_auto, load_fvecs, load_index, read_report, save_auto, save_index, write_fvecs, write_report,
    BenchConfig, DataSet, DimensionSchedule, Execution, NormOrder, ProjectionMode, ReportFormat, SubspaceIndex,
    SyntheticModel, SyntheticSpec,
};

#[test]
fn fvecs_fixture_byte_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.fvecs");
    let data = generate(&SyntheticSpec { s: 100, n: 960, model: SyntheticModel::IidUniform, seed: 3 }).unwrap();
    write_fvecs(&path, &data).unwrap();
    assert_eq!(fs::metadata(&path).unwrap().len(), 100 * (4 + 960 * 4));
    let back = load_fvecs(&path).unwrap();
    assert_eq!((back.len(), back.dim()), (100, 960));
    for (a, b) in back.as_slice().iter().zip(data.as_slice()) {
        assert_eq!(*a, (*b as f32) as f64);
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&SyntheticSpec {
        s: 50,
        n: 8,
        model: SyntheticModel::BlockCorrelated { block_size: 4, rho: 0.3 },
        seed: 4,
    })
    .unwrap();
    let path = dir.path().join("d.csv");
    save_auto(&path, &data).unwrap();
    assert_eq!(load_auto(&path).unwrap(), data);
}

#[test]
fn loader_errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "1,2\n3,x\n").unwrap();
    assert!(load_auto(&path).unwrap_err().to_string().contains("line 2"));
    let path = dir.path().join("short.fvecs");
    let mut bytes = 2i32.to_le_bytes().to_vec();
    bytes.extend(1f32.to_le_bytes());
    fs::write(&path, bytes).unwrap();
    assert!(load_auto(&path).unwrap_err().to_string().contains("truncated"));
    assert!(load_auto(dir.path().join("missing.csv")).is_err());
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = BenchConfig::default();
    for kv in ["model=iid-uniform", "s=500", "n=16", "schedule=16,4", "queries=20", "calibration_sample=50", "target_nn=5"] {
        config.set_pair(kv).unwrap();
    }
    let rows = subspace_core::run_bench(&config, Execution::default()).unwrap();
    for (name, format) in [("r.json", ReportFormat::Json), ("r.csv", ReportFormat::Csv)] {
        let path = dir.path().join(name);
        write_report(&rows, &path, format).unwrap();
        assert_eq!(ReportFormat::from_path(&path), format);
        assert_eq!(read_report(&path, format).unwrap(), rows);
    }
    assert!(write_report(&rows, dir.path().join("no/such/dir.json"), ReportFormat::Json).is_err());
}

#[test]
fn saved_index_survives_reload() {
    let dir = tempfile::tempdir().unwrap();
    let data = DataSet::from_rows(&[vec![1.0, 3.0, 2.0, 2.0], vec![0.0, 0.0, 0.0, 0.0], vec![4.0, 4.0, 4.0, 4.0]]).unwrap();
    let schedule = DimensionSchedule::new(vec![4, 2, 1]).unwrap();
    let index = SubspaceIndex::build(&data, &schedule, ProjectionMode::Adaptive, NormOrder::L2).unwrap();
    let path = dir.path().join("x.idx");
    save_index(&path, &index).unwrap();
    let back = load_index(&path).unwrap();
    assert_eq!(back.len(), 3);
    assert_eq!(back.schedule(), &schedule);
    let r = back.range_query(&[0.0; 4], 5.0).unwrap();
    assert_eq!(r.matches.iter().map(|m| m.id).collect::<Vec<_>>(), vec![0, 1]);
}
