mod common;

use crosspose::io::{
    read_scenario, write_metrics_csv, write_scenario, MetricsRow, ScenarioFile, SweepRow,
    SCENARIO_VERSION,
};
use crosspose::synthetic::{make_articulated_random, make_free_floating};
use crosspose::Error;

fn sample_file(seed: u64) -> ScenarioFile {
    ScenarioFile::from_bundle(&make_free_floating(seed, 8, 6, 0.01).unwrap())
}

#[test]
fn bundle_round_trips_through_scenario_file() {
    for bundle in [
        make_free_floating(4, 9, 7, 0.02).unwrap(),
        make_articulated_random(4, 9, 7, 0.0).unwrap(),
    ] {
        let file = ScenarioFile::from_bundle(&bundle);
        assert_eq!(file.version, SCENARIO_VERSION);
        let back = file.to_bundle().unwrap();
        assert_eq!(back, bundle);
    }
}

#[test]
fn json_round_trip_is_byte_identical() {
    let file = sample_file(15);
    let text = file.to_json();
    assert!(text.ends_with('\n'));
    let parsed = ScenarioFile::from_json(&text).unwrap();
    assert_eq!(parsed, file);
    assert_eq!(parsed.to_json(), text);
}

#[test]
fn json_key_order_matches_the_schema() {
    let text = sample_file(16).to_json();
    let keys = [
        "\"version\"",
        "\"kind\"",
        "\"seed\"",
        "\"noise_sigma\"",
        "\"action_points\"",
        "\"anchor_points\"",
        "\"corr_action\"",
        "\"corr_anchor\"",
        "\"alpha_action\"",
        "\"alpha_anchor\"",
        "\"goal_flow\"",
        "\"blend\"",
        "\"gt_rotation\"",
        "\"gt_translation\"",
    ];
    let mut last = 0;
    for key in keys {
        let at = text.find(key).unwrap_or_else(|| panic!("missing {key}"));
        assert!(at > last, "{key} out of order");
        last = at;
    }
}

#[test]
fn version_and_kind_are_validated() {
    let mut file = sample_file(17);
    file.version = 2;
    assert!(matches!(
        file.to_bundle().unwrap_err(),
        Error::UnsupportedVersion(2)
    ));

    let mut file = sample_file(17);
    file.kind = "banana".into();
    assert!(matches!(file.to_bundle().unwrap_err(), Error::UnknownKind(_)));
}

#[test]
fn inconsistent_payloads_are_rejected() {
    let mut file = sample_file(18);
    file.corr_action.pop();
    assert!(matches!(
        file.to_bundle().unwrap_err(),
        Error::ShapeMismatch { .. }
    ));

    let mut file = sample_file(18);
    file.gt_rotation = [1.0, 0.4, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert!(matches!(
        file.to_bundle().unwrap_err(),
        Error::NotOrthonormal { .. }
    ));

    let mut file = sample_file(18);
    file.blend = 1.7;
    assert!(matches!(
        file.to_bundle().unwrap_err(),
        Error::BlendOutOfRange(_)
    ));
}

#[test]
fn write_then_read_round_trips_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario_0_0.json");
    let file = sample_file(19);
    write_scenario(&path, &file).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), file.to_json());
    assert_eq!(read_scenario(&path).unwrap(), file);
    // no stray temp files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn read_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    match read_scenario(&missing).unwrap_err() {
        Error::Io { path, .. } => assert!(path.contains("nope.json")),
        other => panic!("expected Io error, got {other:?}"),
    }

    let garbled = dir.path().join("bad.json");
    std::fs::write(&garbled, "{\"version\": 1,").unwrap();
    match read_scenario(&garbled).unwrap_err() {
        Error::Parse { path, message } => {
            assert!(path.contains("bad.json"));
            assert!(!message.is_empty());
        }
        other => panic!("expected Parse error, got {other:?}"),
    }
}

#[test]
fn metrics_csv_layout() {
    let row = MetricsRow {
        scenario_id: "scenario_0_0".into(),
        kind: "free-floating".into(),
        w: 0.25,
        mode: "demean".into(),
        rot_err_deg: 1.5,
        trans_err: 0.5,
        pp_mse: 0.125,
        objective: 2.0,
        oracle_gap: 0.0,
    };
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, std::slice::from_ref(&row)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text,
        "scenario_id,kind,w,mode,rot_err_deg,trans_err,pp_mse,objective,oracle_gap\n\
         scenario_0_0,free-floating,0.25,demean,1.5,0.5,0.125,2.0,0.0\n"
    );

    let sweep = SweepRow::new(row, "corr-outliers".into(), 0.5);
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &[sweep]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text,
        "scenario_id,kind,w,mode,rot_err_deg,trans_err,pp_mse,objective,oracle_gap,corruption,level\n\
         scenario_0_0,free-floating,0.25,demean,1.5,0.5,0.125,2.0,0.0,corr-outliers,0.5\n"
    );
}

#[test]
fn adversarial_floats_survive_the_round_trip() {
    let mut file = sample_file(20);
    file.noise_sigma = 0.1 + 0.2;
    file.alpha_action[0] = 1.0 / 3.0;
    file.alpha_action[1] = f64::MIN_POSITIVE;
    file.goal_flow[0][0] = -1.0e-300;
    file.goal_flow[0][1] = 9007199254740993.0_f64;
    let parsed = ScenarioFile::from_json(&file.to_json()).unwrap();
    assert_eq!(parsed.noise_sigma.to_bits(), file.noise_sigma.to_bits());
    assert_eq!(
        parsed.alpha_action[0].to_bits(),
        file.alpha_action[0].to_bits()
    );
    assert_eq!(
        parsed.alpha_action[1].to_bits(),
        file.alpha_action[1].to_bits()
    );
    assert_eq!(parsed.goal_flow[0][0].to_bits(), file.goal_flow[0][0].to_bits());
    assert_eq!(parsed.goal_flow[0][1].to_bits(), file.goal_flow[0][1].to_bits());
}
