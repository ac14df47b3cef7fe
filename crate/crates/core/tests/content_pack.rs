mod common;

use std::fs;
use std::path::Path;

use chrono::NaiveTime;
use proptest::prelude::*;
use serde_json::Value;
use zooguide::content::{
    events_between, get_content, inspect_pack, load_pack, search, time_of_day, ContentError, MediaRef, PackError,
    ANIMALS_FILE, CALIBRATION_FILE, EVENTS_FILE, HOTSPOTS_FILE, MANIFEST_FILE,
};
use zooguide::{AnimalRecord, ContentPack, EventRecord};

use common::{pack, pack_dir, scratch_pack};

fn rewrite_line(path: &Path, line: usize, edit: impl FnOnce(&str) -> String) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[line - 1] = edit(&lines[line - 1]);
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn line_of(path: &Path, needle: &str) -> usize {
    fs::read_to_string(path).unwrap().lines().position(|l| l.contains(needle)).unwrap() + 1
}

#[test]
fn fixture_loads() {
    let pack = pack();
    let mut ids: Vec<&str> = pack.animals.iter().map(|a| a.id.as_str()).collect();
    ids.sort();
    assert_eq!(ids, ["jaguar", "leopard", "lion", "tiger"]);
    assert_eq!(pack.hotspots.len(), 4);
    assert_eq!(pack.events.len(), 3);
    assert_eq!(pack.calibration.control_points.len(), 9);
    for hotspot in &pack.hotspots {
        assert_eq!(get_content(&pack, &hotspot.id).unwrap().id, hotspot.content_id);
    }
    assert_eq!(get_content(&pack, "tiger-spot").unwrap().name, "Sumatran Tiger");
    assert_eq!(get_content(&pack, "panda-spot"), Err(ContentError::UnknownHotspot("panda-spot".into())));
}

#[test]
fn loading_is_deterministic() {
    assert_eq!(load_pack(pack_dir()).unwrap(), load_pack(pack_dir()).unwrap());
}

#[test]
fn missing_directory_is_io() {
    let err = load_pack("/nonexistent/pack").unwrap_err();
    assert!(err.is_io());
}

#[test]
fn ghost_content_id_is_a_broken_reference() {
    let dir = scratch_pack();
    let file = dir.path().join(HOTSPOTS_FILE);
    let line = line_of(&file, "lion-spot");
    rewrite_line(&file, line, |l| l.replace("\"content_id\": \"lion\"", "\"content_id\": \"ghost\""));
    let report = inspect_pack(dir.path());
    assert_eq!(report.findings.len(), 1, "{:?}", report.findings);
    match &report.findings[0] {
        PackError::BrokenReference { locator, field, id } => {
            assert_eq!((locator.file.as_str(), locator.line), (HOTSPOTS_FILE, Some(line)));
            assert_eq!(locator.record.as_deref(), Some("lion-spot"));
            assert_eq!((*field, id.as_str()), ("content_id", "ghost"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn event_ending_before_start_is_named() {
    let dir = scratch_pack();
    let file = dir.path().join(EVENTS_FILE);
    let line = line_of(&file, "tiger-talk");
    rewrite_line(&file, line, |l| l.replace("\"end\": \"10:45\"", "\"end\": \"10:30\""));
    let report = inspect_pack(dir.path());
    assert_eq!(report.findings.len(), 1, "{:?}", report.findings);
    let finding = &report.findings[0];
    assert!(matches!(finding, PackError::SchemaViolation { .. }));
    assert_eq!(finding.locator().record.as_deref(), Some("tiger-talk"));
    assert_eq!(finding.locator().line, Some(line));
}

#[test]
fn three_defects_three_findings() {
    let dir = scratch_pack();
    let hotspots = dir.path().join(HOTSPOTS_FILE);
    let line = line_of(&hotspots, "jaguar-spot");
    rewrite_line(&hotspots, line, |l| l.replace("\"content_id\": \"jaguar\"", "\"content_id\": \"ghost\""));
    let events = dir.path().join(EVENTS_FILE);
    let line = line_of(&events, "lion-feeding");
    rewrite_line(&events, line, |l| l.replace("\"start\": \"11:00\"", "\"start\": \"12:00\""));
    fs::remove_file(dir.path().join("media/lion.txt")).unwrap();

    let report = inspect_pack(dir.path());
    assert!(report.pack.is_none());
    let mut kinds: Vec<(String, Option<String>)> = report
        .findings
        .iter()
        .map(|f| (f.locator().file.clone(), f.locator().record.clone()))
        .collect();
    kinds.sort();
    assert_eq!(
        kinds,
        vec![
            (ANIMALS_FILE.to_string(), Some("lion".to_string())),
            (EVENTS_FILE.to_string(), Some("lion-feeding".to_string())),
            (HOTSPOTS_FILE.to_string(), Some("jaguar-spot".to_string())),
        ]
    );
}

#[test]
fn stale_cached_calibration_is_a_mismatch() {
    let dir = scratch_pack();
    let file = dir.path().join(MANIFEST_FILE);
    let mut manifest: Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    let a = manifest["calibration"]["a"].as_f64().unwrap();
    manifest["calibration"]["a"] = Value::from(a * (1.0 + 1e-5));
    fs::write(&file, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    let report = inspect_pack(dir.path());
    assert!(matches!(
        report.findings.as_slice(),
        [PackError::CalibrationMismatch { coefficient: "a", .. }]
    ));

    // within tolerance is fine
    manifest["calibration"]["a"] = Value::from(a * (1.0 + 1e-8));
    fs::write(&file, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    assert!(inspect_pack(dir.path()).findings.is_empty());
}

#[test]
fn unsupported_version_and_unknown_manifest_field() {
    let dir = scratch_pack();
    let file = dir.path().join(MANIFEST_FILE);
    let original: Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    let mut manifest = original.clone();
    manifest["format_version"] = Value::from(2);
    fs::write(&file, manifest.to_string()).unwrap();
    assert!(matches!(inspect_pack(dir.path()).findings[0], PackError::UnsupportedVersion { .. }));

    let mut manifest = original;
    manifest["surprise"] = Value::from(true);
    fs::write(&file, manifest.to_string()).unwrap();
    let findings = inspect_pack(dir.path()).findings;
    assert!(findings[0].to_string().contains("surprise"), "{}", findings[0]);
}

#[test]
fn missing_table_is_reported() {
    let dir = scratch_pack();
    fs::remove_file(dir.path().join(EVENTS_FILE)).unwrap();
    let findings = inspect_pack(dir.path()).findings;
    assert!(matches!(findings.as_slice(), [PackError::MissingFile { .. }]));
    assert_eq!(findings[0].locator().file, EVENTS_FILE);
}

#[test]
fn duplicate_and_non_slug_ids() {
    let dir = scratch_pack();
    let file = dir.path().join(ANIMALS_FILE);
    let line = line_of(&file, "\"id\": \"jaguar\"");
    rewrite_line(&file, line, |l| l.replace("\"id\": \"jaguar\"", "\"id\": \"lion\""));
    let line = line_of(&file, "\"id\": \"leopard\"");
    rewrite_line(&file, line, |l| l.replace("\"id\": \"leopard\"", "\"id\": \"Leopard Cat\""));
    let findings = inspect_pack(dir.path()).findings;
    let messages: Vec<String> = findings.iter().map(ToString::to_string).collect();
    assert!(messages.iter().any(|m| m.contains("duplicate id \"lion\"")), "{messages:?}");
    assert!(messages.iter().any(|m| m.contains("not a slug")), "{messages:?}");
}

#[test]
fn control_point_outside_bounds() {
    let dir = scratch_pack();
    let file = dir.path().join(CALIBRATION_FILE);
    rewrite_line(&file, 2, |l| l.replacen("-37.", "-38.", 1));
    let findings = inspect_pack(dir.path()).findings;
    assert!(findings.iter().any(|f| f.locator().file == CALIBRATION_FILE
        && f.locator().line == Some(2)
        && f.to_string().contains("outside the zoo bounds")));
}

/// Replaces every field of every record with a value of the wrong type, one
/// at a time, and checks the finding points at that file and line.
#[test]
fn every_corrupted_field_is_located() {
    let mut cases = 0;
    for file in [ANIMALS_FILE, HOTSPOTS_FILE, EVENTS_FILE] {
        let text = fs::read_to_string(pack_dir().join(file)).unwrap();
        for (index, line) in text.lines().enumerate() {
            let record: serde_json::Map<String, Value> = serde_json::from_str(line).unwrap();
            for key in record.keys() {
                let dir = scratch_pack();
                let mut bad = record.clone();
                bad.insert(key.clone(), serde_json::json!({ "bogus": true }));
                rewrite_line(&dir.path().join(file), index + 1, |_| Value::Object(bad).to_string());
                let findings = inspect_pack(dir.path()).findings;
                assert!(
                    findings.iter().any(|f| f.locator().file == file && f.locator().line == Some(index + 1)),
                    "{file}:{} field {key}: {findings:?}",
                    index + 1
                );
                cases += 1;
            }
        }
    }

    let manifest: serde_json::Map<String, Value> =
        serde_json::from_str(&fs::read_to_string(pack_dir().join(MANIFEST_FILE)).unwrap()).unwrap();
    for key in manifest.keys() {
        let dir = scratch_pack();
        let mut bad = manifest.clone();
        bad.insert(key.clone(), serde_json::json!({ "bogus": true }));
        fs::write(dir.path().join(MANIFEST_FILE), Value::Object(bad).to_string()).unwrap();
        let findings = inspect_pack(dir.path()).findings;
        assert!(
            findings.iter().any(|f| f.locator().file == MANIFEST_FILE),
            "manifest field {key}: {findings:?}"
        );
        cases += 1;
    }

    let csv = fs::read_to_string(pack_dir().join(CALIBRATION_FILE)).unwrap();
    for (index, line) in csv.lines().enumerate().skip(1) {
        for column in 0..4 {
            let dir = scratch_pack();
            rewrite_line(&dir.path().join(CALIBRATION_FILE), index + 1, |_| {
                let mut cells: Vec<&str> = line.split(',').collect();
                cells[column] = "x";
                cells.join(",")
            });
            let findings = inspect_pack(dir.path()).findings;
            assert!(
                findings.iter().any(|f| f.locator().file == CALIBRATION_FILE && f.locator().line == Some(index + 1)),
                "calibration line {} column {column}: {findings:?}",
                index + 1
            );
            cases += 1;
        }
    }
    assert!(cases > 50, "{cases}");
}

#[test]
fn search_examples() {
    let pack = pack();
    assert!(search(&pack, "").is_empty());
    let ids = |q: &str| search(&pack, q).into_iter().map(|a| a.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids("TIGER"), ["tiger"]);
    assert_eq!(ids("panthera"), ["jaguar", "leopard", "lion", "tiger"]);
    assert!(ids("zebra").is_empty());
}

#[test]
fn events_examples() {
    let pack = pack();
    let t = |s: &str| time_of_day::parse(s).unwrap();
    let ids = |from: &str, to: &str| {
        events_between(&pack, t(from), t(to))
            .into_iter()
            .map(|e| e.id.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(ids("00:00", "23:59"), ["tiger-talk", "lion-feeding", "keeper-talk"]);
    assert_eq!(ids("10:30", "10:30"), Vec::<String>::new());
    assert_eq!(ids("10:00", "11:00"), ["tiger-talk"]);
    assert_eq!(ids("10:44", "11:01"), ["tiger-talk", "lion-feeding"]);
}

fn random_pack(animals: Vec<AnimalRecord>, events: Vec<EventRecord>) -> ContentPack {
    ContentPack {
        animals,
        events,
        ..(*pack()).clone()
    }
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["Tiger", "lion", "cat", "Panthera", "big", "stripe", "spot", "night", "ti", "on"])
        .prop_map(str::to_string)
}

fn animal_strategy() -> impl Strategy<Value = Vec<AnimalRecord>> {
    prop::collection::vec((word(), word(), prop::collection::vec(word(), 0..4)), 0..12).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (name, species, description))| AnimalRecord {
                id: format!("a{i:02}"),
                name,
                species,
                description: description.join(" "),
                media: Vec::<MediaRef>::new(),
            })
            .collect()
    })
}

fn minute() -> impl Strategy<Value = NaiveTime> {
    (0u32..24 * 60).prop_map(|m| NaiveTime::from_hms_opt(m / 60, m % 60, 0).unwrap())
}

fn event_strategy() -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec((minute(), 1u32..180), 0..12).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (start, len))| EventRecord {
                id: format!("e{i:02}"),
                title: format!("event {i}"),
                location_hotspot_id: None,
                start,
                end: start.overflowing_add_signed(chrono::TimeDelta::minutes(i64::from(len))).0.max(start),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn search_matches_linear_scan(animals in animal_strategy(), query in prop::sample::select(vec!["", "TI", "tiger", "CAT", "panthera", "on", "zebra", "big stripe", "e"])) {
        let pack = random_pack(animals, Vec::new());
        let got: Vec<&str> = search(&pack, query).iter().map(|a| a.id.as_str()).collect();
        let needle = query.to_lowercase();
        let mut want: Vec<(usize, &str)> = Vec::new();
        if !query.is_empty() {
            for a in &pack.animals {
                let fields = [&a.name, &a.species, &a.description];
                if let Some(rank) = fields.iter().position(|f| f.to_lowercase().contains(&needle)) {
                    want.push((rank, a.id.as_str()));
                }
            }
        }
        want.sort();
        let want: Vec<&str> = want.into_iter().map(|(_, id)| id).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn events_match_overlap_scan(events in event_strategy(), from in minute(), to in minute()) {
        let pack = random_pack(Vec::new(), events);
        let got: Vec<&str> = events_between(&pack, from, to).iter().map(|e| e.id.as_str()).collect();
        let mut want: Vec<&EventRecord> = pack.events.iter().filter(|e| e.start < to && from < e.end).collect();
        want.sort_by_key(|e| (e.start, e.id.clone()));
        let want: Vec<&str> = want.into_iter().map(|e| e.id.as_str()).collect();
        prop_assert_eq!(got, want);
    }
}
