use wikimrc_web::{context_window, convert, strip};
use serde_json::Value;

const PAGE: &str = "'''Varnholm''' is a town near [[Kessin|the old port]]. \
    The port trades with [[Varnholm]] and {{cite|x}} the port.";

#[test]
fn strip_lists_anchor_surfaces() {
    let v: Value = serde_json::from_str(&strip(PAGE, "en").unwrap()).unwrap();
    let anchors = v["anchors"].as_array().unwrap();
    assert_eq!(anchors.len(), 2);
    assert_eq!(anchors[0]["target"], "Kessin");
    assert_eq!(anchors[0]["surface"], "the old port");
    assert!(!v["tokens"].as_array().unwrap().iter().any(|t| t == "cite"));
}

#[test]
fn window_marks_anchor_and_repeats() {
    let v: Value = serde_json::from_str(&context_window(PAGE, "en", 1, 6, 3).unwrap()).unwrap();
    let window: Vec<&str> = v["window"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert_eq!(window[3], "Varnholm");
    assert_eq!(v["anchor"], serde_json::json!([3, 3]));
    assert_eq!(window.len(), 7);
    assert!(context_window(PAGE, "en", 5, 6, 3).is_err());
}

#[test]
fn convert_reports_assembled_gold() {
    let inst = r#"{"task":"tagging","id":"s","tokens":["Anna","flew","to","Varnholm"],"spans":[["LOC",3,3]]}"#;
    let v: Value = serde_json::from_str(&convert(inst, "conll").unwrap()).unwrap();
    let loc = v.as_array().unwrap().iter().find(|x| x["label"] == "LOC").unwrap();
    assert_eq!(loc["gold_text"][0], "Varnholm");
    let off = loc["context_offset"].as_u64().unwrap();
    assert_eq!(loc["gold"][0][0].as_u64().unwrap(), off + 3);
    assert!(convert(inst, "poetry").is_err());
}

#[test]
fn page_samples_convert() {
    let page = include_str!("../www/index.html");
    let start = page.find("const SAMPLES = {").unwrap();
    let block = &page[start..start + page[start..].find("};").unwrap()];
    let mut n = 0;
    for line in block.lines().skip(1) {
        let (scheme, rest) = line.trim().split_once(": '").unwrap();
        let json = rest.trim_end_matches("',");
        let v: Value = serde_json::from_str(&convert(json, scheme).unwrap()).unwrap();
        assert!(!v.as_array().unwrap().is_empty(), "{scheme}");
        n += 1;
    }
    assert_eq!(n, 5);
}
