use std::collections::BTreeSet;

use covarlab_cli::config::{default_config, load, schema, ExperimentConfig};
use covarlab_cli::{resolve_config, Command, Options};
use serde_json::{json, Value};

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn schema_lists_exactly_the_config_keys() {
    let s = schema();
    let props = keys(&s["properties"]);
    let cfg = serde_json::to_value(default_config(Command::DynlocReport)).unwrap();
    assert_eq!(props, keys(&cfg));
    let tol = keys(&s["$defs"]["tolerances"]["properties"]);
    assert_eq!(tol, keys(&cfg["tolerances"]));
    assert_eq!(s["additionalProperties"], false);
}

#[test]
fn report_schema_matches_a_report() {
    let s: Value = serde_json::from_str(include_str!("../../../schemas/report.schema.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = Options { out: Some(dir.path().into()), resolution_scale: 1, ..Default::default() };
    let r = covarlab_cli::run(Command::FunctorLaws, &opts).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(keys(&s["properties"]), keys(&v));
    let check = keys(&s["$defs"]["check"]["properties"]);
    for c in v["checks"].as_array().unwrap() {
        assert!(keys(c).is_subset(&check));
    }
}

#[test]
fn every_default_validates() {
    for c in Command::ALL {
        let cfg = default_config(c);
        cfg.validate(1).unwrap_or_else(|e| panic!("{}: {e}", c.name()));
        let back: ExperimentConfig = serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}

#[test]
fn overrides_replace_top_level_keys() {
    let cfg = load(Command::SpassDemo, Some(r#"{"masses": [0.25, 1.0], "lambda_compact": 3}"#)).unwrap();
    assert_eq!(cfg.masses, vec![0.25, 1.0]);
    assert_eq!(cfg.lambda_compact, 3);
    assert_eq!(cfg.catalog_n_x, default_config(Command::SpassDemo).catalog_n_x);
    assert!(load(Command::SpassDemo, Some(r#"{"mass": 1}"#)).is_err());
    assert!(load(Command::SpassDemo, Some("[1]")).is_err());
    assert!(load(Command::SpassDemo, Some(r#"{"tolerances": {"law": 1e-10}}"#)).is_err());
}

#[test]
fn validation_rejects_bad_values() {
    let base = default_config(Command::FunctorLaws);
    let mut c = base.clone();
    c.tolerances.law = 0.0;
    assert!(c.validate(1).is_err());
    let mut c = base.clone();
    c.jitter = 0.1;
    assert!(c.validate(1).is_err());
    c.seed = Some(7);
    assert!(c.validate(1).is_ok());
    let mut c = base.clone();
    c.resolutions = vec![1, 2];
    c.tolerances.locality = vec![1e-3];
    assert!(c.validate(1).is_err(), "one locality tolerance per resolution");
    c.tolerances.locality = vec![1e-3, 1e-3];
    assert!(c.validate(1).is_ok());
    assert!(base.validate(0).is_err());
    let mut c = default_config(Command::DynlocReport);
    c.regions[0].spacetime = 9;
    assert!(c.validate(1).is_err());
}

#[test]
fn hash_ignores_output_and_cache_policy() {
    let a = default_config(Command::RceCheck);
    let mut b = a.clone();
    b.out = Some("/elsewhere".into());
    b.cache = false;
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    b.seed = Some(1);
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn jitter_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, json!({ "jitter": 0.05 }).to_string()).unwrap();
    let opts = |seed| Options { config: Some(p.clone()), resolution_scale: 1, seed: Some(seed), ..Default::default() };
    let a = resolve_config(Command::SpassDemo, &opts(3)).unwrap();
    let b = resolve_config(Command::SpassDemo, &opts(3)).unwrap();
    let c = resolve_config(Command::SpassDemo, &opts(4)).unwrap();
    assert_eq!(a.perturbations, b.perturbations);
    assert_ne!(a.perturbations, c.perturbations);
    let base = default_config(Command::SpassDemo).perturbations[0].bump.center;
    let moved = a.perturbations[0].bump.center;
    assert!((0..2).all(|i| (moved[i] - base[i]).abs() <= 0.05));
    assert!(resolve_config(Command::SpassDemo, &Options { config: Some(p), resolution_scale: 1, ..Default::default() }).is_err());
}

#[test]
fn shipped_configs_are_the_defaults() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for c in Command::ALL {
        let mut text = serde_json::to_string_pretty(&default_config(c)).unwrap();
        text.push('\n');
        let path = root.join(format!("{}.json", c.name()));
        if std::env::var_os("COVARLAB_WRITE_CONFIGS").is_some() {
            std::fs::create_dir_all(&root).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text, "{} is stale", path.display());
    }
}
