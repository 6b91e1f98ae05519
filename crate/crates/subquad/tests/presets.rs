//! The shipped preset files must stay byte-identical to the builtin catalog:
//! `presets show` output is the canonical serialization, and drift between
//! the two would silently change what `subquad run presets/<name>.toml`
//! executes.

use std::collections::BTreeSet;
use std::path::Path;
use subquad::experiment::{builtin_presets, canonical_toml, validate_config};

fn preset_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

#[test]
fn every_builtin_preset_is_shipped_byte_identically() {
    for (name, cfg) in builtin_presets() {
        let path = preset_dir().join(format!("{name}.toml"));
        let on_disk = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("missing preset file {}: {e}", path.display()));
        assert_eq!(on_disk, canonical_toml(&cfg), "{name}.toml is out of sync");
    }
}

#[test]
fn no_stray_preset_files() {
    let known: BTreeSet<String> =
        builtin_presets().into_iter().map(|(n, _)| format!("{n}.toml")).collect();
    for entry in std::fs::read_dir(preset_dir()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(known.contains(&name), "stray file in presets/: {name}");
    }
}

#[test]
fn shipped_presets_validate() {
    for (name, _) in builtin_presets() {
        let path = preset_dir().join(format!("{name}.toml"));
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = validate_config(&text)
            .unwrap_or_else(|diags| panic!("{name}.toml invalid: {diags:?}"));
        assert_eq!(cfg.name, name);
    }
}
