fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let header = std::path::Path::new(&crate_dir).join("include/subquad.h");
    cbindgen::Builder::new()
        .with_config(cbindgen::Config {
            enumeration: cbindgen::EnumConfig {
                // C has no enum scoping; SqStatus_Ok instead of a bare Ok.
                prefix_with_name: true,
                ..Default::default()
            },
            ..Default::default()
        })
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("SUBQUAD_H")
        .with_autogen_warning("/* Generated by cbindgen from the subquad-ffi crate; do not edit. */")
        .generate()
        .expect("unable to generate C header")
        .write_to_file(header);
    println!("cargo:rerun-if-changed=src/lib.rs");
}
