use std::path::Path;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR not set");
    cbindgen::generate(&crate_dir)
        .expect("failed to generate include/cmp.h")
        .write_to_file(Path::new(&crate_dir).join("include/cmp.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
