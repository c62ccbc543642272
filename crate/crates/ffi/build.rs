use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("set by cargo"));
    let out = crate_dir.join("include").join("crimesim.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("valid cbindgen.toml");
    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation");

    let mut buf = Vec::new();
    bindings.write(&mut buf);
    if std::fs::read(&out).ok().as_deref() != Some(&buf[..]) {
        std::fs::create_dir_all(out.parent().expect("include dir")).expect("create include dir");
        std::fs::write(&out, &buf).expect("write header");
    }
}
