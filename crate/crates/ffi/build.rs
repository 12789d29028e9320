use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
    let out = PathBuf::from(env::var("OUT_DIR").expect("out dir")).join("interference_lab.h");
    let config = cbindgen::Config::from_file(PathBuf::from(&crate_dir).join("cbindgen.toml"))
        .expect("cbindgen.toml");
    match cbindgen::generate_with_config(&crate_dir, config) {
        Ok(bindings) => {
            bindings.write_to_file(&out);
            // Keep a copy in the repo so non-cargo consumers can grab it.
            let tracked = PathBuf::from(&crate_dir).join("include/interference_lab.h");
            let fresh = std::fs::read(&out).expect("generated header");
            let stale = std::fs::read(&tracked).ok();
            if stale.as_deref() != Some(fresh.as_slice()) {
                let _ = std::fs::create_dir_all(tracked.parent().unwrap());
                std::fs::write(&tracked, fresh).expect("write tracked header");
            }
        }
        Err(e) => panic!("header generation failed: {e}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
