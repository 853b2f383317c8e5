// LAPACK comes from the system OpenBLAS; override with TFIM_QUENCH_LAPACK_LIB.
fn main() {
    println!("cargo:rerun-if-env-changed=TFIM_QUENCH_LAPACK_LIB");
    let lib = std::env::var("TFIM_QUENCH_LAPACK_LIB").unwrap_or_else(|_| "openblas".into());
    for name in lib.split(',') {
        println!("cargo:rustc-link-lib={}", name.trim());
    }
}
