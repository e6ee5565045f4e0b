use sha2::{Digest, Sha256};

// The NAL-R correction table comes from outside this project; any edit to it
// must be deliberate and come with an updated digest here.
const NALR_TABLE_SHA256: &str = "806c209dfc3e18812b4cea876d084c224e953fd2e9ce6db9e4fec9ff3b13ee26";

fn main() {
    let path = "data/nalr_k.csv";
    println!("cargo:rerun-if-changed={path}");
    let bytes = std::fs::read(path).expect("read NAL-R table");
    let digest: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    if digest != NALR_TABLE_SHA256 {
        panic!("{path} changed: sha256 {digest} does not match the pinned {NALR_TABLE_SHA256}");
    }
}
