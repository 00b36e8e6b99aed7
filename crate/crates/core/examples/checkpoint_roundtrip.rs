//! Write a policy checkpoint, read it back, and check it is bit-exact.
//!
//!     cargo run --example checkpoint_roundtrip -- [path]

use std::env;

use cloudsched::features::DecisionState;
use cloudsched::policy::{
    decode_checkpoint, encode_checkpoint, init_params, read_checkpoint, write_checkpoint, MlpArchitecture,
    NetworkArch, SpnArchitecture, CHECKPOINT_MAGIC,
};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = env::args().nth(1).map(Into::into).unwrap_or_else(|| dir.path().join("policy.ckpt"));

    let archs = [
        NetworkArch::Spn(SpnArchitecture::default()),
        NetworkArch::Mlp(MlpArchitecture { hidden1: 16, hidden2: 8 }),
    ];
    for arch in archs {
        let params = init_params(&arch, 5);
        write_checkpoint(&path, &arch, &params)?;
        let (arch2, params2) = read_checkpoint(&path)?;
        let bytes = std::fs::metadata(&path)?.len();
        let exact = params.as_slice().iter().zip(params2.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        println!("{}: {} params, {bytes} bytes, same arch {}, bit-exact {exact}", arch.label(), params.len(), arch == arch2);

        let state = DecisionState::from_features([0.5, 0.1, 0.01], vec![[1.0, 0.2, 0.3, 1.0], [0.0, 1.0, 0.0, 0.0]]);
        let a = arch.forward(params.as_slice(), &state)?;
        let b = arch2.forward(params2.as_slice(), &state)?;
        println!("  priorities before {a:?}\n  priorities after  {b:?}");
    }

    // Structural damage is reported. The format carries no checksum, so a
    // flipped bit inside the parameter block would go unnoticed.
    let bytes = encode_checkpoint(&archs[0], &init_params(&archs[0], 5));
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    let short = &bytes[..bytes.len() - 1];
    for (label, damaged) in [("bad magic", &bad_magic[..]), ("one byte short", short), ("header only", &bytes[..20])] {
        match decode_checkpoint(damaged) {
            Ok(_) => println!("{label}: decoded"),
            Err(e) => println!("{label}: rejected ({e})"),
        }
    }
    Ok(())
}
