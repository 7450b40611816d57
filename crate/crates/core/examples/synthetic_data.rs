//! Generates both synthetic tasks and writes one to disk as AFF1 + manifest.
//!
//! `cargo run --example synthetic_data -- [out_dir]`

use severity_seq::data::{generate_synthetic, load_dataset, write_synthetic, SyntheticTaskSpec, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for task in [TaskKind::OrderInvariant, TaskKind::OrderDependent] {
        let spec = SyntheticTaskSpec {
            task,
            num_videos: 60,
            seed: 1,
            ..SyntheticTaskSpec::default()
        };
        let ds = generate_synthetic(&spec)?;
        println!("{task:?}: {} videos, class counts {:?}", ds.videos.len(), ds.class_counts());
    }

    let tmp = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map_or_else(|| tmp.path().to_path_buf(), Into::into);
    let spec = SyntheticTaskSpec::default();
    let manifest = write_synthetic(&out, &generate_synthetic(&spec)?)?;
    let data = load_dataset(&manifest, spec.schema)?;
    println!("wrote {} ({} videos, D = {:?})", manifest.display(), data.len(), data.dim());
    Ok(())
}
