//! Regenerates `fixtures/*.csv`: `cargo run -p gsr-cli --example make_fixtures`.

use gsr_cli::fixtures::{molene_like, noaa_like};
use std::path::Path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    molene_like().write(dir.join("molene_like.csv"))?;
    noaa_like().write(dir.join("noaa_like.csv"))?;
    Ok(())
}
