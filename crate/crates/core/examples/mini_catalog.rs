//! Regenerate the bundled mini-catalog: `cargo run --example mini_catalog > data/mini/catalog.csv`.

use quakecast::catalog::write_catalog;
use quakecast::synthetic::{mini_catalog, MINI_CATALOG_SEED};

fn main() -> quakecast::Result<()> {
    write_catalog(&mini_catalog(MINI_CATALOG_SEED), std::io::stdout().lock())
}
