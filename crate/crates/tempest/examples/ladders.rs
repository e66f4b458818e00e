//! The three ladder spacings side by side, plus the parser the CLI uses.

use tempest::ladder::{parse_ladder, TemperatureLadder};

fn show(name: &str, ladder: &TemperatureLadder) {
    let rungs: Vec<String> = ladder.rungs().iter().map(|k| format!("{k:.4}")).collect();
    println!("{name:<28} {}", rungs.join("  "));
}

fn main() -> tempest::Result<()> {
    show("geometric (delta = 0.5)", &TemperatureLadder::geometric(6, 0.5)?);
    show("harmonic (delta = 0.5)", &TemperatureLadder::harmonic(6, 0.5)?);
    show("geometric to k_min = 0.1", &TemperatureLadder::truncated_geometric(6, 0.1)?);
    show("explicit", &TemperatureLadder::explicit(vec![1.0, 0.8, 0.3])?);

    // The same constructions in the spec-string form the CLI accepts.
    for spec in ["geometric:m=6,delta=0.5", "geometric:m=6,kmin=0.1", "explicit:1,0.8,0.3"] {
        let ladder = parse_ladder(spec)?;
        show(spec, &ladder);
    }
    Ok(())
}
