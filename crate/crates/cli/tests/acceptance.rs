//! Runs the default acceptance manifest and prints one line per criterion.
//! `ACCEPT_ONLY=1,2,8` restricts the run.

use pathcalc::accept::{self, Manifest};
use pathcalc::config::parse_list;

fn main() {
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/manifests/default.toml");
    let text = std::fs::read_to_string(file).expect("default manifest");
    let mut m = Manifest::from_toml(&text).expect("valid manifest");
    if let Ok(only) = std::env::var("ACCEPT_ONLY") {
        m.only = parse_list("ACCEPT_ONLY", &only).expect("comma list of criteria");
    }
    let outcomes = accept::run(&m, |o| println!("{}", o.line()));
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
