//! One line per acceptance criterion; exits nonzero if any fails.

use selab_core::verify::{run, VerifyOptions};

fn main() {
    let only = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let results = run(&VerifyOptions {
        only,
        n_override: None,
        seed: 2024,
    });
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
