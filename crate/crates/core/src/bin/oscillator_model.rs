//! The built-in oscillator behind the external-model line protocol.

use std::io::{stdin, stdout};

use drocal::model::{serve, Oscillator};

fn main() {
    if let Err(e) = serve(&Oscillator, stdin().lock(), stdout().lock()) {
        eprintln!("oscillator-model: {e}");
        std::process::exit(1);
    }
}
