//! Command-line entry point. Placeholder while the lower layers land.

pub fn run() -> i32 {
    eprintln!("not wired up yet");
    3
}
