fn main() {
    std::process::exit(sizegrad::cli::run());
}
