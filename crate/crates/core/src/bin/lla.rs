fn main() {
    std::process::exit(lla_core::cli::run());
}
