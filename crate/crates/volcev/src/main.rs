fn main() {
    std::process::exit(volcev::cli::run());
}
