fn main() {
    std::process::exit(agrol::cli::run());
}
