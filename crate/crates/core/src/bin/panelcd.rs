fn main() {
    std::process::exit(panelcd::cli::run());
}
