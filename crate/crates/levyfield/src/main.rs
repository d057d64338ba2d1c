fn main() {
    std::process::exit(levyfield::cli::run());
}
