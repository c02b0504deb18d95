fn main() {
    std::process::exit(symcs::cli::run());
}
