fn main() {
    std::process::exit(celerlab::cli::run());
}
