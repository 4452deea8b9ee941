fn main() {
    std::process::exit(pvfree::cli::run());
}
