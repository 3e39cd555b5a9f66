fn main() {
    std::process::exit(evsplat::cli::run());
}
