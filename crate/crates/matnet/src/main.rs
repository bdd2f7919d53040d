fn main() {
    std::process::exit(matnet::cli::run());
}
