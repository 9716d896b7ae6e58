fn main() {
    std::process::exit(entropy_decay::cli::main());
}
