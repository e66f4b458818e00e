fn main() {
    std::process::exit(tempest::cli::main());
}
