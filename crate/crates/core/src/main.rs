fn main() {
    std::process::exit(glossdom::cli::main());
}
