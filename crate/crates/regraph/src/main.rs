fn main() {
    std::process::exit(regraph::cli::main());
}
