fn main() {
    std::process::exit(procsift::cli::main());
}
