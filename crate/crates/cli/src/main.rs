fn main() {
    std::process::exit(coldamp_cli::cli::main());
}
