fn main() {
    std::process::exit(aliasc::cli::main());
}
