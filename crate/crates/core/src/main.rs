fn main() {
    std::process::exit(relopt::cli::main_entry());
}
