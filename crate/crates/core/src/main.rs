fn main() {
    std::process::exit(greencoll::cli::main());
}
