fn main() {
    std::process::exit(smalltime::cli::main());
}
