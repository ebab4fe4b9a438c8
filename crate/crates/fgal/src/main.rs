fn main() {
    std::process::exit(fgal::lab::cli::main_with_args());
}
