fn main() {
    std::process::exit(postlasso::cli::main_impl());
}
