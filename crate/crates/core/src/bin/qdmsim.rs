fn main() {
    std::process::exit(qdmsim::cli::main_with_args(std::env::args_os()));
}
