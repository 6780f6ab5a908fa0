fn main() {
    std::process::exit(ssmlab_cli::main_with_args(std::env::args_os()));
}
