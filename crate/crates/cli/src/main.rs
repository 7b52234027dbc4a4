fn main() {
    std::process::exit(stackdrive_cli::main_with_args(std::env::args_os()));
}
