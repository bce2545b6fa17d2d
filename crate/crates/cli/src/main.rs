fn main() {
    std::process::exit(colorclass_cli::main_with_args(std::env::args_os()));
}
