fn main() {
    std::process::exit(lapdeconv::cli::main_with_args(std::env::args_os()));
}
