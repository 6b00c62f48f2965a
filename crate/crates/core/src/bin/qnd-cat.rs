fn main() {
    std::process::exit(qnd_cat::cli::main_with_args(std::env::args_os()));
}
