fn main() {
    std::process::exit(syntax_emergence::cli::main_with_args(std::env::args_os()));
}
