fn main() {
    std::process::exit(tokentrim::cli::run(std::env::args_os()));
}
