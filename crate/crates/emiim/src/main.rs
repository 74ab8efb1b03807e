fn main() {
    let code = emiim::cli::run(std::env::args_os());
    std::process::exit(code);
}
