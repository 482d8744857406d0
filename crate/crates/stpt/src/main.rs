fn main() {
    let code = stpt::cli::main_with(std::env::args(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
