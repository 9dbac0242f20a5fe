fn main() {
    let mut out = std::io::stdout().lock();
    let code = tgauss::cli::run_from_args(std::env::args_os(), &mut out);
    std::process::exit(code);
}
